// Copyright 2026 The fedsnn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Whole-network passes for both model kinds.
//
// The SNN pass is evaluated layer by layer: a layer's input at every timestep
// is known once the layer below has been run for all T steps, because no
// layer feeds back into an earlier one. Each layer therefore runs its kernel
// once over a [T*B, ...] batch, then normalizes per timestep and walks the
// membrane recurrence forward in time. The result equals stepping the whole
// network one timestep at a time.

#include "fedsnn/model.hpp"

#include <span>
#include <vector>

namespace fedsnn {

struct SnnLayerTrace {
  Tensor input;                   // [T*B, ...] input the kernel saw
  Tensor potential;               // [T*B, ...] pre-reset membrane (hidden layers)
  Tensor spikes;                  // [T*B, ...] (hidden layers)
  std::vector<BnttCache> bntt;    // one per timestep when normalized
};

/// Activations retained by a training-mode forward pass for backpropagation.
struct SnnTrace {
  std::vector<SnnLayerTrace> layers;
  Tensor logits;
  Index batch = 0;
  bool valid = false;
};

/// Running totals of the activations each layer consumed, for spike-rate
/// measurement. Entries are indexed by layer.
struct ActivityStats {
  std::vector<double> input_sum;
  std::vector<double> input_count;

  double rate(std::size_t layer) const {
    return input_count.at(layer) > 0 ? input_sum.at(layer) / input_count.at(layer) : 0.0;
  }
};

/// Runs the SNN over a spike train [T, B, ...]; returns the final layer's
/// accumulated potentials [B, classes]. Training mode normalizes with batch
/// statistics, updates running statistics and fills `trace` if given.
Tensor snn_forward(Model& model, const Tensor& spike_input, Mode mode, SnnTrace* trace = nullptr,
                   ActivityStats* stats = nullptr);

/// Inference-mode forward on a const model.
Tensor snn_infer(const Model& model, const Tensor& spike_input, ActivityStats* stats = nullptr);

/// Surrogate-gradient BPTT through the retained forward pass. Returns the
/// gradient of the batch-mean cross entropy for every parameter, in the
/// model's flat layout. Throws if `trace` holds no training-mode pass.
ParamVector snn_backward(const Model& model, const SnnTrace& trace, std::span<const int> labels,
                         float* loss = nullptr);

/// Same, starting from an explicit loss gradient at the logits [B, classes].
ParamVector snn_backward_from(const Model& model, const SnnTrace& trace, const Tensor& grad_logits);

struct AnnTrace {
  std::vector<Tensor> inputs;   // per layer
  std::vector<Tensor> preacts;  // per layer, before ReLU
  Tensor logits;
  bool valid = false;
};

/// ReLU network over images [B, C, H, W]; ReLU follows every hidden weighted layer.
Tensor ann_forward(const Model& model, const Tensor& images, AnnTrace* trace = nullptr);

ParamVector ann_backward(const Model& model, const AnnTrace& trace, std::span<const int> labels,
                         float* loss = nullptr);

}  // namespace fedsnn
