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

#include "fedsnn/dataset.hpp"
#include "fedsnn/model.hpp"
#include "fedsnn/network.hpp"

#include <utility>
#include <vector>

namespace fedsnn {

struct SgdConfig {
  float learning_rate = 0.1f;
  float momentum = 0.0f;
  float weight_decay = 0.0f;
  /// (round, divisor): from that round on the rate is divided by the divisor.
  /// Entries compound.
  std::vector<std::pair<int, float>> lr_schedule;

  void validate() const;
  /// Copy with the learning rate in effect at `round` (0-based).
  SgdConfig at_round(int round) const;
};

struct SgdState {
  Eigen::VectorXf velocity;  // empty until the first step
};

struct GradientResult {
  ParamVector grad;
  float loss = 0.0f;  // batch mean, before any update
};

/// Batch-mean loss gradient. SNN models rate-code the batch first: sample s
/// draws from encode_stream.child(sample_ids[s]). Runs the forward pass in
/// training mode, so BNTT running statistics move.
GradientResult compute_gradients(Model& model, const Batch& batch, const RngStream& encode_stream);

/// One SGD step: v = momentum * v + (g + weight_decay * p); p -= lr * v.
/// Returns the pre-update batch mean loss.
float train_step(Model& model, const Batch& batch, const SgdConfig& opt, SgdState& state,
                 const RngStream& encode_stream);

/// Classification accuracy in inference mode.
double evaluate_accuracy(const Model& model, const Dataset& data, const RngStream& encode_stream,
                         Index batch_size = 64);

/// Batches of one local epoch: `indices` shuffled by `stream`, cut into
/// chunks of `batch_size`. A trailing chunk of a single sample is merged into
/// the previous chunk (per-timestep normalization needs two samples).
std::vector<std::vector<std::size_t>> epoch_batches(std::vector<std::size_t> indices, Index batch_size,
                                                    RngStream& stream);

}  // namespace fedsnn
