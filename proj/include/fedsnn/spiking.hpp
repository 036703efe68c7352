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

// Spiking primitives: rate coding, the leaky integrate-and-fire update, the
// piecewise-linear surrogate derivative, per-timestep batch normalization and
// the cross-entropy loss on accumulated output potentials.

#include "fedsnn/rng.hpp"
#include "fedsnn/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace fedsnn {

enum class Mode { training, inference };

struct SnnConfig {
  int timesteps = 20;
  float leak = 0.9f;
  /// One threshold per hidden spiking layer; a single value applies to all.
  std::vector<float> thresholds{1.0f};
  float surrogate_decay = 0.3f;

  float threshold(std::size_t hidden_layer) const {
    return thresholds.size() == 1 ? thresholds.front() : thresholds.at(hidden_layer);
  }

  /// Throws std::invalid_argument on any violated constraint.
  void validate(std::size_t hidden_layers) const;
};

struct LifState {
  Tensor membrane;
  Tensor spikes;  // 0/1

  static LifState zeros(const Shape& shape) { return {Tensor(shape), Tensor(shape)}; }
};

struct LifStep {
  LifState state;
  Tensor potential;  // membrane before the reset, needed by the surrogate
};

/// u' = leak * u + input; spike where u' > threshold; spiking neurons reset to 0.
LifStep lif_step(const LifState& state, const Tensor& weighted_input, float leak, float threshold);

/// xi * max(0, 1 - |u - v| / v)
inline float surrogate_grad(float u, float v, float xi) {
  const float d = 1.0f - std::abs(u - v) / v;
  return d > 0.0f ? xi * d : 0.0f;
}

/// Bernoulli spike trains: output[t, ...] = 1 iff a fresh uniform draw is
/// strictly below the pixel value. Values outside [0,1] are rejected.
Tensor poisson_encode(const Tensor& image, int timesteps, RngStream& stream);

/// Encodes a batch [B, ...] into [T, B, ...]. Sample b draws from
/// `base.child(sample_ids[b])`, so a sample's spike train does not depend on
/// which batch it lands in.
Tensor poisson_encode_batch(const Tensor& images, int timesteps, const RngStream& base,
                            std::span<const std::uint64_t> sample_ids);

/// Per-timestep normalization state for one layer: a learned scale and
/// running statistics for every (timestep, channel) pair. No shift term.
struct BnttState {
  Tensor gamma;          // [T, C]
  Tensor running_mean;   // [T, C]
  Tensor running_var;    // [T, C]
  float epsilon = 1e-5f;
  float momentum = 0.1f;

  static BnttState create(Index channels, int timesteps);
  Index channels() const { return gamma.dim(1); }
  int timesteps() const { return int(gamma.dim(0)); }
};

struct BnttCache {
  Tensor normalized;          // x_hat, same shape as the pre-activation
  Eigen::VectorXf inv_std;    // per channel
};

/// Normalizes `preact` ([B, C, ...]) at timestep t. Training mode uses batch
/// statistics (biased variance) and updates the running statistics by EMA
/// (unbiased variance); inference mode uses the running statistics.
Tensor bntt_apply(BnttState& bntt, int t, const Tensor& preact, Mode mode, BnttCache* cache = nullptr);

/// Inference-only overload; never touches the running statistics.
Tensor bntt_apply(const BnttState& bntt, int t, const Tensor& preact);

template <typename Scalar>
struct BasicBnttGrads {
  BasicTensor<Scalar> input;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gamma;  // [C]
};
using BnttGrads = BasicBnttGrads<float>;

/// Backward of a training-mode bntt_apply at timestep t.
BnttGrads bntt_backward(const BnttState& bntt, int t, const BnttCache& cache, const Tensor& grad_out);

/// Same, with the gradient carried in double; the cached forward values are
/// float either way.
BasicBnttGrads<double> bntt_backward(const BnttState& bntt, int t, const BnttCache& cache,
                                     const BasicTensor<double>& grad_out);

/// -log softmax(logits)[label] for a single [C] logit vector.
float snn_loss(const Tensor& logits, int label);

struct LossAndGrad {
  float loss = 0.0f;     // batch mean
  Tensor grad;           // d(mean loss)/d(logits), [B, C]
};

/// Batch-mean cross entropy on [B, C] logits with a stable log-sum-exp.
LossAndGrad cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace fedsnn
