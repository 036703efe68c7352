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

#include "fedsnn/spiking.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsnn {

void SnnConfig::validate(std::size_t hidden_layers) const {
  if (timesteps < 1) throw std::invalid_argument("timesteps must be >= 1");
  if (!(leak > 0.0f && leak < 1.0f)) throw std::invalid_argument("leak must lie in (0,1)");
  if (!(surrogate_decay > 0.0f)) throw std::invalid_argument("surrogate decay must be > 0");
  if (thresholds.empty()) throw std::invalid_argument("at least one threshold is required");
  if (thresholds.size() != 1 && thresholds.size() != hidden_layers) {
    throw std::invalid_argument("expected 1 or " + std::to_string(hidden_layers) + " thresholds, got " +
                                std::to_string(thresholds.size()));
  }
  for (float v : thresholds) {
    if (!(v > 0.0f)) throw std::invalid_argument("thresholds must be > 0");
  }
}

LifStep lif_step(const LifState& state, const Tensor& weighted_input, float leak, float threshold) {
  if (state.membrane.shape() != weighted_input.shape()) {
    throw std::invalid_argument("lif_step: membrane " + shape_to_string(state.membrane.shape()) + " vs input " +
                                shape_to_string(weighted_input.shape()));
  }
  LifStep step;
  step.potential = Tensor(weighted_input.shape(), (leak * state.membrane.values().array() +
                                                   weighted_input.values().array()).matrix());
  const auto fired = (step.potential.values().array() > threshold).cast<float>();
  step.state.spikes = Tensor(weighted_input.shape(), fired.matrix());
  step.state.membrane = Tensor(weighted_input.shape(), (step.potential.values().array() * (1.0f - fired)).matrix());
  return step;
}

Tensor poisson_encode(const Tensor& image, int timesteps, RngStream& stream) {
  if (timesteps < 1) throw std::invalid_argument("poisson_encode: timesteps must be >= 1");
  if (image.size() && (image.values().minCoeff() < 0.0f || image.values().maxCoeff() > 1.0f)) {
    throw std::invalid_argument("poisson_encode: pixel values must lie in [0,1]");
  }
  Shape shape = image.shape();
  shape.insert(shape.begin(), timesteps);
  Tensor out(shape);
  const Index n = image.size();
  for (int t = 0; t < timesteps; ++t) {
    for (Index i = 0; i < n; ++i) out[t * n + i] = stream.uniform_float() < image[i] ? 1.0f : 0.0f;
  }
  return out;
}

Tensor poisson_encode_batch(const Tensor& images, int timesteps, const RngStream& base,
                            std::span<const std::uint64_t> sample_ids) {
  const Index batch = images.dim(0);
  if (Index(sample_ids.size()) != batch) throw std::invalid_argument("poisson_encode_batch: one id per sample");
  const Index each = images.slice_size();
  Shape sample_shape(images.shape().begin() + 1, images.shape().end());
  Shape shape = images.shape();
  shape.insert(shape.begin(), timesteps);
  Tensor out(shape);
  for (Index b = 0; b < batch; ++b) {
    RngStream stream = base.child(sample_ids[std::size_t(b)]);
    const Tensor train = poisson_encode(Tensor(sample_shape, images.values().segment(b * each, each)), timesteps, stream);
    for (int t = 0; t < timesteps; ++t) {
      out.values().segment((t * batch + b) * each, each) = train.values().segment(t * each, each);
    }
  }
  return out;
}

BnttState BnttState::create(Index channels, int timesteps) {
  BnttState s;
  s.gamma = Tensor::constant({timesteps, channels}, 1.0f);
  s.running_mean = Tensor({timesteps, channels});
  s.running_var = Tensor::constant({timesteps, channels}, 1.0f);
  return s;
}

namespace {

struct ChannelLayout {
  Index batch, channels, inner;
};

template <typename Scalar>
ChannelLayout channel_layout(const BnttState& bntt, int t, const BasicTensor<Scalar>& x) {
  if (t < 0 || t >= bntt.timesteps()) {
    throw std::out_of_range("bntt: timestep " + std::to_string(t) + " outside [0," +
                            std::to_string(bntt.timesteps()) + ")");
  }
  if (x.rank() < 2 || x.dim(1) != bntt.channels()) {
    throw std::invalid_argument("bntt: expected [B," + std::to_string(bntt.channels()) + ",...], got " +
                                shape_to_string(x.shape()));
  }
  return {x.dim(0), x.dim(1), x.size() / (x.dim(0) * x.dim(1))};
}

// Centering happens in double: a float mean is off by up to half an ulp of
// its magnitude, which is large next to x - mean when the batch is tight.
Tensor normalize_with(const Tensor& x, const ChannelLayout& l, const Eigen::VectorXd& mean, const Eigen::VectorXd& inv_std,
                      const float* gamma, Tensor* normalized) {
  Tensor out(x.shape());
  if (normalized) *normalized = Tensor(x.shape());
  for (Index b = 0; b < l.batch; ++b) {
    for (Index c = 0; c < l.channels; ++c) {
      const Index base = (b * l.channels + c) * l.inner;
      for (Index i = 0; i < l.inner; ++i) {
        const auto xhat = float((double(x[base + i]) - mean[c]) * inv_std[c]);
        if (normalized) (*normalized)[base + i] = xhat;
        out[base + i] = gamma[c] * xhat;
      }
    }
  }
  return out;
}

}  // namespace

Tensor bntt_apply(const BnttState& bntt, int t, const Tensor& preact) {
  const ChannelLayout l = channel_layout(bntt, t, preact);
  const Index c0 = Index(t) * l.channels;
  const Eigen::VectorXd mean = bntt.running_mean.values().segment(c0, l.channels).cast<double>();
  const Eigen::VectorXd inv_std =
      (bntt.running_var.values().segment(c0, l.channels).cast<double>().array() + double(bntt.epsilon)).rsqrt().matrix();
  return normalize_with(preact, l, mean, inv_std, bntt.gamma.data() + c0, nullptr);
}

Tensor bntt_apply(BnttState& bntt, int t, const Tensor& preact, Mode mode, BnttCache* cache) {
  if (mode == Mode::inference) {
    Tensor out = bntt_apply(std::as_const(bntt), t, preact);
    if (cache) throw std::invalid_argument("bntt: a backward cache is only produced in training mode");
    return out;
  }
  const ChannelLayout l = channel_layout(bntt, t, preact);
  if (l.batch < 2) throw std::invalid_argument("bntt: training mode needs a mini-batch of at least 2 samples");
  const Index c0 = Index(t) * l.channels;
  const double count = double(l.batch * l.inner);

  Eigen::VectorXd mean(l.channels), var(l.channels);
  for (Index c = 0; c < l.channels; ++c) {
    double sum = 0.0;
    for (Index b = 0; b < l.batch; ++b) {
      const Index base = (b * l.channels + c) * l.inner;
      for (Index i = 0; i < l.inner; ++i) sum += preact[base + i];
    }
    const double mu = sum / count;
    double sq = 0.0;
    for (Index b = 0; b < l.batch; ++b) {
      const Index base = (b * l.channels + c) * l.inner;
      for (Index i = 0; i < l.inner; ++i) sq += (preact[base + i] - mu) * (preact[base + i] - mu);
    }
    mean[c] = mu;
    var[c] = sq / count;
    const float unbiased = float(sq / (count - 1.0));
    float& rm = bntt.running_mean[c0 + c];
    float& rv = bntt.running_var[c0 + c];
    rm = (1.0f - bntt.momentum) * rm + bntt.momentum * float(mu);
    rv = (1.0f - bntt.momentum) * rv + bntt.momentum * unbiased;
  }
  const Eigen::VectorXd inv_std = (var.array() + double(bntt.epsilon)).rsqrt().matrix();
  Tensor normalized;
  Tensor out = normalize_with(preact, l, mean, inv_std, bntt.gamma.data() + c0, cache ? &normalized : nullptr);
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = inv_std.cast<float>();
  }
  return out;
}

namespace {

template <typename Scalar>
BasicBnttGrads<Scalar> bntt_backward_impl(const BnttState& bntt, int t, const BnttCache& cache,
                                          const BasicTensor<Scalar>& grad_out) {
  const ChannelLayout l = channel_layout(bntt, t, grad_out);
  if (cache.normalized.shape() != grad_out.shape()) {
    throw std::invalid_argument("bntt_backward: gradient " + shape_to_string(grad_out.shape()) +
                                " does not match cached activation " + shape_to_string(cache.normalized.shape()));
  }
  const Index c0 = Index(t) * l.channels;
  const double count = double(l.batch * l.inner);
  BasicBnttGrads<Scalar> grads{BasicTensor<Scalar>(grad_out.shape()),
                               Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(l.channels)};
  for (Index c = 0; c < l.channels; ++c) {
    const float gamma = bntt.gamma[c0 + c];
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (Index b = 0; b < l.batch; ++b) {
      const Index base = (b * l.channels + c) * l.inner;
      for (Index i = 0; i < l.inner; ++i) {
        sum_dy += grad_out[base + i];
        sum_dy_xhat += double(grad_out[base + i]) * cache.normalized[base + i];
      }
    }
    grads.gamma[c] = Scalar(sum_dy_xhat);
    // dx = gamma * inv_std * (dy - mean(dy) - x_hat * mean(dy * x_hat))
    const double mean_dy = sum_dy / count, mean_dy_xhat = sum_dy_xhat / count;
    const double scale = double(gamma) * cache.inv_std[c];
    for (Index b = 0; b < l.batch; ++b) {
      const Index base = (b * l.channels + c) * l.inner;
      for (Index i = 0; i < l.inner; ++i) {
        grads.input[base + i] =
            Scalar(scale * (double(grad_out[base + i]) - mean_dy - cache.normalized[base + i] * mean_dy_xhat));
      }
    }
  }
  return grads;
}

}  // namespace

BnttGrads bntt_backward(const BnttState& bntt, int t, const BnttCache& cache, const Tensor& grad_out) {
  return bntt_backward_impl(bntt, t, cache, grad_out);
}

BasicBnttGrads<double> bntt_backward(const BnttState& bntt, int t, const BnttCache& cache,
                                     const BasicTensor<double>& grad_out) {
  return bntt_backward_impl(bntt, t, cache, grad_out);
}

float snn_loss(const Tensor& logits, int label) {
  if (logits.rank() != 1) throw std::invalid_argument("snn_loss: expected a [C] logit vector");
  const int classes = int(logits.size());
  if (label < 0 || label >= classes) {
    throw std::out_of_range("snn_loss: label " + std::to_string(label) + " outside [0," + std::to_string(classes) + ")");
  }
  const double max = logits.values().maxCoeff();
  double sum = 0.0;
  for (Index j = 0; j < classes; ++j) sum += std::exp(double(logits[j]) - max);
  return float(std::log(sum) + max - logits[label]);
}

LossAndGrad cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != Index(labels.size())) {
    throw std::invalid_argument("cross_entropy: logits " + shape_to_string(logits.shape()) + " vs " +
                                std::to_string(labels.size()) + " labels");
  }
  const Index batch = logits.dim(0), classes = logits.dim(1);
  LossAndGrad out{0.0f, Tensor(logits.shape())};
  double total = 0.0;
  for (Index b = 0; b < batch; ++b) {
    const int label = labels[std::size_t(b)];
    if (label < 0 || label >= classes) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " outside [0," +
                              std::to_string(classes) + ")");
    }
    const float* row = logits.data() + b * classes;
    double max = row[0];
    for (Index j = 1; j < classes; ++j) max = std::max(max, double(row[j]));
    double sum = 0.0;
    for (Index j = 0; j < classes; ++j) sum += std::exp(double(row[j]) - max);
    const double log_sum = std::log(sum) + max;
    total += log_sum - row[label];
    for (Index j = 0; j < classes; ++j) {
      const double p = std::exp(double(row[j]) - log_sum);
      out.grad[b * classes + j] = float((p - (j == label ? 1.0 : 0.0)) / double(batch));
    }
  }
  out.loss = float(total / double(batch));
  return out;
}

}  // namespace fedsnn
