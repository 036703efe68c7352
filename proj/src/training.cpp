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

#include "fedsnn/training.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace fedsnn {

void SgdConfig::validate() const {
  if (!(learning_rate >= 0.0f)) throw std::invalid_argument("learning rate must be >= 0");
  if (!(momentum >= 0.0f && momentum < 1.0f)) throw std::invalid_argument("momentum must lie in [0,1)");
  if (!(weight_decay >= 0.0f)) throw std::invalid_argument("weight decay must be >= 0");
  for (const auto& [round, divisor] : lr_schedule) {
    if (round < 0 || !(divisor > 0.0f)) throw std::invalid_argument("lr schedule needs round >= 0 and divisor > 0");
  }
}

SgdConfig SgdConfig::at_round(int round) const {
  SgdConfig out = *this;
  for (const auto& [at, divisor] : lr_schedule) {
    if (round >= at) out.learning_rate /= divisor;
  }
  return out;
}

GradientResult compute_gradients(Model& model, const Batch& batch, const RngStream& encode_stream) {
  if (batch.labels.empty()) throw std::invalid_argument("compute_gradients: empty batch");
  GradientResult out;
  if (model.is_snn()) {
    const Tensor spikes = poisson_encode_batch(batch.images, model.snn.timesteps, encode_stream, batch.sample_ids);
    SnnTrace trace;
    snn_forward(model, spikes, Mode::training, &trace);
    out.grad = snn_backward(model, trace, batch.labels, &out.loss);
  } else {
    AnnTrace trace;
    ann_forward(model, batch.images, &trace);
    out.grad = ann_backward(model, trace, batch.labels, &out.loss);
  }
  return out;
}

float train_step(Model& model, const Batch& batch, const SgdConfig& opt, SgdState& state,
                 const RngStream& encode_stream) {
  GradientResult g = compute_gradients(model, batch, encode_stream);
  ParamVector params = flatten(model);
  auto& p = params.values.values();
  Eigen::VectorXf step = g.grad.values.values();
  if (opt.weight_decay != 0.0f) step += opt.weight_decay * p;
  if (opt.momentum != 0.0f) {
    if (state.velocity.size() != p.size()) state.velocity = Eigen::VectorXf::Zero(p.size());
    state.velocity = opt.momentum * state.velocity + step;
    step = state.velocity;
  }
  p -= opt.learning_rate * step;
  load_params(model, params);
  return g.loss;
}

double evaluate_accuracy(const Model& model, const Dataset& data, const RngStream& encode_stream, Index batch_size) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (Index start = 0; start < data.size(); start += batch_size) {
    idx.resize(std::size_t(std::min(batch_size, data.size() - start)));
    std::iota(idx.begin(), idx.end(), std::size_t(start));
    const Batch batch = data.gather(idx);
    const Tensor logits = model.is_snn()
                              ? snn_infer(model, poisson_encode_batch(batch.images, model.snn.timesteps, encode_stream,
                                                                      batch.sample_ids))
                              : ann_forward(model, batch.images);
    const Index classes = logits.dim(1);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const float* row = logits.data() + Index(b) * classes;
      const auto best = std::max_element(row, row + classes) - row;
      if (best == batch.labels[b]) ++correct;
    }
  }
  return double(correct) / double(data.size());
}

std::vector<std::vector<std::size_t>> epoch_batches(std::vector<std::size_t> indices, Index batch_size,
                                                    RngStream& stream) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  std::shuffle(indices.begin(), indices.end(), stream);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < indices.size(); start += std::size_t(batch_size)) {
    const std::size_t end = std::min(indices.size(), start + std::size_t(batch_size));
    out.emplace_back(indices.begin() + std::ptrdiff_t(start), indices.begin() + std::ptrdiff_t(end));
  }
  if (out.size() > 1 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back().front());
    out.pop_back();
  }
  return out;
}

}  // namespace fedsnn
