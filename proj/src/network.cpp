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

#include "fedsnn/network.hpp"

#include <stdexcept>
#include <string>

namespace fedsnn {
namespace {

Shape with_batch(Index batch, const Shape& sample) {
  Shape s{batch};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

template <typename Scalar>
BasicTensor<Scalar> rows(const BasicTensor<Scalar>& x, Index begin, Index count) {
  Shape s = x.shape();
  const Index each = x.slice_size();
  s.front() = count;
  return BasicTensor<Scalar>(s, x.values().segment(begin * each, count * each));
}

template <typename Scalar>
void put_rows(BasicTensor<Scalar>& x, Index begin, const BasicTensor<Scalar>& part) {
  x.values().segment(begin * x.slice_size(), part.size()) = part.values();
}

const ParamEntry& find_entry(const ParamLayout& layout, std::size_t layer, ParamRole role) {
  for (const auto& e : layout) {
    if (e.layer == layer && e.role == role) return e;
  }
  throw std::logic_error("no parameter entry for layer " + std::to_string(layer));
}

Tensor snn_pass(const Model& model, std::vector<BnttState>* bntt, const Tensor& spike_input, Mode mode,
                SnnTrace* trace, ActivityStats* stats) {
  if (model.spec.kind != ModelKind::snn) throw std::invalid_argument("snn_forward: model kind is not SNN");
  const int steps = model.snn.timesteps;
  const Shape& sample = model.spec.input_shape;
  if (spike_input.rank() != Index(sample.size()) + 2 || spike_input.dim(0) != steps ||
      !std::equal(sample.begin(), sample.end(), spike_input.shape().begin() + 2)) {
    throw std::invalid_argument("snn_forward: expected spike train [" + std::to_string(steps) + ",B," +
                                shape_to_string(sample).substr(1) + ", got " + shape_to_string(spike_input.shape()));
  }
  const Index batch = spike_input.dim(1);
  if (trace) {
    *trace = SnnTrace{};
    trace->layers.resize(model.layers.size());
    trace->batch = batch;
  }
  if (stats && stats->input_sum.size() != model.layers.size()) {
    stats->input_sum.assign(model.layers.size(), 0.0);
    stats->input_count.assign(model.layers.size(), 0.0);
  }

  Tensor x = spike_input.reshaped(with_batch(Index(steps) * batch, sample));
  std::size_t hidden = 0;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& layer = model.layers[i];
    if (stats) {
      stats->input_sum[i] += x.values().template cast<double>().sum();
      stats->input_count[i] += double(x.size());
    }
    Tensor a = layer_forward(layer, x);
    if (trace) trace->layers[i].input = std::move(x);

    if (i + 1 == model.layers.size()) {
      // Output layer: leak-free accumulation of the weighted input, no spikes.
      const Index classes = a.slice_size();
      Tensor logits({batch, classes});
      for (int t = 0; t < steps; ++t) logits.values() += a.values().segment(Index(t) * batch * classes, batch * classes);
      if (trace) {
        trace->logits = logits;
        trace->valid = mode == Mode::training;
      }
      return logits;
    }
    if (!layer.spec.has_weights()) {
      x = std::move(a);
      continue;
    }

    const Shape out_sample(a.shape().begin() + 1, a.shape().end());
    Tensor drive = std::move(a);
    if (model.uses_bntt()) {
      if (trace) trace->layers[i].bntt.resize(std::size_t(steps));
      for (int t = 0; t < steps; ++t) {
        const Tensor slice = rows(drive, Index(t) * batch, batch);
        const Tensor normed =
            mode == Mode::training
                ? bntt_apply((*bntt)[hidden], t, slice, mode, trace ? &trace->layers[i].bntt[std::size_t(t)] : nullptr)
                : bntt_apply(std::as_const(model.bntt[hidden]), t, slice);
        put_rows(drive, Index(t) * batch, normed);
      }
    }

    const float threshold = model.snn.threshold(hidden);
    Tensor potential(drive.shape()), spikes(drive.shape());
    LifState state = LifState::zeros(with_batch(batch, out_sample));
    for (int t = 0; t < steps; ++t) {
      LifStep step = lif_step(state, rows(drive, Index(t) * batch, batch), model.snn.leak, threshold);
      put_rows(potential, Index(t) * batch, step.potential);
      put_rows(spikes, Index(t) * batch, step.state.spikes);
      state = std::move(step.state);
    }
    if (trace) {
      trace->layers[i].potential = std::move(potential);
      trace->layers[i].spikes = spikes;
    }
    x = std::move(spikes);
    ++hidden;
  }
  throw std::logic_error("snn_forward: model has no output layer");
}

}  // namespace

Tensor snn_forward(Model& model, const Tensor& spike_input, Mode mode, SnnTrace* trace, ActivityStats* stats) {
  return snn_pass(model, &model.bntt, spike_input, mode, trace, stats);
}

Tensor snn_infer(const Model& model, const Tensor& spike_input, ActivityStats* stats) {
  return snn_pass(model, nullptr, spike_input, Mode::inference, nullptr, stats);
}

ParamVector snn_backward(const Model& model, const SnnTrace& trace, std::span<const int> labels, float* loss) {
  if (!trace.valid) throw std::logic_error("snn_backward: no retained training-mode forward pass");
  LossAndGrad ce = cross_entropy(trace.logits, labels);
  if (loss) *loss = ce.loss;
  return snn_backward_from(model, trace, ce.grad);
}

ParamVector snn_backward_from(const Model& model, const SnnTrace& trace, const Tensor& grad_logits) {
  if (!trace.valid) throw std::logic_error("snn_backward: no retained training-mode forward pass");
  if (grad_logits.shape() != trace.logits.shape()) {
    throw std::invalid_argument("snn_backward: logit gradient " + shape_to_string(grad_logits.shape()) + " vs logits " +
                                shape_to_string(trace.logits.shape()));
  }
  const int steps = model.snn.timesteps;
  const Index batch = trace.batch;
  ParamVector grads = ParamVector::zeros(param_layout(model));
  const auto hidden_layers = model.spec.hidden_layers();
  std::size_t hidden = hidden_layers.size();

  // dL/d(output of layer i) for all timesteps, [T*B, ...]. Carried in double;
  // the normalization backward divides by the batch deviation and magnifies
  // whatever rounding the incoming gradient has.
  using DTensor = BasicTensor<double>;
  DTensor upstream;
  for (std::size_t i = model.layers.size(); i-- > 0;) {
    const LayerParams<double> layer = model.layers[i].cast<double>();
    const auto& lt = trace.layers[i];
    const DTensor input = lt.input.cast<double>();
    const bool need_input = i > 0;

    if (i + 1 == model.layers.size()) {
      // Every timestep's weighted input reaches the logits with weight 1.
      DTensor g(with_batch(Index(steps) * batch, {grad_logits.dim(1)}));
      for (int t = 0; t < steps; ++t) put_rows(g, Index(t) * batch, grad_logits.cast<double>());
      LayerGrads<double> lg = layer_backward(layer, input, g, need_input);
      grads.segment(find_entry(grads.layout, i, ParamRole::weight)) = lg.weight.values().cast<float>();
      upstream = std::move(lg.input);
      continue;
    }
    if (!layer.spec.has_weights()) {
      upstream = layer_backward(layer, input, upstream, need_input).input;
      continue;
    }

    --hidden;
    const float threshold = model.snn.threshold(hidden);
    const double leak = model.snn.leak;
    const float xi = model.snn.surrogate_decay;
    const Index n = batch * lt.potential.slice_size();
    DTensor grad_drive(lt.potential.shape());
    Eigen::VectorXd next = Eigen::VectorXd::Zero(n);  // dL/du at t+1
    for (int t = steps - 1; t >= 0; --t) {
      const Index base = Index(t) * n;
      for (Index j = 0; j < n; ++j) {
        const double du = upstream[base + j] * surrogate_grad(lt.potential[base + j], threshold, xi) +
                          leak * (1.0 - lt.spikes[base + j]) * next[j];
        grad_drive[base + j] = du;
        next[j] = du;
      }
    }

    if (model.uses_bntt()) {
      const ParamEntry& gamma_entry = find_entry(grads.layout, i, ParamRole::gamma);
      const Index channels = model.bntt[hidden].channels();
      for (int t = 0; t < steps; ++t) {
        BasicBnttGrads<double> bg =
            bntt_backward(model.bntt[hidden], t, lt.bntt[std::size_t(t)], rows(grad_drive, Index(t) * batch, batch));
        grads.values.values().segment(gamma_entry.offset + Index(t) * channels, channels) = bg.gamma.cast<float>();
        put_rows(grad_drive, Index(t) * batch, bg.input);
      }
    }
    LayerGrads<double> lg = layer_backward(layer, input, grad_drive, need_input);
    grads.segment(find_entry(grads.layout, i, ParamRole::weight)) = lg.weight.values().cast<float>();
    upstream = std::move(lg.input);
  }
  return grads;
}

Tensor ann_forward(const Model& model, const Tensor& images, AnnTrace* trace) {
  if (model.spec.kind != ModelKind::ann) throw std::invalid_argument("ann_forward: model kind is not ANN");
  if (trace) {
    *trace = AnnTrace{};
    trace->inputs.resize(model.layers.size());
    trace->preacts.resize(model.layers.size());
  }
  Tensor x = images;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& layer = model.layers[i];
    Tensor a = layer_forward(layer, x);
    if (trace) {
      trace->inputs[i] = std::move(x);
      trace->preacts[i] = a;
    }
    if (i + 1 == model.layers.size()) {
      if (trace) {
        trace->logits = a;
        trace->valid = true;
      }
      return a;
    }
    if (layer.spec.has_weights()) a.values() = a.values().cwiseMax(0.0f);
    x = std::move(a);
  }
  throw std::logic_error("ann_forward: model has no output layer");
}

ParamVector ann_backward(const Model& model, const AnnTrace& trace, std::span<const int> labels, float* loss) {
  if (!trace.valid) throw std::logic_error("ann_backward: no retained forward pass");
  LossAndGrad ce = cross_entropy(trace.logits, labels);
  if (loss) *loss = ce.loss;
  ParamVector grads = ParamVector::zeros(param_layout(model));
  Tensor upstream = std::move(ce.grad);
  for (std::size_t i = model.layers.size(); i-- > 0;) {
    const auto& layer = model.layers[i];
    if (layer.spec.has_weights() && i + 1 != model.layers.size()) {
      upstream.values().array() *= (trace.preacts[i].values().array() > 0.0f).cast<float>();
    }
    LayerGrads<float> lg = layer_backward(layer, trace.inputs[i], upstream, i > 0);
    if (layer.spec.has_weights()) {
      grads.segment(find_entry(grads.layout, i, ParamRole::weight)) = lg.weight.values();
      if (!layer.bias.empty()) grads.segment(find_entry(grads.layout, i, ParamRole::bias)) = lg.bias.values();
    }
    upstream = std::move(lg.input);
  }
  return grads;
}

}  // namespace fedsnn
