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

#include "fedsnn/model.hpp"

#include <cmath>
#include <stdexcept>

namespace fedsnn {

void ModelSpec::validate() {
  if (layers.empty()) throw std::invalid_argument("model has no layers");
  if (input_shape.size() != 3) throw std::invalid_argument("input shape must be [C,H,W], got " + shape_to_string(input_shape));
  int conv = 0, pool = 0, fc = 0;
  for (auto& layer : layers) {
    if (!layer.name.empty()) continue;
    switch (layer.kind) {
      case LayerKind::conv2d: layer.name = "conv" + std::to_string(++conv); break;
      case LayerKind::avgpool: layer.name = "pool" + std::to_string(++pool); break;
      case LayerKind::linear: layer.name = "fc" + std::to_string(++fc); break;
    }
  }
  Shape shape = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    try {
      shape = layer_output_shape(layers[i], shape);
    } catch (const std::invalid_argument& e) {
      const std::string from = i == 0 ? "input" : "'" + layers[i - 1].name + "'";
      throw std::invalid_argument("shape chain broken between " + from + " and '" + layers[i].name + "': " + e.what());
    }
  }
  const LayerSpec& last = layers.back();
  if (last.kind != LayerKind::linear) throw std::invalid_argument("last layer '" + last.name + "' must be linear");
  if (last.out != class_count) {
    throw std::invalid_argument("last layer '" + last.name + "' has " + std::to_string(last.out) +
                                " outputs but the model has " + std::to_string(class_count) + " classes");
  }
}

std::vector<std::size_t> ModelSpec::hidden_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    if (layers[i].has_weights()) out.push_back(i);
  }
  return out;
}

Model build_model(ModelSpec spec, const SnnConfig& snn, RngStream& stream) {
  spec.validate();
  Model model;
  model.snn = snn;
  if (spec.kind == ModelKind::snn) snn.validate(spec.hidden_layers().size());

  Shape shape = spec.input_shape;
  for (const auto& ls : spec.layers) {
    LayerParams<float> layer;
    layer.spec = ls;
    layer.input_shape = shape;
    if (ls.has_weights()) {
      const Index fan_in = ls.kind == LayerKind::conv2d ? ls.in * ls.kernel * ls.kernel : ls.in;
      const Shape wshape = ls.kind == LayerKind::conv2d ? Shape{ls.out, ls.in, ls.kernel, ls.kernel} : Shape{ls.out, ls.in};
      const float bound = std::sqrt(6.0f / float(fan_in));
      layer.weight = Tensor(wshape);
      for (Index i = 0; i < layer.weight.size(); ++i) layer.weight[i] = (2.0f * stream.uniform_float() - 1.0f) * bound;
      if (spec.kind == ModelKind::ann) layer.bias = Tensor({ls.out});
    }
    shape = layer.output_shape();
    model.layers.push_back(std::move(layer));
  }
  if (spec.kind == ModelKind::snn && spec.bntt) {
    for (std::size_t i : spec.hidden_layers()) model.bntt.push_back(BnttState::create(spec.layers[i].out, snn.timesteps));
  }
  model.spec = std::move(spec);
  return model;
}

ParamLayout param_layout(const Model& model) {
  ParamLayout layout;
  Index offset = 0;
  const auto add = [&](std::string name, std::size_t layer, ParamRole role, Shape shape) {
    const Index n = shape_size(shape);
    layout.push_back({std::move(name), layer, role, std::move(shape), offset});
    offset += n;
  };
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& layer = model.layers[i];
    if (layer.spec.has_weights()) add(layer.spec.name + ".weight", i, ParamRole::weight, layer.weight.shape());
  }
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& layer = model.layers[i];
    if (!layer.bias.empty()) add(layer.spec.name + ".bias", i, ParamRole::bias, layer.bias.shape());
  }
  if (model.uses_bntt()) {
    const auto hidden = model.spec.hidden_layers();
    for (std::size_t h = 0; h < hidden.size(); ++h) {
      add(model.layers[hidden[h]].spec.name + ".gamma", hidden[h], ParamRole::gamma, model.bntt[h].gamma.shape());
    }
  }
  return layout;
}

namespace {

std::size_t hidden_slot(const Model& model, std::size_t layer) {
  const auto hidden = model.spec.hidden_layers();
  for (std::size_t h = 0; h < hidden.size(); ++h) {
    if (hidden[h] == layer) return h;
  }
  throw std::logic_error("layer " + std::to_string(layer) + " is not a hidden layer");
}

template <typename M, typename Fn>
void for_each_param(const ParamLayout& layout, M& model, Fn&& fn) {
  for (const auto& e : layout) {
    switch (e.role) {
      case ParamRole::weight: fn(e, model.layers[e.layer].weight); break;
      case ParamRole::bias: fn(e, model.layers[e.layer].bias); break;
      case ParamRole::gamma: fn(e, model.bntt[hidden_slot(model, e.layer)].gamma); break;
    }
  }
}

}  // namespace

void check_same_layout(const ParamLayout& a, const ParamLayout& b, const char* context) {
  if (a == b) return;
  std::string why = std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " entries";
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (!(a[i] == b[i])) {
      why = "entry " + std::to_string(i) + " '" + a[i].name + "' " + shape_to_string(a[i].shape) + " vs '" +
            b[i].name + "' " + shape_to_string(b[i].shape);
      break;
    }
  }
  throw std::invalid_argument(std::string(context) + ": parameter layout mismatch (" + why + ")");
}

ParamVector flatten(const Model& model) {
  ParamVector out = ParamVector::zeros(param_layout(model));
  for_each_param(out.layout, model, [&](const ParamEntry& e, const Tensor& t) { out.segment(e) = t.values(); });
  return out;
}

void load_params(Model& model, const ParamVector& params) {
  check_same_layout(param_layout(model), params.layout, "load_params");
  for_each_param(params.layout, model, [&](const ParamEntry& e, Tensor& t) { t.values() = params.segment(e); });
}

Model apply_delta(Model model, const ParamVector& delta) {
  check_same_layout(param_layout(model), delta.layout, "apply_delta");
  for_each_param(delta.layout, model, [&](const ParamEntry& e, Tensor& t) { t.values() += delta.segment(e); });
  return model;
}

Tensor bntt_buffers(const Model& model) {
  Index n = 0;
  for (const auto& b : model.bntt) n += 2 * b.running_mean.size();
  Tensor out({n});
  Index at = 0;
  for (const auto& b : model.bntt) {
    out.values().segment(at, b.running_mean.size()) = b.running_mean.values();
    at += b.running_mean.size();
    out.values().segment(at, b.running_var.size()) = b.running_var.values();
    at += b.running_var.size();
  }
  return out;
}

void load_bntt_buffers(Model& model, const Tensor& buffers) {
  const Tensor current = bntt_buffers(model);
  if (current.shape() != buffers.shape()) {
    throw std::invalid_argument("load_bntt_buffers: expected " + shape_to_string(current.shape()) + ", got " +
                                shape_to_string(buffers.shape()));
  }
  Index at = 0;
  for (auto& b : model.bntt) {
    b.running_mean.values() = buffers.values().segment(at, b.running_mean.size());
    at += b.running_mean.size();
    b.running_var.values() = buffers.values().segment(at, b.running_var.size());
    at += b.running_var.size();
  }
}

}  // namespace fedsnn
