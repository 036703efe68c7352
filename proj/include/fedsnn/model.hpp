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

#include "fedsnn/layers.hpp"
#include "fedsnn/rng.hpp"
#include "fedsnn/spiking.hpp"

#include <string>
#include <vector>

namespace fedsnn {

enum class ModelKind { snn, ann };

/// Declarative model: a chain of conv/avgpool/linear layers ending in a
/// linear classifier. `bntt` only affects SNN models.
struct ModelSpec {
  ModelKind kind = ModelKind::snn;
  std::vector<LayerSpec> layers;
  Shape input_shape;  // [C, H, W]
  Index class_count = 0;
  bool bntt = true;

  /// Checks the shape chain and fills in default layer names (conv1, pool1,
  /// fc1, ...). Throws std::invalid_argument naming the offending layers.
  void validate();

  /// Same layers, other kind.
  ModelSpec twin(ModelKind other) const {
    ModelSpec s = *this;
    s.kind = other;
    return s;
  }

  /// Indices of the weighted layers that are not the final classifier.
  std::vector<std::size_t> hidden_layers() const;
};

enum class ParamRole { weight, bias, gamma };

struct ParamEntry {
  std::string name;
  std::size_t layer = 0;
  ParamRole role = ParamRole::weight;
  Shape shape;
  Index offset = 0;

  friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

using ParamLayout = std::vector<ParamEntry>;

inline Index layout_size(const ParamLayout& layout) {
  return layout.empty() ? 0 : layout.back().offset + shape_size(layout.back().shape);
}

/// Flat parameter vector plus the manifest that says what each range means.
/// This is the object exchanged between clients and the server.
template <typename Scalar>
struct BasicParamVector {
  ParamLayout layout;
  BasicTensor<Scalar> values;  // 1-D

  static BasicParamVector zeros(ParamLayout layout) {
    const Index n = layout_size(layout);
    return {std::move(layout), BasicTensor<Scalar>(Shape{n})};
  }

  Index size() const { return values.size(); }
  auto segment(const ParamEntry& e) { return values.values().segment(e.offset, shape_size(e.shape)); }
  auto segment(const ParamEntry& e) const { return values.values().segment(e.offset, shape_size(e.shape)); }

  template <typename Other>
  BasicParamVector<Other> cast() const {
    return {layout, values.template cast<Other>()};
  }
};

using ParamVector = BasicParamVector<float>;

/// Instantiated model. Parameters live per layer; BNTT state exists for every
/// hidden layer of an SNN built with bntt enabled.
struct Model {
  ModelSpec spec;
  SnnConfig snn;
  std::vector<LayerParams<float>> layers;
  std::vector<BnttState> bntt;  // indexed by hidden slot

  bool is_snn() const { return spec.kind == ModelKind::snn; }
  bool uses_bntt() const { return is_snn() && spec.bntt; }
};

/// Weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)); biases 0; BNTT gammas 1.
Model build_model(ModelSpec spec, const SnnConfig& snn, RngStream& stream);

/// Layout: every layer's weight in layer order, then ANN biases or SNN BNTT
/// gammas in layer order. The weight prefix is identical for both kinds.
ParamLayout param_layout(const Model& model);

ParamVector flatten(const Model& model);

/// Overwrites the model's parameters with `params`; throws on layout mismatch.
void load_params(Model& model, const ParamVector& params);

/// Returns `model` with `delta` added to its parameters.
Model apply_delta(Model model, const ParamVector& delta);

/// BNTT running statistics (not parameters): every layer's running mean
/// then running variance, in layer order.
Tensor bntt_buffers(const Model& model);
void load_bntt_buffers(Model& model, const Tensor& buffers);

void check_same_layout(const ParamLayout& a, const ParamLayout& b, const char* context);

}  // namespace fedsnn
