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

// Forward and backward kernels for the three layer kinds every model is built
// from: stride-1 same-padded convolution, 2x2/stride-2 average pooling and
// fully connected. Kernels are templated on the scalar so tests can run them
// in double against finite differences.

#include "fedsnn/tensor.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace fedsnn {

enum class LayerKind { conv2d, avgpool, linear };

/// Declarative layer descriptor. For conv2d `in`/`out` are channel counts and
/// `kernel` the (odd) square extent; for linear they are feature counts.
struct LayerSpec {
  LayerKind kind = LayerKind::linear;
  Index kernel = 0;
  Index in = 0;
  Index out = 0;
  std::string name;

  bool has_weights() const { return kind != LayerKind::avgpool; }

  static LayerSpec conv(Index kernel, Index in_channels, Index out_channels) {
    return {LayerKind::conv2d, kernel, in_channels, out_channels, {}};
  }
  static LayerSpec pool() { return {LayerKind::avgpool, 2, 0, 0, {}}; }
  static LayerSpec dense(Index in, Index out) { return {LayerKind::linear, 0, in, out, {}}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

inline std::string layer_label(const LayerSpec& spec) {
  if (!spec.name.empty()) return spec.name;
  switch (spec.kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::avgpool: return "avgpool";
    case LayerKind::linear: return "linear";
  }
  return "layer";
}

/// Per-sample output shape, or std::invalid_argument if `input` is not a
/// legal input for the layer.
inline Shape layer_output_shape(const LayerSpec& spec, const Shape& input) {
  const auto fail = [&](const std::string& why) {
    throw std::invalid_argument("layer '" + layer_label(spec) + "': input " + shape_to_string(input) + " " + why);
  };
  switch (spec.kind) {
    case LayerKind::conv2d:
      if (input.size() != 3 || input[0] != spec.in) fail("does not match [" + std::to_string(spec.in) + ",H,W]");
      if (spec.kernel < 1 || spec.kernel % 2 == 0) fail("needs an odd kernel size");
      return {spec.out, input[1], input[2]};
    case LayerKind::avgpool:
      if (input.size() != 3 || input[1] % 2 || input[2] % 2) fail("needs [C,H,W] with even H and W");
      return {input[0], input[1] / 2, input[2] / 2};
    case LayerKind::linear:
      if (shape_size(input) != spec.in) fail("does not flatten to " + std::to_string(spec.in) + " features");
      return {spec.out};
  }
  return {};
}

template <typename Scalar>
struct LayerParams {
  LayerSpec spec;
  Shape input_shape;              // per sample
  BasicTensor<Scalar> weight;     // conv: [out,in,k,k]; linear: [out,in]; pool: empty
  BasicTensor<Scalar> bias;       // [out] or empty

  Shape output_shape() const { return layer_output_shape(spec, input_shape); }

  template <typename Other>
  LayerParams<Other> cast() const {
    return {spec, input_shape, weight.template cast<Other>(), bias.template cast<Other>()};
  }
};

template <typename Scalar>
struct LayerGrads {
  BasicTensor<Scalar> input;
  BasicTensor<Scalar> weight;
  BasicTensor<Scalar> bias;
};

namespace detail {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowMap = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstRowMap = Eigen::Map<const RowMatrix<Scalar>>;

/// Number of samples in `input`, accepting either the bare per-sample shape or
/// a leading batch axis in front of it.
template <typename Scalar>
Index batch_count(const LayerParams<Scalar>& layer, const Shape& input) {
  if (input == layer.input_shape) return 1;
  if (input.size() == layer.input_shape.size() + 1 && std::equal(input.begin() + 1, input.end(),
                                                                 layer.input_shape.begin())) {
    return input.front();
  }
  throw std::invalid_argument("layer '" + layer_label(layer.spec) + "': expected input " +
                              shape_to_string(layer.input_shape) + " (optionally batched), got " +
                              shape_to_string(input));
}

template <typename Scalar>
Shape batched(const Shape& sample, Index batch, bool keep_batch) {
  if (!keep_batch) return sample;
  Shape out{batch};
  out.insert(out.end(), sample.begin(), sample.end());
  return out;
}

template <typename Scalar>
void im2col(const Scalar* image, Index channels, Index height, Index width, Index k, RowMatrix<Scalar>& cols) {
  const Index pad = k / 2;
  cols.setZero(channels * k * k, height * width);
  for (Index c = 0; c < channels; ++c) {
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Index row = (c * k + ky) * k + kx;
        for (Index y = 0; y < height; ++y) {
          const Index iy = y + ky - pad;
          if (iy < 0 || iy >= height) continue;
          for (Index x = 0; x < width; ++x) {
            const Index ix = x + kx - pad;
            if (ix < 0 || ix >= width) continue;
            cols(row, y * width + x) = image[(c * height + iy) * width + ix];
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const RowMatrix<Scalar>& cols, Index channels, Index height, Index width, Index k, Scalar* image) {
  const Index pad = k / 2;
  for (Index c = 0; c < channels; ++c) {
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Index row = (c * k + ky) * k + kx;
        for (Index y = 0; y < height; ++y) {
          const Index iy = y + ky - pad;
          if (iy < 0 || iy >= height) continue;
          for (Index x = 0; x < width; ++x) {
            const Index ix = x + kx - pad;
            if (ix < 0 || ix >= width) continue;
            image[(c * height + iy) * width + ix] += cols(row, y * width + x);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void check_finite(const LayerSpec& spec, const BasicTensor<Scalar>& t, const char* what) {
  if (!t.all_finite()) {
    throw std::domain_error("layer '" + layer_label(spec) + "': non-finite values in " + what);
  }
}

}  // namespace detail

/// Applies the layer to `input` (per-sample shape, optionally with a leading
/// batch axis). Pure: equal arguments give bit-identical outputs.
template <typename Scalar>
BasicTensor<Scalar> layer_forward(const LayerParams<Scalar>& layer, const BasicTensor<Scalar>& input) {
  using namespace detail;
  const Index batch = batch_count(layer, input.shape());
  const bool keep_batch = input.shape() != layer.input_shape;
  const Shape out_shape = layer.output_shape();
  BasicTensor<Scalar> output(batched<Scalar>(out_shape, batch, keep_batch));
  const Index in_each = shape_size(layer.input_shape);
  const Index out_each = shape_size(out_shape);
  const bool has_bias = !layer.bias.empty();

  switch (layer.spec.kind) {
    case LayerKind::linear: {
      ConstRowMap<Scalar> x(input.data(), batch, layer.spec.in);
      ConstRowMap<Scalar> w(layer.weight.data(), layer.spec.out, layer.spec.in);
      RowMap<Scalar> y(output.data(), batch, layer.spec.out);
      y.noalias() = x * w.transpose();
      if (has_bias) y.rowwise() += layer.bias.values().transpose();
      break;
    }
    case LayerKind::conv2d: {
      const Index channels = layer.input_shape[0], height = layer.input_shape[1], width = layer.input_shape[2];
      const Index k = layer.spec.kernel;
      ConstRowMap<Scalar> w(layer.weight.data(), layer.spec.out, channels * k * k);
      RowMatrix<Scalar> cols;
      for (Index s = 0; s < batch; ++s) {
        im2col(input.data() + s * in_each, channels, height, width, k, cols);
        RowMap<Scalar> y(output.data() + s * out_each, layer.spec.out, height * width);
        y.noalias() = w * cols;
        if (has_bias) y.colwise() += layer.bias.values();
      }
      break;
    }
    case LayerKind::avgpool: {
      const Index channels = layer.input_shape[0], height = layer.input_shape[1], width = layer.input_shape[2];
      const Index oh = height / 2, ow = width / 2;
      for (Index s = 0; s < batch; ++s) {
        const Scalar* in = input.data() + s * in_each;
        Scalar* out = output.data() + s * out_each;
        for (Index c = 0; c < channels; ++c) {
          for (Index y = 0; y < oh; ++y) {
            for (Index x = 0; x < ow; ++x) {
              const Scalar* p = in + (c * height + 2 * y) * width + 2 * x;
              out[(c * oh + y) * ow + x] = Scalar(0.25) * (p[0] + p[1] + p[width] + p[width + 1]);
            }
          }
        }
      }
      break;
    }
  }
  check_finite(layer.spec, output, "forward output");
  return output;
}

/// Gradients of a scalar loss with respect to the layer input and parameters,
/// given the loss gradient `grad_out` at the layer output. Linear in grad_out.
template <typename Scalar>
LayerGrads<Scalar> layer_backward(const LayerParams<Scalar>& layer, const BasicTensor<Scalar>& input,
                                  const BasicTensor<Scalar>& grad_out, bool need_input_grad = true) {
  using namespace detail;
  const Index batch = batch_count(layer, input.shape());
  const bool keep_batch = input.shape() != layer.input_shape;
  const Shape out_shape = layer.output_shape();
  if (grad_out.shape() != batched<Scalar>(out_shape, batch, keep_batch)) {
    throw std::invalid_argument("layer '" + layer_label(layer.spec) + "': gradient shape " +
                                shape_to_string(grad_out.shape()) + " does not match output shape " +
                                shape_to_string(batched<Scalar>(out_shape, batch, keep_batch)));
  }
  const Index in_each = shape_size(layer.input_shape);
  const Index out_each = shape_size(out_shape);
  const bool has_bias = !layer.bias.empty();

  LayerGrads<Scalar> grads;
  if (need_input_grad) grads.input = BasicTensor<Scalar>(input.shape());
  if (layer.spec.has_weights()) grads.weight = BasicTensor<Scalar>(layer.weight.shape());
  if (has_bias) grads.bias = BasicTensor<Scalar>(layer.bias.shape());

  switch (layer.spec.kind) {
    case LayerKind::linear: {
      ConstRowMap<Scalar> x(input.data(), batch, layer.spec.in);
      ConstRowMap<Scalar> w(layer.weight.data(), layer.spec.out, layer.spec.in);
      ConstRowMap<Scalar> dy(grad_out.data(), batch, layer.spec.out);
      RowMap<Scalar> dw(grads.weight.data(), layer.spec.out, layer.spec.in);
      dw.noalias() = dy.transpose() * x;
      if (has_bias) grads.bias.values() = dy.colwise().sum().transpose();
      if (need_input_grad) {
        RowMap<Scalar> dx(grads.input.data(), batch, layer.spec.in);
        dx.noalias() = dy * w;
      }
      break;
    }
    case LayerKind::conv2d: {
      const Index channels = layer.input_shape[0], height = layer.input_shape[1], width = layer.input_shape[2];
      const Index k = layer.spec.kernel;
      ConstRowMap<Scalar> w(layer.weight.data(), layer.spec.out, channels * k * k);
      RowMap<Scalar> dw(grads.weight.data(), layer.spec.out, channels * k * k);
      RowMatrix<Scalar> cols, dcols;
      for (Index s = 0; s < batch; ++s) {
        ConstRowMap<Scalar> dy(grad_out.data() + s * out_each, layer.spec.out, height * width);
        im2col(input.data() + s * in_each, channels, height, width, k, cols);
        dw.noalias() += dy * cols.transpose();
        if (has_bias) grads.bias.values() += dy.rowwise().sum();
        if (need_input_grad) {
          dcols.noalias() = w.transpose() * dy;
          col2im(dcols, channels, height, width, k, grads.input.data() + s * in_each);
        }
      }
      break;
    }
    case LayerKind::avgpool: {
      if (!need_input_grad) break;
      const Index channels = layer.input_shape[0], height = layer.input_shape[1], width = layer.input_shape[2];
      const Index oh = height / 2, ow = width / 2;
      for (Index s = 0; s < batch; ++s) {
        const Scalar* g = grad_out.data() + s * out_each;
        Scalar* gi = grads.input.data() + s * in_each;
        for (Index c = 0; c < channels; ++c) {
          for (Index y = 0; y < oh; ++y) {
            for (Index x = 0; x < ow; ++x) {
              const Scalar v = Scalar(0.25) * g[(c * oh + y) * ow + x];
              Scalar* p = gi + (c * height + 2 * y) * width + 2 * x;
              p[0] = v;
              p[1] = v;
              p[width] = v;
              p[width + 1] = v;
            }
          }
        }
      }
      break;
    }
  }
  if (need_input_grad) check_finite(layer.spec, grads.input, "input gradient");
  if (layer.spec.has_weights()) check_finite(layer.spec, grads.weight, "weight gradient");
  return grads;
}

}  // namespace fedsnn
