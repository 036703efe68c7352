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

#include "snn_fixture.hpp"

#include "fedsnn/network.hpp"
#include "fedsnn/spiking.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace fedsnn {
namespace {

Tensor encode_pixels(const Tensor& image, int T, std::uint64_t seed) {
  RngStream s(seed);
  return poisson_encode(image, T, s);
}

TEST(Poisson, ExtremesAreDeterministic) {
  const Tensor spikes = encode_pixels(Tensor({1, 1, 2}, {0.0f, 1.0f}), 50, 1);
  ASSERT_EQ(spikes.shape(), (Shape{50, 1, 1, 2}));
  for (Index t = 0; t < 50; ++t) {
    EXPECT_EQ(spikes[2 * t], 0.0f);
    EXPECT_EQ(spikes[2 * t + 1], 1.0f);
  }
}

TEST(Poisson, HalfIntensityCountIsBinomial) {
  const Tensor spikes = encode_pixels(Tensor({1}, {0.5f}), 1000, 77);
  EXPECT_NEAR(spikes.values().sum(), 500.0f, 47.0f);
}

TEST(Poisson, RejectsOutOfRangePixels) {
  RngStream s(1);
  EXPECT_THROW(poisson_encode(Tensor({2}, {0.5f, 1.5f}), 4, s), std::invalid_argument);
  EXPECT_THROW(poisson_encode(Tensor({1}, {-0.1f}), 4, s), std::invalid_argument);
}

TEST(Poisson, BatchEncodingIsKeyedBySample) {
  const RngStream base(9);
  const Tensor images({2, 1, 2, 2}, {0.1f, 0.5f, 0.9f, 0.3f, 0.7f, 0.2f, 0.4f, 0.6f});
  const std::vector<std::uint64_t> ids{10, 11}, swapped{11, 10};
  const Tensor a = poisson_encode_batch(images, 6, base, ids);
  Tensor flipped({2, 1, 2, 2});
  flipped.values() << images.values().tail(4), images.values().head(4);
  const Tensor b = poisson_encode_batch(flipped, 6, base, swapped);
  for (Index t = 0; t < 6; ++t) {
    EXPECT_EQ(a.values().segment(t * 8, 4), b.values().segment(t * 8 + 4, 4));
    EXPECT_EQ(a.values().segment(t * 8 + 4, 4), b.values().segment(t * 8, 4));
  }
}

TEST(Poisson, AccumulatedSpikesReconstructImage) {
  RngStream pixels(5);
  const Tensor image = rng_uniform(pixels, {3, 8, 8});
  const Tensor spikes = encode_pixels(image, 1000, 6);
  Eigen::VectorXf rate = Eigen::VectorXf::Zero(image.size());
  for (Index t = 0; t < 1000; ++t) rate += spikes.values().segment(t * image.size(), image.size());
  rate /= 1000.0f;
  EXPECT_LE((rate - image.values()).cwiseAbs().mean(), 0.05f);
}

TEST(Lif, SubthresholdIntegrates) {
  const LifStep s = lif_step({Tensor({1}, {0.5f}), Tensor({1})}, Tensor({1}, {0.3f}), 0.9f, 1.0f);
  EXPECT_FLOAT_EQ(s.state.membrane[0], 0.75f);
  EXPECT_EQ(s.state.spikes[0], 0.0f);
}

TEST(Lif, CrossingFiresAndResets) {
  const LifStep s = lif_step({Tensor({1}, {1.0f}), Tensor({1})}, Tensor({1}, {0.2f}), 0.9f, 1.0f);
  EXPECT_FLOAT_EQ(s.potential[0], 1.1f);
  EXPECT_EQ(s.state.spikes[0], 1.0f);
  EXPECT_EQ(s.state.membrane[0], 0.0f);
}

TEST(Lif, RestIsFixedPoint) {
  const LifStep s = lif_step(LifState::zeros({3}), Tensor({3}), 0.9f, 1.0f);
  EXPECT_EQ(s.state.membrane, Tensor({3}));
  EXPECT_EQ(s.state.spikes, Tensor({3}));
}

TEST(Surrogate, Examples) {
  EXPECT_FLOAT_EQ(surrogate_grad(1.0f, 1.0f, 0.3f), 0.3f);
  EXPECT_EQ(surrogate_grad(0.0f, 1.0f, 0.3f), 0.0f);
  EXPECT_FLOAT_EQ(surrogate_grad(1.5f, 1.0f, 0.3f), 0.15f);
}

TEST(Surrogate, GridProperties) {
  const float v = 0.8f, xi = 0.4f;
  float prev = surrogate_grad(-1.0f, v, xi);
  for (int i = 0; i <= 4000; ++i) {
    const float u = -1.0f + 0.001f * float(i);
    const float g = surrogate_grad(u, v, xi);
    EXPECT_GE(g, 0.0f);
    EXPECT_LE(g, xi);
    EXPECT_NEAR(g, surrogate_grad(2.0f * v - u, v, xi), 1e-5f);
    if (std::abs(u - v) > v + 1e-5f) {
      EXPECT_EQ(g, 0.0f);
    }
    EXPECT_LE(std::abs(g - prev), xi / v * 0.001f + 1e-5f);  // Lipschitz, hence continuous
    prev = g;
  }
}

TEST(Bntt, ConstantBatchNormalizesToZero) {
  BnttState bntt = BnttState::create(2, 3);
  const Tensor out = bntt_apply(bntt, 1, Tensor::constant({4, 2}, 3.0f), Mode::training);
  EXPECT_EQ(out.values().cwiseAbs().maxCoeff(), 0.0f);
}

TEST(Bntt, InferenceWithUnitStatsIsIdentity) {
  BnttState bntt = BnttState::create(2, 1);
  bntt.epsilon = 0.0f;
  const Tensor x({3, 2}, {0.5f, -1.0f, 2.0f, 0.0f, 7.0f, 3.0f});
  EXPECT_EQ(bntt_apply(bntt, 0, x, Mode::inference), x);
}

TEST(Bntt, TwoSampleExample) {
  BnttState bntt = BnttState::create(1, 1);
  bntt.gamma[0] = 0.5f;
  const Tensor out = bntt_apply(bntt, 0, Tensor({2, 1}, {1.0f, 3.0f}), Mode::training);
  // (x - 2) / sqrt(1 + 1e-5) * 0.5
  const double want = 0.5 / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(out[0], -want, 1e-6);
  EXPECT_NEAR(out[1], want, 1e-6);
  EXPECT_NEAR(want, 0.4999975, 1e-7);
}

TEST(Bntt, TightBatchFarFromZero) {
  // Spread 0.03 around 1.8: a float mean would be off by ~1e-5 of x - mean.
  BnttState bntt = BnttState::create(1, 1);
  const std::vector<float> z{1.81376266f, 1.81376266f, 1.84375977f, 1.81376266f};
  const Tensor out = bntt_apply(bntt, 0, Tensor({4, 1}, {z[0], z[1], z[2], z[3]}), Mode::training);
  double mean = 0.0, var = 0.0;
  for (float v : z) mean += v / 4.0;
  for (float v : z) var += (v - mean) * (v - mean) / 4.0;
  for (Index b = 0; b < 4; ++b) {
    const double want = (z[std::size_t(b)] - mean) / std::sqrt(var + double(1e-5f));
    EXPECT_NEAR(out[b], want, 1e-6 * std::abs(want)) << b;
  }
}

TEST(Bntt, RunningStatisticsUseMomentumAndUnbiasedVariance) {
  BnttState bntt = BnttState::create(1, 2);
  bntt_apply(bntt, 1, Tensor({2, 1}, {1.0f, 3.0f}), Mode::training);
  EXPECT_FLOAT_EQ(bntt.running_mean[1], 0.2f);         // 0.9 * 0 + 0.1 * 2
  EXPECT_FLOAT_EQ(bntt.running_var[1], 0.9f + 0.2f);   // 0.9 * 1 + 0.1 * 2
  EXPECT_EQ(bntt.running_mean[0], 0.0f);                // other timestep untouched
  EXPECT_EQ(bntt.running_var[0], 1.0f);
}

TEST(Bntt, ConvStatisticsArePerChannel) {
  BnttState bntt = BnttState::create(2, 1);
  // Channel 0 holds {0, 2} across space; channel 1 is constant.
  const Tensor x({2, 2, 1, 2}, {0, 2, 5, 5, 0, 2, 5, 5});
  const Tensor y = bntt_apply(bntt, 0, x, Mode::training);
  EXPECT_LT(y[0], 0.0f);
  EXPECT_GT(y[1], 0.0f);
  EXPECT_EQ(y[2], 0.0f);
  EXPECT_EQ(y[3], 0.0f);
}

TEST(Bntt, RejectsSingletonTrainingBatch) {
  BnttState bntt = BnttState::create(2, 1);
  EXPECT_THROW(bntt_apply(bntt, 0, Tensor({1, 2}), Mode::training), std::invalid_argument);
  EXPECT_NO_THROW(bntt_apply(bntt, 0, Tensor({1, 2}), Mode::inference));
}

TEST(Bntt, BackwardMatchesFiniteDifferences) {
  RngStream s(31);
  BnttState bntt = BnttState::create(3, 2);
  for (Index i = 0; i < bntt.gamma.size(); ++i) bntt.gamma[i] = 0.5f + s.uniform_float();
  Tensor x({5, 3, 2});
  for (Index i = 0; i < x.size(); ++i) x[i] = 2.0f * s.uniform_float() - 1.0f;
  Tensor probe({5, 3, 2});
  for (Index i = 0; i < probe.size(); ++i) probe[i] = s.uniform_float() - 0.5f;
  const auto loss = [&](const Tensor& input, const BnttState& state) {
    BnttState copy = state;
    return double(bntt_apply(copy, 1, input, Mode::training).values().dot(probe.values()));
  };
  BnttCache cache;
  BnttState work = bntt;
  bntt_apply(work, 1, x, Mode::training, &cache);
  const BnttGrads g = bntt_backward(bntt, 1, cache, probe);
  const float h = 1e-2f;
  for (Index i = 0; i < x.size(); ++i) {
    Tensor up = x, down = x;
    up[i] += h;
    down[i] -= h;
    EXPECT_NEAR(g.input[i], (loss(up, bntt) - loss(down, bntt)) / (2 * h), 2e-3) << i;
  }
  for (Index c = 0; c < 3; ++c) {
    BnttState up = bntt, down = bntt;
    up.gamma[3 + c] += h;
    down.gamma[3 + c] -= h;
    EXPECT_NEAR(g.gamma[c], (loss(x, up) - loss(x, down)) / (2 * h), 2e-3) << c;
  }
}

TEST(Loss, Examples) {
  EXPECT_NEAR(snn_loss(Tensor({4}, {0.3f, 0.3f, 0.3f, 0.3f}), 2), std::log(4.0), 1e-6);
  EXPECT_NEAR(snn_loss(Tensor({2}, {2.0f, 1.0f}), 0), 0.31326, 1e-5);
  EXPECT_NEAR(snn_loss(Tensor({2}, {1000.0f, 0.0f}), 0), 0.0, 1e-6);
  EXPECT_TRUE(std::isfinite(snn_loss(Tensor({2}, {1000.0f, 0.0f}), 1)));
  EXPECT_THROW(snn_loss(Tensor({2}, {1.0f, 0.0f}), 2), std::out_of_range);
}

TEST(Loss, CrossEntropyGradientIsSoftmaxMinusOneHot) {
  const std::vector<int> labels{1, 0};
  const LossAndGrad r = cross_entropy(Tensor({2, 2}, {0.0f, 0.0f, 2.0f, 1.0f}), labels);
  EXPECT_NEAR(r.loss, (std::log(2.0) + 0.31326) / 2, 1e-5);
  EXPECT_NEAR(r.grad[0], 0.25, 1e-6);
  EXPECT_NEAR(r.grad[1], -0.25, 1e-6);
  const double p = 1.0 / (1.0 + std::exp(-1.0));
  EXPECT_NEAR(r.grad[2], (p - 1.0) / 2, 1e-6);
  EXPECT_NEAR(r.grad[3], (1.0 - p) / 2, 1e-6);
}

Model dense_snn(const std::vector<Index>& widths, int T, bool bntt) {
  ModelSpec spec;
  spec.input_shape = {widths.front(), 1, 1};
  spec.class_count = widths.back();
  spec.bntt = bntt;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) spec.layers.push_back(LayerSpec::dense(widths[l], widths[l + 1]));
  SnnConfig snn;
  snn.timesteps = T;
  RngStream init(4);
  return build_model(spec, snn, init);
}

TEST(SnnForward, SilentInputGivesZeroLogits) {
  Model model = dense_snn({4, 3, 2}, 5, true);
  const Tensor logits = snn_forward(model, Tensor({5, 3, 4, 1, 1}), Mode::training);
  EXPECT_EQ(logits, Tensor({3, 2}));
}

TEST(SnnForward, SingleLinearLayerAccumulates) {
  Model model = dense_snn({2, 2}, 1, false);
  model.layers[0].weight = Tensor({2, 2}, {1, 0, 0, 1});
  EXPECT_EQ(snn_infer(model, Tensor({1, 1, 2, 1, 1}, {1, 0})), Tensor({1, 2}, {1, 0}));
}

TEST(SnnForward, OutputLayerHasNoLeak) {
  Model model = dense_snn({1, 1}, 4, false);
  model.layers[0].weight = Tensor({1, 1}, {0.5f});
  EXPECT_FLOAT_EQ(snn_infer(model, Tensor::constant({4, 1, 1, 1, 1}, 1.0f))[0], 2.0f);
}

TEST(SnnForward, InferenceIsPermutationEquivariant) {
  Model model = dense_snn({6, 5, 3}, 4, true);
  RngStream s(8);
  Tensor x({4, 3, 6, 1, 1});
  for (Index i = 0; i < x.size(); ++i) x[i] = s.uniform_float() < 0.5f ? 1.0f : 0.0f;
  snn_forward(model, x, Mode::training);  // move the running statistics off their defaults
  Tensor perm(x.shape());
  const Index order[3] = {2, 0, 1};
  for (Index t = 0; t < 4; ++t) {
    for (Index b = 0; b < 3; ++b) perm.values().segment((t * 3 + b) * 6, 6) = x.values().segment((t * 3 + order[b]) * 6, 6);
  }
  const Tensor a = snn_infer(model, x), b = snn_infer(model, perm);
  for (Index b2 = 0; b2 < 3; ++b2) EXPECT_EQ(b.values().segment(b2 * 3, 3), a.values().segment(order[b2] * 3, 3));
  EXPECT_EQ(snn_infer(model, x), a);
}

TEST(SnnForward, HiddenSpikesAreBinary) {
  Model model = dense_snn({6, 5, 3}, 6, true);
  RngStream s(10);
  Tensor x({6, 4, 6, 1, 1});
  for (Index i = 0; i < x.size(); ++i) x[i] = s.uniform_float() < 0.5f ? 1.0f : 0.0f;
  SnnTrace trace;
  snn_forward(model, x, Mode::training, &trace);
  const Tensor& spikes = trace.layers[0].spikes;
  for (Index i = 0; i < spikes.size(); ++i) EXPECT_TRUE(spikes[i] == 0.0f || spikes[i] == 1.0f);
}

TEST(SnnBackward, RequiresTrainingTrace) {
  const Model model = dense_snn({2, 2, 2}, 2, false);
  const std::vector<int> labels{0};
  EXPECT_THROW(snn_backward(model, SnnTrace{}, labels), std::logic_error);
}

TEST(SnnBackward, ZeroUpstreamGradientGivesZero) {
  Model model = dense_snn({3, 4, 2}, 3, true);
  Tensor x = Tensor::constant({3, 2, 3, 1, 1}, 1.0f);
  x[0] = 0.0f;
  SnnTrace trace;
  snn_forward(model, x, Mode::training, &trace);
  const ParamVector g = snn_backward_from(model, trace, Tensor({2, 2}));
  EXPECT_EQ(g.values.values().cwiseAbs().maxCoeff(), 0.0f);
}

TEST(SnnBackward, SingleLayerClosedForm) {
  // One leak-free accumulating layer: dL/dW = sum_t (softmax - onehot) x_t^T / B.
  Model model = dense_snn({3, 2}, 4, false);
  RngStream s(12);
  Tensor x({4, 2, 3, 1, 1});
  for (Index i = 0; i < x.size(); ++i) x[i] = s.uniform_float() < 0.5f ? 1.0f : 0.0f;
  SnnTrace trace;
  const Tensor logits = snn_forward(model, x, Mode::training, &trace);
  const std::vector<int> labels{1, 0};
  const ParamVector g = snn_backward(model, trace, labels);
  Eigen::MatrixXd want = Eigen::MatrixXd::Zero(2, 3);
  for (Index b = 0; b < 2; ++b) {
    const Eigen::Vector2d z(logits[2 * b], logits[2 * b + 1]);
    Eigen::Vector2d p = (z.array() - z.maxCoeff()).exp().matrix();
    p /= p.sum();
    p[labels[std::size_t(b)]] -= 1.0;
    Eigen::Vector3d total = Eigen::Vector3d::Zero();
    for (Index t = 0; t < 4; ++t) total += x.values().segment((t * 2 + b) * 3, 3).cast<double>();
    want += p * total.transpose() / 2.0;
  }
  for (Index i = 0; i < 6; ++i) EXPECT_NEAR(g.values[i], want(i / 3, i % 3), 1e-6);
}

TEST(SnnBackward, MatchesScalarOracleWithoutBntt) {
  RngStream s(100);
  for (int trial = 0; trial < 25; ++trial) {
    const fixture::BpttCase c = fixture::random_case({2, 2, 2}, 3, 4, false, s);
    const auto cmp = fixture::compare_bptt(c);
    if (cmp.threshold_gap < 1e-4) continue;
    EXPECT_LE(cmp.relative_error, 1e-5) << trial;
    EXPECT_LE(cmp.loss_error, 1e-5) << trial;
  }
}

TEST(SnnBackward, MatchesScalarOracleWithBntt) {
  RngStream s(200);
  for (int trial = 0; trial < 25; ++trial) {
    const fixture::BpttCase c = fixture::random_case({2, 2, 2}, 3, 4, true, s);
    const auto cmp = fixture::compare_bptt(c);
    if (cmp.threshold_gap < 1e-4) continue;
    EXPECT_LE(cmp.relative_error, 1e-5) << trial;
  }
}

TEST(SnnBackward, DeeperNetworkMatchesOracle) {
  RngStream s(300);
  for (int trial = 0; trial < 10; ++trial) {
    const fixture::BpttCase c = fixture::random_case({5, 4, 3, 3}, 6, 3, trial % 2 == 0, s);
    const auto cmp = fixture::compare_bptt(c);
    if (cmp.threshold_gap < 1e-4) continue;
    EXPECT_LE(cmp.relative_error, 1e-4) << trial;
  }
}

}  // namespace
}  // namespace fedsnn
