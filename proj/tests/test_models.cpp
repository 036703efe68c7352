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

#include "fedsnn/dataset.hpp"
#include "fedsnn/model.hpp"
#include "fedsnn/network.hpp"
#include "fedsnn/training.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace fedsnn {
namespace {

ModelSpec small_spec(ModelKind kind) {
  ModelSpec spec;
  spec.kind = kind;
  spec.input_shape = {1, 8, 8};
  spec.class_count = 3;
  spec.layers = {LayerSpec::conv(3, 1, 4), LayerSpec::pool(), LayerSpec::conv(3, 4, 6), LayerSpec::pool(),
                 LayerSpec::dense(24, 3)};
  return spec;
}

ModelSpec vgg9_spec() {
  ModelSpec spec;
  spec.input_shape = {3, 32, 32};
  spec.class_count = 10;
  spec.layers = {LayerSpec::conv(3, 3, 64),    LayerSpec::conv(3, 64, 64),   LayerSpec::pool(),
                 LayerSpec::conv(3, 64, 128),  LayerSpec::conv(3, 128, 128), LayerSpec::pool(),
                 LayerSpec::conv(3, 128, 256), LayerSpec::conv(3, 256, 256), LayerSpec::conv(3, 256, 256),
                 LayerSpec::pool(),            LayerSpec::dense(4096, 1024), LayerSpec::dense(1024, 10)};
  return spec;
}

Model make(const ModelSpec& spec, std::uint64_t seed = 1, int T = 4) {
  SnnConfig snn;
  snn.timesteps = T;
  RngStream s(seed);
  return build_model(spec, snn, s);
}

Batch random_batch(const Shape& sample, int n, int classes, std::uint64_t seed) {
  RngStream s(seed);
  Shape shape{n};
  shape.insert(shape.end(), sample.begin(), sample.end());
  Batch b{rng_uniform(s, shape), {}, {}};
  for (int i = 0; i < n; ++i) {
    b.labels.push_back(i % classes);
    b.sample_ids.push_back(std::uint64_t(i));
  }
  return b;
}

TEST(ModelSpec, RejectsBrokenChainNamingBothLayers) {
  ModelSpec spec = small_spec(ModelKind::snn);
  spec.layers[2] = LayerSpec::conv(3, 5, 6);
  try {
    spec.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("pool1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("conv2"), std::string::npos) << msg;
  }
}

TEST(ModelSpec, LastLayerMustBeClassifier) {
  ModelSpec spec = small_spec(ModelKind::ann);
  spec.class_count = 4;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = small_spec(ModelKind::ann);
  spec.layers.pop_back();
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(BuildModel, DeterministicPerStream) {
  const ModelSpec spec = small_spec(ModelKind::snn);
  EXPECT_EQ(flatten(make(spec, 5)).values, flatten(make(spec, 5)).values);
  EXPECT_NE(flatten(make(spec, 5)).values, flatten(make(spec, 6)).values);
}

TEST(BuildModel, FanInBoundedInit) {
  ModelSpec spec;
  spec.kind = ModelKind::ann;
  spec.input_shape = {50, 1, 1};
  spec.class_count = 7;
  spec.layers = {LayerSpec::dense(50, 7)};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Model m = make(spec, seed);
    EXPECT_LE(m.layers[0].weight.values().cwiseAbs().maxCoeff(), std::sqrt(6.0f / 50.0f));
    EXPECT_EQ(m.layers[0].bias.values().cwiseAbs().maxCoeff(), 0.0f);
  }
}

TEST(BuildModel, AllocatesOneGammaPerHiddenLayerAndTimestep) {
  const Model m = make(small_spec(ModelKind::snn), 1, 7);
  ASSERT_EQ(m.bntt.size(), 2u);
  Index slots = 0;
  for (const auto& b : m.bntt) {
    EXPECT_EQ(b.timesteps(), 7);
    slots += b.timesteps();
    EXPECT_EQ(b.gamma, Tensor::constant(b.gamma.shape(), 1.0f));
  }
  EXPECT_EQ(slots, 2 * 7);
  ModelSpec plain = small_spec(ModelKind::snn);
  plain.bntt = false;
  EXPECT_TRUE(make(plain).bntt.empty());
}

TEST(Layout, AnnAndSnnShareTheWeightPrefix) {
  const ParamLayout ann = param_layout(make(small_spec(ModelKind::ann)));
  const ParamLayout snn = param_layout(make(small_spec(ModelKind::snn)));
  ASSERT_EQ(ann.size(), 6u);  // 3 weights + 3 biases
  ASSERT_EQ(snn.size(), 5u);  // 3 weights + 2 gammas
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(ann[i], snn[i]);
    EXPECT_EQ(ann[i].role, ParamRole::weight);
  }
  EXPECT_EQ(snn[3].name, "conv1.gamma");
  EXPECT_EQ(snn[3].shape, (Shape{4, 4}));
  EXPECT_EQ(ann[3].name, "conv1.bias");
  EXPECT_EQ(param_layout(make(small_spec(ModelKind::snn), 9)), snn);
}

TEST(Layout, Vgg9HasNineWeightsAndNineBiases) {
  ModelSpec spec = vgg9_spec();
  spec.kind = ModelKind::ann;
  const ParamLayout layout = param_layout(make(spec));
  ASSERT_EQ(layout.size(), 18u);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(layout[i].role, ParamRole::weight);
  for (std::size_t i = 9; i < 18; ++i) EXPECT_EQ(layout[i].role, ParamRole::bias);
}

TEST(Flatten, RoundTripAndDeltaAlgebra) {
  const Model a = make(small_spec(ModelKind::snn), 1), b = make(small_spec(ModelKind::snn), 2);
  const ParamVector fa = flatten(a), fb = flatten(b);
  ParamVector diff{fa.layout, Tensor(fa.values.shape(), fb.values.values() - fa.values.values())};
  EXPECT_EQ(flatten(apply_delta(a, ParamVector::zeros(fa.layout))).values, fa.values);
  const ParamVector moved = flatten(apply_delta(a, diff));
  EXPECT_EQ(moved.values.values(), fa.values.values() + diff.values.values());
  EXPECT_LE((moved.values.values() - fb.values.values()).cwiseAbs().maxCoeff(), 1e-6f);

  Model c = make(small_spec(ModelKind::snn), 3);
  load_params(c, fa);
  EXPECT_EQ(flatten(c).values, fa.values);
}

TEST(Flatten, ExcludesRunningStatistics) {
  Model m = make(small_spec(ModelKind::snn));
  const ParamVector before = flatten(m);
  m.bntt[0].running_mean[0] = 4.0f;
  EXPECT_EQ(flatten(m).values, before.values);
  EXPECT_EQ(bntt_buffers(m)[0], 4.0f);
  Model other = make(small_spec(ModelKind::snn));
  load_bntt_buffers(other, bntt_buffers(m));
  EXPECT_EQ(bntt_buffers(other), bntt_buffers(m));
}

TEST(Flatten, LayoutMismatchRejected) {
  const Model snn = make(small_spec(ModelKind::snn));
  const ParamVector ann = flatten(make(small_spec(ModelKind::ann)));
  EXPECT_THROW(apply_delta(snn, ann), std::invalid_argument);
}

TEST(Flatten, InferenceLossInvariantUnderRoundTrip) {
  const Model m = make(small_spec(ModelKind::snn));
  const Model back = apply_delta(m, ParamVector::zeros(param_layout(m)));
  const Batch batch = random_batch({1, 8, 8}, 4, 3, 3);
  const RngStream enc(4);
  const Tensor spikes = poisson_encode_batch(batch.images, 4, enc, batch.sample_ids);
  EXPECT_EQ(snn_infer(m, spikes), snn_infer(back, spikes));
}

TEST(TrainStep, ZeroLearningRateKeepsModel) {
  Model m = make(small_spec(ModelKind::snn));
  const ParamVector before = flatten(m);
  SgdConfig opt;
  opt.learning_rate = 0.0f;
  opt.momentum = 0.9f;
  SgdState state;
  const float loss = train_step(m, random_batch({1, 8, 8}, 4, 3, 2), opt, state, RngStream(1));
  EXPECT_GT(loss, 0.0f);
  EXPECT_EQ(flatten(m).values, before.values);
}

TEST(TrainStep, PlainSgdMovesByLearningRateTimesGradient) {
  for (ModelKind kind : {ModelKind::snn, ModelKind::ann}) {
    Model m = make(small_spec(kind));
    const Batch batch = random_batch({1, 8, 8}, 5, 3, 7);
    Model probe = m;
    const GradientResult g = compute_gradients(probe, batch, RngStream(2));
    const ParamVector before = flatten(m);
    SgdConfig opt;
    opt.learning_rate = 0.05f;
    SgdState state;
    const float loss = train_step(m, batch, opt, state, RngStream(2));
    EXPECT_EQ(loss, g.loss);
    const Eigen::VectorXf want = before.values.values() - 0.05f * g.grad.values.values();
    EXPECT_EQ(flatten(m).values.values(), want);
  }
}

TEST(TrainStep, MomentumAndWeightDecay) {
  ModelSpec spec;
  spec.kind = ModelKind::ann;
  spec.input_shape = {2, 1, 1};
  spec.class_count = 2;
  spec.layers = {LayerSpec::dense(2, 2)};
  Model m = make(spec);
  const Batch batch = random_batch({2, 1, 1}, 4, 2, 1);
  SgdConfig opt;
  opt.learning_rate = 0.1f;
  opt.momentum = 0.5f;
  opt.weight_decay = 0.01f;
  SgdState state;
  Eigen::VectorXf v = Eigen::VectorXf::Zero(flatten(m).size());
  for (int step = 0; step < 3; ++step) {
    Model probe = m;
    const Eigen::VectorXf g = compute_gradients(probe, batch, RngStream(0)).grad.values.values();
    const Eigen::VectorXf p = flatten(m).values.values();
    v = 0.5f * v + (g + 0.01f * p);
    const Eigen::VectorXf want = p - 0.1f * v;
    train_step(m, batch, opt, state, RngStream(0));
    EXPECT_LE((flatten(m).values.values() - want).cwiseAbs().maxCoeff(), 1e-7f);
  }
}

TEST(TrainStep, ConvexToyLossDecreases) {
  ModelSpec spec;
  spec.kind = ModelKind::ann;
  spec.input_shape = {4, 1, 1};
  spec.class_count = 3;
  spec.layers = {LayerSpec::dense(4, 3)};
  Model m = make(spec, 11);
  const Batch batch = random_batch({4, 1, 1}, 12, 3, 12);
  SgdConfig opt;
  opt.learning_rate = 0.5f;
  SgdState state;
  const float l0 = train_step(m, batch, opt, state, RngStream(0));
  const float l1 = train_step(m, batch, opt, state, RngStream(0));
  const float l2 = train_step(m, batch, opt, state, RngStream(0));
  EXPECT_LT(l1, l0);
  EXPECT_LT(l2, l1);
}

TEST(AnnBackward, MatchesFiniteDifferences) {
  Model m = make(small_spec(ModelKind::ann), 21);
  const Batch batch = random_batch({1, 8, 8}, 3, 3, 22);
  AnnTrace trace;
  ann_forward(m, batch.images, &trace);
  const ParamVector g = ann_backward(m, trace, batch.labels);
  ParamVector p = flatten(m);
  const auto loss = [&](const ParamVector& params) {
    Model probe = m;
    load_params(probe, params);
    AnnTrace t;
    ann_forward(probe, batch.images, &t);
    float l = 0.0f;
    ann_backward(probe, t, batch.labels, &l);
    return double(l);
  };
  RngStream pick(3);
  for (int k = 0; k < 40; ++k) {
    const Index i = Index(pick() % std::uint64_t(p.size()));
    const float keep = p.values[i];
    const float h = 1e-3f;
    p.values[i] = keep + h;
    const double up = loss(p);
    p.values[i] = keep - h;
    const double down = loss(p);
    p.values[i] = keep;
    EXPECT_NEAR(g.values[i], (up - down) / (2 * h), 2e-3 + 2e-2 * std::abs(g.values[i])) << i;
  }
}

TEST(Sgd, ScheduleCompoundsFromListedRound) {
  SgdConfig opt;
  opt.learning_rate = 0.1f;
  opt.lr_schedule = {{40, 5.0f}, {60, 5.0f}, {80, 5.0f}};
  EXPECT_FLOAT_EQ(opt.at_round(39).learning_rate, 0.1f);
  EXPECT_FLOAT_EQ(opt.at_round(40).learning_rate, 0.02f);
  EXPECT_FLOAT_EQ(opt.at_round(79).learning_rate, 0.004f);
  EXPECT_FLOAT_EQ(opt.at_round(99).learning_rate, 0.0008f);
}

TEST(EpochBatches, CoversIndicesAndAvoidsSingletons) {
  std::vector<std::size_t> idx(33);
  std::iota(idx.begin(), idx.end(), 0);
  RngStream s(1);
  const auto batches = epoch_batches(idx, 8, s);
  ASSERT_EQ(batches.size(), 4u);
  EXPECT_EQ(batches.back().size(), 9u);
  std::vector<std::size_t> all;
  for (const auto& b : batches) all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, idx);
}

}  // namespace
}  // namespace fedsnn
