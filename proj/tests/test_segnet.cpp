/* Copyright 2026 The RoadAudit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "roadaudit/segnet.hpp"
#include "test_util.hpp"

namespace roadaudit {
namespace {

template <typename T>
Tensor<T> random_image(int n, int h, int w, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  auto t = Tensor<T>::nchw(n, 3, h, w);
  for (auto& v : t.values()) v = static_cast<T>(d(gen));
  return t;
}

bool all_finite(const Tensor<float>& t) {
  for (float v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

TEST(Gate, IdentityWhenProbabilityIsOne) {
  const auto img = random_image<double>(2, 4, 4, 1);
  const auto p = Tensor<double>::nchw(2, 1, 4, 4, 1.0);
  EXPECT_EQ(attention_apply(img, p), img);
}

TEST(Gate, AnnihilationWhenProbabilityIsZero) {
  const auto img = random_image<double>(1, 4, 4, 2);
  const auto p = Tensor<double>::nchw(1, 1, 4, 4, 0.0);
  const auto gated = attention_apply(img, p);
  for (double v : gated.values()) EXPECT_EQ(v, 0.0);
}

TEST(Gate, ElementwiseProductOracle) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto img = Tensor<double>::nchw(1, 3, 4, 4);
    auto p = Tensor<double>::nchw(1, 1, 4, 4);
    for (auto& v : img.values()) v = d(gen) * 255.0;
    for (auto& v : p.values()) v = d(gen);
    const auto g = attention_apply(img, p);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) EXPECT_EQ(g.at(0, c, y, x), img.at(0, c, y, x) * p.at(0, 0, y, x));
  }
}

TEST(Gate, RejectsBadShapesAndRanges) {
  const auto img = random_image<double>(1, 4, 4, 4);
  EXPECT_THROW(attention_apply(img, Tensor<double>::nchw(1, 1, 4, 5, 0.5)), Error);
  EXPECT_THROW(attention_apply(img, Tensor<double>::nchw(1, 1, 4, 4, 1.5)), Error);
}

TEST(FeaturePooling, ConstantMapGivesConstantBranches) {
  auto f = Tensor<double>({3, 8, 8}, 0.4);
  const auto y = spatial_feature_pool(f, {1, 2, 4, 8}, true);
  EXPECT_EQ(y.dim(0), 3 * 5);
  for (double v : y.values()) EXPECT_NEAR(v, 0.4, 1e-15);
}

TEST(FeaturePooling, ScaleOneIsArithmeticMean) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  auto f = Tensor<double>({2, 4, 4});
  for (auto& v : f.values()) v = d(gen);
  const auto y = spatial_feature_pool(f, {1}, true);
  ASSERT_EQ(y.dim(0), 4);
  for (int c = 0; c < 2; ++c) {
    double s = 0.0;
    for (int i = 0; i < 16; ++i) s += f[static_cast<std::size_t>(c) * 16 + i];
    for (int i = 0; i < 16; ++i) {
      EXPECT_NEAR(y[static_cast<std::size_t>(2 + c) * 16 + i], s / 16.0, 1e-14);
      EXPECT_EQ(y[static_cast<std::size_t>(c) * 16 + i], f[static_cast<std::size_t>(c) * 16 + i]);
    }
  }
}

TEST(FeaturePooling, ProjectedChannelCount) {
  auto f = Tensor<float>({1, 8, 8, 8}, 1.0f);
  EXPECT_EQ(spatial_feature_pool(f, {1, 2, 4, 8}, false, 2).dim(1), 16);
}

TEST(Softmax, SumsToOne) {
  std::mt19937_64 gen(6);
  std::normal_distribution<double> d(0.0, 10.0);
  auto logits = Tensor<double>::nchw(2, 11, 3, 3);
  for (auto& v : logits.values()) v = d(gen);
  const auto p = softmax_channels(logits);
  for (int s = 0; s < 2; ++s)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) {
        double sum = 0.0;
        for (int c = 0; c < 11; ++c) sum += p.at(s, c, y, x);
        EXPECT_NEAR(sum, 1.0, 1e-12);
      }
}

TEST(Model, FullSizeShapes) {
  SegModel<float> model(ModelConfig::toy());
  const auto out = model.forward(random_image<float>(1, 512, 1024, 7), false);
  EXPECT_EQ(out.road_logits.shape(), (std::vector<int>{1, 2, 512, 1024}));
  EXPECT_EQ(out.defect_logits.shape(), (std::vector<int>{1, 11, 512, 1024}));
  EXPECT_EQ(out.road_prob.shape(), (std::vector<int>{1, 1, 512, 1024}));
}

TEST(Model, ZeroImageGivesFiniteLogits) {
  for (auto kind : {ModelKind::kCascade, ModelKind::kBaseline}) {
    auto cfg = ModelConfig::toy();
    cfg.kind = kind;
    SegModel<float> model(cfg);
    const auto out = model.forward(Tensor<float>::nchw(1, 3, 64, 128), false);
    EXPECT_TRUE(all_finite(out.defect_logits));
    if (kind == ModelKind::kCascade) EXPECT_TRUE(all_finite(out.road_logits));
  }
}

TEST(Model, InferenceIsDeterministic) {
  for (auto kind : {ModelKind::kCascade, ModelKind::kBaseline}) {
    auto cfg = ModelConfig::toy();
    cfg.kind = kind;
    SegModel<float> a(cfg), b(cfg);
    const auto img = random_image<float>(2, 64, 128, 8);
    const auto o1 = a.forward(img, false);
    const auto o2 = a.forward(img, false);
    const auto o3 = b.forward(img, false);
    EXPECT_EQ(o1.defect_logits, o2.defect_logits);
    EXPECT_EQ(o1.defect_logits, o3.defect_logits);
  }
}

TEST(Model, ZeroGateIgnoresImageContent) {
  SegModel<float> model(ModelConfig::toy());
  model.set_gate_override(0.0f);
  const auto a = model.forward(random_image<float>(1, 64, 128, 9), false);
  const auto b = model.forward(random_image<float>(1, 64, 128, 10), false);
  EXPECT_EQ(a.defect_logits, b.defect_logits);

  // Equals the defect network's response to an all-zero image.
  model.set_gate_override(1.0f);
  const auto z = model.forward(Tensor<float>::nchw(1, 3, 64, 128), false);
  EXPECT_EQ(a.defect_logits, z.defect_logits);
}

TEST(Model, BaselineHasFewerParameters) {
  auto cfg = ModelConfig::toy();
  SegModel<float> cascade(cfg);
  cfg.kind = ModelKind::kBaseline;
  SegModel<float> baseline(cfg);
  EXPECT_LT(baseline.parameter_count(), cascade.parameter_count());
  EXPECT_TRUE(baseline.road_parameters().empty());
  const auto out = baseline.forward(random_image<float>(1, 64, 128, 11), false);
  EXPECT_EQ(out.defect_logits.shape(), (std::vector<int>{1, 11, 64, 128}));
  EXPECT_TRUE(out.road_logits.empty());
}

TEST(Model, RejectsInputsNotDivisibleByEight) {
  SegModel<float> model(ModelConfig::toy());
  try {
    model.forward(Tensor<float>::nchw(1, 3, 60, 128), false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
  // The deepest pooling scale (8) needs at least 8 cells at 1/8 resolution.
  EXPECT_THROW(model.forward(Tensor<float>::nchw(1, 3, 32, 128), false), Error);
}

// Finite differences of sum(R_d * defect) + sum(R_r * road) in double precision.
TEST(Model, GradientCheckTinyCascade) {
  auto cfg = ModelConfig::tiny();
  cfg.seed = 3;
  SegModel<double> model(cfg);
  const auto img = random_image<double>(1, 16, 16, 12);
  std::mt19937_64 gen(13);
  std::normal_distribution<double> nd(0.0, 1.0);
  // Zero-initialized biases behind a dead input sit exactly on a ReLU hinge.
  for (auto* p : model.parameters()) {
    if (p->name.ends_with(".bias"))
      for (auto& v : p->value.values()) v = 0.1 * nd(gen);
  }
  auto out = model.forward(img, true);
  auto rd = Tensor<double>(out.defect_logits.shape());
  auto rr = Tensor<double>(out.road_logits.shape());
  for (auto& v : rd.values()) v = nd(gen);
  for (auto& v : rr.values()) v = nd(gen);
  model.zero_grad();
  model.backward(rr, rd);

  const auto loss = [&] {
    const auto o = model.forward(img, false);
    double s = 0.0;
    for (std::size_t i = 0; i < rd.size(); ++i) s += rd[i] * o.defect_logits[i];
    for (std::size_t i = 0; i < rr.size(); ++i) s += rr[i] * o.road_logits[i];
    return s;
  };
  auto road = model.road_parameters();
  auto all = model.parameters();
  const double h = 1e-4;
  double worst = 0.0;
  for (int t = 0; t < 30; ++t) {
    // Half the probes target the road network so the gate path is exercised.
    auto& pool = t % 2 == 0 ? road : all;
    auto* p = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(gen)];
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, p->value.size() - 1)(gen);
    const double saved = p->value[i];
    p->value[i] = saved + h;
    const double up = loss();
    p->value[i] = saved - h;
    const double down = loss();
    p->value[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = p->grad[i];
    const double rel = std::abs(numeric - analytic) /
                       std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    worst = std::max(worst, rel);
    EXPECT_LE(rel, 1e-3) << p->name << "[" << i << "] numeric " << numeric << " analytic "
                         << analytic;
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(Decode, CascadeVoidsOffRoadPixels) {
  SegModel<double>::Output out;
  out.defect_logits = Tensor<double>::nchw(1, 11, 1, 3);
  out.road_prob = Tensor<double>::nchw(1, 1, 1, 3);
  out.road_prob.at(0, 0, 0, 0) = 0.2;
  out.road_prob.at(0, 0, 0, 1) = 0.9;
  out.road_prob.at(0, 0, 0, 2) = 0.9;
  out.defect_logits.at(0, 4, 0, 0) = 5.0;
  out.defect_logits.at(0, 0, 0, 1) = 9.0;  // void logit is ignored on road pixels
  out.defect_logits.at(0, 7, 0, 1) = 1.0;
  out.defect_logits.at(0, 10, 0, 2) = 3.0;
  const Mask m = decode_prediction<double>(out, 0, true);
  EXPECT_EQ(m(0, 0), 0);
  EXPECT_EQ(m(0, 1), 7);
  EXPECT_EQ(m(0, 2), 10);
  const Mask b = decode_prediction<double>(out, 0, false);
  EXPECT_EQ(b(0, 0), 4);
  EXPECT_EQ(b(0, 1), 0);
}

TEST(Checkpoint, RoundTripPreservesOutputs) {
  testutil::TempDir dir;
  for (auto kind : {ModelKind::kCascade, ModelKind::kBaseline}) {
    auto cfg = ModelConfig::toy();
    cfg.kind = kind;
    cfg.seed = 99;
    SegModel<float> model(cfg);
    for (auto* p : model.parameters()) {
      for (auto& v : p->value.values()) v += 0.01f;
    }
    const auto path = dir / "m.ckpt";
    save_checkpoint(model, path, R"({"note":"x"})");
    std::string extra;
    auto loaded = load_checkpoint(path, &extra);
    EXPECT_EQ(loaded->config().kind, kind);
    EXPECT_NE(extra.find("note"), std::string::npos);
    const auto img = random_image<float>(1, 64, 128, 14);
    EXPECT_EQ(model.forward(img, false).defect_logits, loaded->forward(img, false).defect_logits);
  }
}

TEST(Checkpoint, CorruptFilesAreDataErrors) {
  testutil::TempDir dir;
  const auto bogus = dir / "bogus.ckpt";
  std::ofstream(bogus) << "definitely not a checkpoint";
  const auto expect_data_error = [](const std::filesystem::path& p) {
    try {
      load_checkpoint(p);
      FAIL() << p;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kData) << e.what();
    }
  };
  expect_data_error(bogus);
  expect_data_error(dir / "missing.ckpt");

  SegModel<float> model(ModelConfig::tiny());
  const auto good = dir / "good.ckpt";
  save_checkpoint(model, good);
  const auto bytes = testutil::slurp(good);
  const auto truncated = dir / "truncated.ckpt";
  std::ofstream(truncated, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  expect_data_error(truncated);
}

TEST(Resize, NearestNeighbourMask) {
  Mask m(2, 2);
  m(0, 0) = 1;
  m(0, 1) = 2;
  m(1, 0) = 3;
  m(1, 1) = 4;
  const Mask up = resize_mask_nearest(m, 4, 6);
  EXPECT_EQ(up(0, 0), 1);
  EXPECT_EQ(up(1, 2), 1);
  EXPECT_EQ(up(0, 5), 2);
  EXPECT_EQ(up(3, 0), 3);
  EXPECT_EQ(up(3, 5), 4);
  EXPECT_EQ(resize_mask_nearest(up, 2, 2), m);
}

}  // namespace
}  // namespace roadaudit
