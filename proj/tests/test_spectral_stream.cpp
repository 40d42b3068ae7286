#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "df4lcz/gradcheck_suite.hpp"
#include "df4lcz/spectral/conv3d.hpp"
#include "df4lcz/spectral/resnet3d.hpp"
#include "oracles.hpp"

using namespace df4lcz;

namespace {

template <class T>
BasicTensor<T> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  BasicTensor<T> t(std::move(s));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

Tensor random_cube(Rng& rng, Shape s = {kSentinelPatch, kSentinelPatch, kSentinelBands}) {
  return random_tensor<float>(std::move(s), rng, 0.0, 1.0);
}

ResNet3dConfig tiny_config(std::size_t classes = kNumClasses) {
  ResNet3dConfig cfg;
  cfg.widths.stem = 2;
  cfg.widths.blocks = {2, 4, 8};
  cfg.num_classes = classes;
  return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------
// conv3d

TEST(Conv3d, AllOnesSumsKernelVolume) {
  Tensor x({1, 3, 3, 3, 1}, 1.0f), k({3, 3, 3, 1, 1}, 1.0f), b({1});
  auto y = conv3d_forward(x, k, b, Conv3dGeometry{});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(y[0], 27.0f);
}

TEST(Conv3d, DeltaImpulseGivesFlippedKernel) {
  Rng rng(3);
  Tensor x({1, 5, 5, 5, 1});
  x(0, 2, 2, 2, 0) = 1.0f;
  auto k = random_tensor<float>({3, 3, 3, 1, 1}, rng);
  auto y = conv3d_forward(x, k, Tensor({1}), Conv3dGeometry::same(3, 1));
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_FLOAT_EQ(y(0, 1 + a, 1 + b, 1 + c, 0), k(2 - a, 2 - b, 2 - c, 0, 0));
      }
  EXPECT_FLOAT_EQ(y(0, 0, 0, 0, 0), 0.0f);
}

TEST(Conv3d, MatchesNestedLoopOracle) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Rng rng(seed);
    const std::size_t kk = 1 + rng.uniform_int(3);
    const std::size_t s = 1 + rng.uniform_int(2), p = rng.uniform_int(2);
    Shape xs{1 + rng.uniform_int(2), 0, 0, 0, 1 + rng.uniform_int(3)};
    for (int a = 1; a <= 3; ++a) xs[a] = std::max<std::size_t>(kk, 3 + rng.uniform_int(4));
    auto x = random_tensor<float>(xs, rng);
    auto k = random_tensor<float>({kk, kk, kk, xs[4], 1 + rng.uniform_int(3)}, rng);
    auto b = random_tensor<float>({k.dim(4)}, rng);
    const Conv3dGeometry g{{s, s, s}, {p, p, p}};
    auto y = conv3d_forward(x, k, b, g);
    auto ref = oracle::conv3d(x, k, b, {long(s), long(s), long(s)}, {long(p), long(p), long(p)});
    ASSERT_EQ(y.shape(), ref.shape()) << "seed " << seed;
    EXPECT_LT(max_abs_diff(y.cast<double>(), ref), 1e-5) << "seed " << seed;
  }
}

TEST(Conv3d, SpecExampleShape) {
  Rng rng(1);
  auto x = random_tensor<float>({1, 5, 5, 4, 2}, rng);
  auto k = random_tensor<float>({3, 3, 3, 2, 3}, rng);
  auto b = random_tensor<float>({3}, rng);
  auto y = conv3d_forward(x, k, b, Conv3dGeometry{});
  auto ref = oracle::conv3d(x, k, b, {1, 1, 1}, {0, 0, 0});
  EXPECT_EQ(y.shape(), (Shape{1, 3, 3, 2, 3}));
  EXPECT_LT(max_abs_diff(y.cast<double>(), ref), 1e-5);
}

TEST(Conv3d, ShapeErrors) {
  Tensor x({1, 4, 4, 4, 2}), b({1});
  EXPECT_THROW(conv3d_forward(x, Tensor({3, 3, 3, 1, 1}), b, Conv3dGeometry{}), DimensionError);
  EXPECT_THROW(conv3d_forward(x, Tensor({5, 5, 5, 2, 1}), b, Conv3dGeometry{}), DimensionError);
  EXPECT_THROW(conv3d_forward(x, Tensor({3, 3, 3, 2, 1}), Tensor({2}), Conv3dGeometry{}), DimensionError);
  EXPECT_THROW(conv3d_forward(Tensor({4, 4, 4, 2}), Tensor({3, 3, 3, 2, 1}), b, Conv3dGeometry{}), DimensionError);
}

TEST(Conv3d, GradCheckTenSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    auto r = gradsuite::conv3d(rng);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_entry;
    EXPECT_GT(r.checked, 0u);
  }
}

// ---------------------------------------------------------------------------
// residual block

TEST(ResidualBlock, ZeroConvsPassResidualOnly) {
  const auto spec = ResidualBlockSpec::make("blk", 3, 3, 1);
  ParamStore<float> p;
  BufferStore<float> buf;
  spec.register_params(p, buf);
  Rng rng(5);
  auto x = random_tensor<float>({2, 4, 4, 4, 3}, rng);
  auto y = spec.forward(p, buf, x, Mode::infer, nullptr);
  EXPECT_EQ(y, relu(x));
}

TEST(ResidualBlock, StridedBlockHalvesExtents) {
  const auto spec = ResidualBlockSpec::make("blk", 64, 128, 2);
  ASSERT_TRUE(spec.projection.has_value());
  ParamStore<float> p;
  BufferStore<float> buf;
  spec.register_params(p, buf);
  Rng rng(6);
  spec.init(p, rng);
  auto y = spec.forward(p, buf, random_tensor<float>({1, 32, 32, 10, 64}, rng), Mode::infer, nullptr);
  EXPECT_EQ(y.shape(), (Shape{1, 16, 16, 5, 128}));
}

TEST(ResidualBlock, IdentityShortcutOnlyWhenShapesMatch) {
  EXPECT_FALSE(ResidualBlockSpec::make("a", 4, 4, 1).projection.has_value());
  EXPECT_TRUE(ResidualBlockSpec::make("b", 4, 8, 1).projection.has_value());
  EXPECT_TRUE(ResidualBlockSpec::make("c", 4, 4, 2).projection.has_value());
}

TEST(ResidualBlock, WrongInputChannels) {
  const auto spec = ResidualBlockSpec::make("blk", 2, 3, 1);
  ParamStore<float> p;
  BufferStore<float> buf;
  spec.register_params(p, buf);
  EXPECT_THROW(spec.forward(p, buf, Tensor({2, 3, 3, 3, 3}), Mode::infer, nullptr), DimensionError);
}

TEST(ResidualBlock, GradCheckTenSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(Rng::subseed(seed, "residual"));
    auto r = gradsuite::residual_block(rng);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_entry;
    EXPECT_GT(r.checked, 100u);
  }
}

// ---------------------------------------------------------------------------
// full network

TEST(ResNet3d, FullSizeForwardIsSimplexOfSeventeen) {
  ResNet3d<float> model;
  Rng rng(1);
  model.init(rng);
  EXPECT_EQ(model.params().value("block3.conv_b.kernel").shape(), (Shape{3, 3, 3, 256, 256}));
  EXPECT_EQ(model.params().value("stem.kernel").shape(), (Shape{3, 3, 3, 1, 64}));
  EXPECT_EQ(model.params().value("head.w").shape(), (Shape{256, 17}));
  auto patch = SpectralPatch::from_tensor(random_cube(rng));
  auto c = resnet3d_forward(patch, model);
  EXPECT_EQ(c.size(), 17u);
  EXPECT_NEAR(c.sum(), 1.0, 1e-6);
}

TEST(ResNet3d, LayerAccounting) {
  ResNet3d<float> model;
  std::size_t weighted = 0;
  for (const auto& e : model.params().entries()) {
    if (e.name.ends_with(".kernel") || e.name == "head.w") ++weighted;
  }
  // stem + 2 convs per block + 2 projections + head
  EXPECT_EQ(weighted, 10u);
}

TEST(ResNet3d, ZeroHeadGivesUniform) {
  ResNet3d<float> model(tiny_config());
  Rng rng(2);
  model.init(rng);
  model.params().value("head.w").fill(0.0f);
  auto c = resnet3d_forward(SpectralPatch::from_tensor(random_cube(rng)), model);
  for (std::size_t i = 0; i < 17; ++i) EXPECT_NEAR(c[i], 1.0 / 17.0, 1e-7);
}

TEST(ResNet3d, InferIsDeterministicAndBatchOrderIndependent) {
  ResNet3d<float> model(tiny_config());
  Rng rng(3);
  model.init(rng);
  Shape s{8, 8, 4};
  auto a = random_cube(rng, s), b = random_cube(rng, s);
  const Tensor* ab[] = {&a, &b};
  const Tensor* ba[] = {&b, &a};
  const Tensor* aa[] = {&a, &a};
  auto p_ab = model.predict(stack_cubes<float>(ab));
  auto p_ba = model.predict(stack_cubes<float>(ba));
  auto p_aa = model.predict(stack_cubes<float>(aa));
  for (std::size_t c = 0; c < 17; ++c) {
    EXPECT_EQ(p_ab(0, c), p_ba(1, c));
    EXPECT_EQ(p_ab(1, c), p_ba(0, c));
    EXPECT_EQ(p_aa(0, c), p_aa(1, c));
  }
}

TEST(ResNet3d, PredictLeavesRunningStatsUntouched) {
  ResNet3d<float> model(tiny_config());
  Rng rng(4);
  model.init(rng);
  auto before = model.buffers();
  auto x = random_cube(rng, {8, 8, 4});
  const Tensor* xs[] = {&x};
  (void)model.predict(stack_cubes<float>(xs));
  EXPECT_EQ(model.buffers(), before);
}

namespace {

/// Infer-mode forward of the whole network evaluated with the loop oracles.
std::vector<double> manual_trace(const ResNet3d<double>& m, const Tensor64& x) {
  const auto& P = m.params();
  const auto& B = m.buffers();
  auto conv_bn = [&](const std::string& name, const Tensor64& in, long stride, long pad) {
    auto z = oracle::conv3d(in, P.value(name + ".kernel"), P.value(name + ".bias"), {stride, stride, stride},
                            {pad, pad, pad});
    const auto& g = P.value(name + ".gamma");
    const auto& be = P.value(name + ".beta");
    const auto& rm = B.at(name + ".running_mean");
    const auto& rv = B.at(name + ".running_var");
    const std::size_t C = z.dim(4);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const std::size_t c = i % C;
      z[i] = g[c] * (z[i] - rm[c]) / std::sqrt(rv[c] + 1e-5) + be[c];
    }
    return z;
  };
  auto relu_ = [](Tensor64 t) {
    for (auto& v : t.data()) v = std::max(v, 0.0);
    return t;
  };
  auto h = relu_(conv_bn("stem", x, 1, 1));
  const long strides[] = {1, 2, 2};
  for (int b = 0; b < 3; ++b) {
    const std::string n = "block" + std::to_string(b + 1);
    auto a = relu_(conv_bn(n + ".conv_a", h, strides[b], 1));
    auto y = conv_bn(n + ".conv_b", a, 1, 1);
    Tensor64 sc = P.contains(n + ".shortcut.kernel") ? conv_bn(n + ".shortcut", h, strides[b], 0) : h;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += sc[i];
    h = relu_(y);
  }
  const std::size_t C = h.dim(4), positions = h.size() / C;
  std::vector<double> pooled(C, 0.0);
  for (std::size_t i = 0; i < h.size(); ++i) pooled[i % C] += h[i] / static_cast<double>(positions);
  const auto& w = P.value("head.w");
  std::vector<double> z(w.dim(1));
  for (std::size_t j = 0; j < z.size(); ++j) {
    z[j] = P.value("head.b")[j];
    for (std::size_t c = 0; c < C; ++c) z[j] += pooled[c] * w(c, j);
  }
  return oracle::softmax_row(z);
}

}  // namespace

TEST(ResNet3d, MatchesManualTraceTinyWidths) {
  ResNet3d<double> model(tiny_config());
  Rng rng(5);
  model.init(rng);
  for (auto& [name, t] : model.buffers()) {
    for (auto& v : t.data()) v = name.ends_with("var") ? rng.uniform(0.5, 2.0) : rng.uniform(-0.2, 0.2);
  }
  for (auto& e : model.params().entries()) {
    if (e.name.ends_with(".beta") || e.name.ends_with(".bias") || e.name == "head.b") {
      for (auto& v : e.value.data()) v = rng.uniform(-0.3, 0.3);
    }
  }
  auto cube = random_tensor<double>({32, 32, 10}, rng, 0.0, 1.0);
  auto x = cube.reshaped({1, 32, 32, 10, 1});
  auto expected = manual_trace(model, x);
  auto got = model.predict(x);
  for (std::size_t c = 0; c < 17; ++c) EXPECT_NEAR(got(0, c), expected[c], 1e-12);
}

TEST(ResNet3d, EndToEndGradCheck) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(Rng::subseed(seed, "resnet-e2e"));
    ResNet3d<double> model(tiny_config(4));
    model.init(rng);
    auto x = random_tensor<double>({3, 8, 8, 4}, rng, 0.0, 1.0);
    std::vector<int> labels{0, 3, 1};
    auto fn = [&](ParamStore<double>& p, bool want) {
      ResNetCache<double> cache;
      auto z = model.logits(x, Mode::train, &cache);
      auto probs = softmax(z);
      const double loss = cross_entropy(probs, labels);
      if (want) {
        p.zero_grad();
        model.backward(cache, softmax_cross_entropy_backward(probs, labels));
      }
      std::uint64_t sig = activation_signature(cache.stem_act);
      for (const auto& b : cache.blocks) sig = activation_signature(b.out, activation_signature(b.a_act, sig));
      return LossEval{loss, sig};
    };
    GradCheckOptions opt;
    opt.max_coords_per_entry = 12;
    auto r = gradcheck("resnet", model.params(), fn, rng, opt);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_entry;
    EXPECT_GT(r.checked, 100u);
  }
}

TEST(ResNet3d, DuplicatedBatchGivesSameGradient) {
  // Train-mode batch norm needs two samples, so [a, b] is compared with [a, b, a, b].
  ResNet3d<double> model(tiny_config(4));
  Rng rng(7);
  model.init(rng);
  auto a = random_tensor<float>({6, 6, 4}, rng, 0.0, 1.0), b = random_tensor<float>({6, 6, 4}, rng, 0.0, 1.0);
  const Tensor* two[] = {&a, &b};
  const Tensor* four[] = {&a, &b, &a, &b};
  std::vector<int> l2{1, 2}, l4{1, 2, 1, 2};
  auto m2 = model;
  auto m4 = model;
  m2.params().zero_grad();
  m4.params().zero_grad();
  const double loss2 = m2.loss_and_backward(stack_cubes<double>(two), l2);
  const double loss4 = m4.loss_and_backward(stack_cubes<double>(four), l4);
  EXPECT_NEAR(loss2, loss4, 1e-12);
  for (const auto& e : m2.params().entries()) {
    EXPECT_LT(max_abs_diff(e.grad, m4.params().grad(e.name)), 1e-10) << e.name;
  }
}

TEST(ResNet3d, OverfitsTwoSamplesInTwentySteps) {
  ResNet3dConfig cfg = tiny_config(4);
  cfg.widths.stem = 4;
  cfg.widths.blocks = {4, 8, 8};
  ResNet3d<float> model(cfg);
  Rng rng(8);
  model.init(rng);
  auto a = random_cube(rng), b = random_cube(rng);
  const Tensor* xs[] = {&a, &b};
  auto x = stack_cubes<float>(xs);
  std::vector<int> labels{0, 2};
  double loss = 0;
  for (int step = 0; step < 20; ++step) {
    model.params().zero_grad();
    loss = model.loss_and_backward(x, labels);
    adam_step(model.params(), 0.05);
  }
  model.params().zero_grad();
  loss = model.loss_and_backward(x, labels);
  EXPECT_LT(loss, 0.01);
}

TEST(ResNet3d, TrainBatchOfOneRejected) {
  ResNet3d<float> model(tiny_config());
  Rng rng(9);
  model.init(rng);
  auto a = random_cube(rng, {4, 4, 4});
  const Tensor* xs[] = {&a};
  std::vector<int> labels{0};
  EXPECT_THROW(model.loss_and_backward(stack_cubes<float>(xs), labels), DegenerateBatchError);
}

TEST(SpectralPatch, ValidatesShapeAndRange) {
  EXPECT_THROW(SpectralPatch::from_tensor(Tensor({32, 32, 9})), DimensionError);
  Tensor bad({32, 32, 10});
  bad[5] = 1.5f;
  EXPECT_THROW(SpectralPatch::from_tensor(bad), InputError);
  EXPECT_NO_THROW(SpectralPatch::from_tensor(Tensor({32, 32, 10}, 0.5f)));
}

TEST(ResNet3d, CastRoundTripPreservesValues) {
  ResNet3d<float> model(tiny_config());
  Rng rng(10);
  model.init(rng);
  auto back = model.cast<double>().cast<float>();
  for (const auto& e : model.params().entries()) EXPECT_EQ(e.value, back.params().value(e.name));
}
