#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "df4lcz/nn/gradcheck.hpp"
#include "df4lcz/nn/layers.hpp"
#include "df4lcz/nn/params.hpp"
#include "df4lcz/nn/rng.hpp"
#include "df4lcz/nn/tensor.hpp"

using namespace df4lcz;

namespace {

Tensor64 random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor64 t(std::move(s));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<float>(5)), DimensionError);
  EXPECT_THROW(Tensor({2, 0}), DimensionError);
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  t(1, 2) = 4.0f;
  EXPECT_EQ(t[5], 4.0f);
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
  }
}

TEST(Rng, FrozenFirstDraws) {
  // Guards the counter-based construction against accidental changes; any
  // edit here breaks dataset and checkpoint reproducibility.
  Rng r(7);
  const std::uint64_t first = r.next_u64();
  Rng again(7);
  EXPECT_EQ(first, again.next_u64());
  EXPECT_NE(Rng::subseed(7, "split"), Rng::subseed(7, "synth"));
  EXPECT_EQ(Rng::subseed(7, "split"), Rng::subseed(7, "split"));
}

TEST(Rng, UniformIntInRangeAndNormalMoments) {
  Rng r(1);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    EXPECT_LT(r.uniform_int(7), 7u);
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.03);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Dense, IdentityCase) {
  auto x = Tensor::from_rows({{1, 0}});
  auto w = Tensor::from_rows({{1, 0}, {0, 1}});
  auto y = dense_forward(x, w, Tensor::vector({0, 0}));
  EXPECT_EQ(y, Tensor::from_rows({{1, 0}}));
}

TEST(Dense, HandEvaluation) {
  auto y = dense_forward(Tensor::from_rows({{1, 2}}), Tensor::from_rows({{1}, {1}}), Tensor::vector({3}));
  ASSERT_EQ(y.shape(), (Shape{1, 1}));
  EXPECT_FLOAT_EQ(y[0], 6.0f);
}

TEST(Dense, ShapeMismatchNamesOperands) {
  Tensor x({1, 3});
  Tensor w({2, 2});
  try {
    dense_forward(x, w, Tensor({2}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("input x"), std::string::npos);
    EXPECT_NE(msg.find("weight W"), std::string::npos);
  }
}

TEST(Softmax, Symmetry) {
  auto p = softmax(Tensor::from_rows({{0, 0, 0}}));
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(p(0, c), 1.0 / 3.0, 1e-7);
}

TEST(Softmax, LargeLogitsStable) {
  auto p = softmax(Tensor::from_rows({{1000, 0}}));
  EXPECT_TRUE(p.all_finite());
  EXPECT_NEAR(p(0, 0), 1.0, 1e-7);
  EXPECT_NEAR(p(0, 1), 0.0, 1e-7);
}

TEST(Softmax, ClosedForm) {
  auto p = softmax(Tensor64::from_rows({{std::log(2.0), 0.0}}));
  EXPECT_NEAR(p(0, 0), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(p(0, 1), 1.0 / 3.0, 1e-12);
}

TEST(Softmax, RowsSumToOneProperty) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = 1 + rng.uniform_int(5), cols = 1 + rng.uniform_int(20);
    Tensor t({rows, cols});
    const double scale = trial % 2 ? 1e3 : 10.0;
    for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-scale, scale));
    auto p = softmax(t);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < cols; ++c) {
        EXPECT_GE(p(r, c), 0.0f);
        s += p(r, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(CrossEntropy, OneHotIsZero) {
  auto p = Tensor::from_rows({{0, 1, 0}});
  const int labels[] = {1};
  EXPECT_DOUBLE_EQ(cross_entropy(p, std::span<const int>(labels)), 0.0);
}

TEST(CrossEntropy, UniformSeventeenIsLn17) {
  Tensor64 p({1, 17}, 1.0 / 17.0);
  const int labels[] = {4};
  EXPECT_NEAR(cross_entropy(p, std::span<const int>(labels)), 2.833213344056216, 1e-12);
}

TEST(CrossEntropy, ClampedAtZeroProbability) {
  auto p = Tensor::from_rows({{1, 0}});
  const int labels[] = {1};
  const double loss = cross_entropy(p, std::span<const int>(labels));
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_LE(loss, -std::log(1e-12) + 1e-9);
}

TEST(CrossEntropy, LabelOutOfRange) {
  auto p = Tensor::from_rows({{0.5, 0.5}});
  const int labels[] = {2};
  EXPECT_THROW(cross_entropy(p, std::span<const int>(labels)), IndexError);
}

TEST(BatchNorm, TrainStandardises) {
  Rng rng(5);
  Tensor64 x({64, 3});
  for (std::size_t r = 0; r < 64; ++r) {
    for (std::size_t c = 0; c < 3; ++c) x(r, c) = 5.0 * c + (1.0 + c) * rng.normal();
  }
  Tensor64 gamma({3}, 1.0), beta({3}), rm({3}), rv({3}, 1.0);
  auto y = batchnorm_forward(x, gamma, beta, rm, rv, Mode::train);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0, v = 0;
    for (std::size_t r = 0; r < 64; ++r) m += y(r, c);
    m /= 64;
    for (std::size_t r = 0; r < 64; ++r) v += (y(r, c) - m) * (y(r, c) - m);
    v /= 64;
    EXPECT_NEAR(m, 0.0, 1e-9);
    EXPECT_NEAR(v, 1.0, 1e-3);
  }
  // running stats moved toward the batch statistics with momentum 0.9
  EXPECT_GT(rm[2], 0.5);
  EXPECT_LT(rm[2], 1.5);
}

TEST(BatchNorm, InferWithUnitStatsIsIdentity) {
  Tensor x = Tensor::from_rows({{1, -2}, {3, 0.5f}});
  Tensor gamma({2}, 1.0f), beta({2}), rm({2}), rv({2}, 1.0f);
  auto y = batchnorm_forward(x, gamma, beta, rm, rv, Mode::infer);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-4);
}

TEST(BatchNorm, AffineOnStandardisedInput) {
  Tensor64 x({4, 1}, std::vector<double>{-1, -1, 1, 1});  // mean 0, var 1
  Tensor64 gamma({1}, 2.0), beta({1}, 3.0), rm({1}), rv({1}, 1.0);
  auto y = batchnorm_forward(x, gamma, beta, rm, rv, Mode::train);
  double m = 0, v = 0;
  for (double e : y.data()) m += e;
  m /= 4;
  for (double e : y.data()) v += (e - m) * (e - m);
  EXPECT_NEAR(m, 3.0, 1e-9);
  EXPECT_NEAR(std::sqrt(v / 4), 2.0, 1e-4);
}

TEST(BatchNorm, TrainBatchOfOneIsDegenerate) {
  Tensor x({1, 2});
  Tensor gamma({2}, 1.0f), beta({2}), rm({2}), rv({2}, 1.0f);
  EXPECT_THROW(batchnorm_forward(x, gamma, beta, rm, rv, Mode::train), DegenerateBatchError);
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  ParamStore<float> p;
  p.add("w", Tensor::from_rows({{1.5f, -2.0f}}));
  p.zero_grad();
  for (int i = 0; i < 5; ++i) adam_step(p, 0.002);
  EXPECT_EQ(p.value("w"), Tensor::from_rows({{1.5f, -2.0f}}));
  EXPECT_EQ(p.entry("w").adam_m, Tensor({1, 2}));
  EXPECT_EQ(p.entry("w").adam_v, Tensor({1, 2}));
  EXPECT_EQ(p.entry("w").step_count, 5u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore<double> p;
  p.add("w", Tensor64::vector({0.0}));
  p.grad("w")[0] = 1.0;
  adam_step(p, 0.002);
  // m_hat = 1, v_hat = 1 after bias correction
  EXPECT_NEAR(p.value("w")[0], -0.002 / (1.0 + 1e-7), 1e-15);
  EXPECT_EQ(p.grad("w")[0], 1.0);  // grads untouched
}

TEST(Adam, DeterministicTrajectory) {
  auto run = [] {
    ParamStore<float> p;
    p.add("w", Tensor::from_rows({{0.3f, -0.7f, 1.1f}}));
    for (int i = 0; i < 50; ++i) {
      for (std::size_t k = 0; k < 3; ++k) p.grad("w")[k] = p.value("w")[k] * 2.0f - 0.1f;
      adam_step(p, 0.002);
    }
    return p.value("w");
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, MissingGradIsConsistencyError) {
  ParamStore<float> p;
  p.add("w", Tensor({2}));
  p.grad("w") = Tensor();
  EXPECT_THROW(adam_step(p, 0.01), ConsistencyError);
}

TEST(ParamStore, DuplicateNamesRejected) {
  ParamStore<float> p;
  p.add("w", Tensor({2}));
  EXPECT_THROW(p.add("w", Tensor({2})), ConsistencyError);
}

// ---------------------------------------------------------------------------
// Finite-difference checks

namespace {

GradCheckReport check_dense(Rng& rng, bool corrupt) {
  const std::size_t batch = 1 + rng.uniform_int(4), fin = 1 + rng.uniform_int(5), fout = 1 + rng.uniform_int(5);
  ParamStore<double> p;
  p.add("x", random_tensor({batch, fin}, rng));
  p.add("W", random_tensor({fin, fout}, rng));
  p.add("b", random_tensor({fout}, rng));
  const auto proj = random_tensor({batch, fout}, rng);
  auto fn = [&](ParamStore<double>& s, bool want) {
    auto y = dense_forward(s.value("x"), s.value("W"), s.value("b"));
    double loss = 0;
    for (std::size_t i = 0; i < y.size(); ++i) loss += y[i] * proj[i];
    if (want) {
      s.zero_grad();
      s.grad("x") = dense_backward(s.value("x"), s.value("W"), proj, s.grad("W"), s.grad("b"));
      if (corrupt) {
        for (auto& g : s.grad("W").data()) g *= 2.0;
      }
    }
    return LossEval{loss, 0};
  };
  return gradcheck("dense", p, fn, rng);
}

}  // namespace

TEST(GradCheck, DenseLayer) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    auto r = check_dense(rng, false);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_entry;
    EXPECT_GT(r.checked, 0u);
  }
}

TEST(GradCheck, SoftmaxCrossEntropyComposite) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    const std::size_t batch = 1 + rng.uniform_int(4), classes = 2 + rng.uniform_int(6);
    ParamStore<double> p;
    p.add("logits", random_tensor({batch, classes}, rng, -3, 3));
    std::vector<int> labels(batch);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(classes));
    auto fn = [&](ParamStore<double>& s, bool want) {
      auto probs = softmax(s.value("logits"));
      const double loss = cross_entropy(probs, labels);
      if (want) s.grad("logits") = softmax_cross_entropy_backward(probs, labels);
      return LossEval{loss, 0};
    };
    auto r = gradcheck("softmax_ce", p, fn, rng);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_entry;
  }
}

TEST(GradCheck, BatchNormTrainMode) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(200 + seed);
    const std::size_t batch = 2 + rng.uniform_int(5), channels = 1 + rng.uniform_int(4);
    ParamStore<double> p;
    p.add("x", random_tensor({batch, 3, channels}, rng, -2, 2));
    p.add("gamma", random_tensor({channels}, rng, 0.5, 1.5));
    p.add("beta", random_tensor({channels}, rng));
    const auto proj = random_tensor({batch, 3, channels}, rng);
    auto fn = [&](ParamStore<double>& s, bool want) {
      Tensor64 rm({channels}), rv({channels}, 1.0);
      BatchNormCache<double> cache;
      auto y = batchnorm_forward(s.value("x"), s.value("gamma"), s.value("beta"), rm, rv, Mode::train, &cache);
      double loss = 0;
      for (std::size_t i = 0; i < y.size(); ++i) loss += y[i] * proj[i];
      if (want) {
        s.zero_grad();
        s.grad("x") = batchnorm_backward(cache, s.value("gamma"), proj, s.grad("gamma"), s.grad("beta"));
      }
      return LossEval{loss, 0};
    };
    auto r = gradcheck("batchnorm", p, fn, rng);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_entry;
  }
}

TEST(GradCheck, DetectsCorruptedGradient) {
  Rng rng(9);
  auto r = check_dense(rng, true);
  EXPECT_GT(r.max_rel_error, 1e-1);
}
