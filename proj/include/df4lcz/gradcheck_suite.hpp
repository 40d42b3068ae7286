#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "df4lcz/graph/gcn.hpp"
#include "df4lcz/nn/gradcheck.hpp"
#include "df4lcz/nn/layers.hpp"
#include "df4lcz/spectral/conv3d.hpp"
#include "df4lcz/spectral/resnet3d.hpp"

namespace df4lcz {

/// Finite-difference checks of every differentiable op at 64-bit, each on
/// randomly drawn small shapes.
namespace gradsuite {

inline Tensor64 random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor64 t(std::move(s));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

/// sum(proj * y); the projection is drawn once per check.
inline double project(const Tensor64& y, const Tensor64& proj) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * proj[i];
  return s;
}

inline GradCheckReport dense(Rng& rng) {
  const std::size_t batch = 1 + rng.uniform_int(4), fin = 1 + rng.uniform_int(6), fout = 1 + rng.uniform_int(6);
  ParamStore<double> p;
  p.add("x", random_tensor({batch, fin}, rng));
  p.add("w", random_tensor({fin, fout}, rng));
  p.add("b", random_tensor({fout}, rng));
  const auto proj = random_tensor({batch, fout}, rng);
  auto fn = [&](ParamStore<double>& s, bool want) {
    auto y = dense_forward(s.value("x"), s.value("w"), s.value("b"));
    if (want) {
      s.zero_grad();
      s.grad("x") = dense_backward(s.value("x"), s.value("w"), proj, s.grad("w"), s.grad("b"));
    }
    return LossEval{project(y, proj), 0};
  };
  return gradcheck("dense", p, fn, rng);
}

inline GradCheckReport softmax_ce(Rng& rng) {
  const std::size_t batch = 1 + rng.uniform_int(4), classes = 2 + rng.uniform_int(16);
  ParamStore<double> p;
  p.add("logits", random_tensor({batch, classes}, rng, -3.0, 3.0));
  std::vector<int> labels(batch);
  for (auto& l : labels) l = static_cast<int>(rng.uniform_int(classes));
  auto fn = [&](ParamStore<double>& s, bool want) {
    auto probs = softmax(s.value("logits"));
    const double loss = cross_entropy(probs, labels);
    if (want) s.grad("logits") = softmax_cross_entropy_backward(probs, labels);
    return LossEval{loss, 0};
  };
  return gradcheck("softmax_ce", p, fn, rng);
}

inline GradCheckReport batchnorm(Rng& rng) {
  const std::size_t batch = 2 + rng.uniform_int(5), inner = 1 + rng.uniform_int(3), channels = 1 + rng.uniform_int(4);
  ParamStore<double> p;
  p.add("x", random_tensor({batch, inner, channels}, rng, -2.0, 2.0));
  p.add("gamma", random_tensor({channels}, rng, 0.5, 1.5));
  p.add("beta", random_tensor({channels}, rng));
  const auto proj = random_tensor({batch, inner, channels}, rng);
  auto fn = [&](ParamStore<double>& s, bool want) {
    Tensor64 rm({channels}), rv({channels}, 1.0);
    BatchNormCache<double> cache;
    auto y = batchnorm_forward(s.value("x"), s.value("gamma"), s.value("beta"), rm, rv, Mode::train, &cache);
    if (want) {
      s.zero_grad();
      s.grad("x") = batchnorm_backward(cache, s.value("gamma"), proj, s.grad("gamma"), s.grad("beta"));
    }
    return LossEval{project(y, proj), 0};
  };
  return gradcheck("batchnorm", p, fn, rng);
}

inline GradCheckReport conv3d(Rng& rng) {
  const std::size_t batch = 1 + rng.uniform_int(2), cin = 1 + rng.uniform_int(2), cout = 1 + rng.uniform_int(3);
  const std::size_t k = 1 + rng.uniform_int(3), stride = 1 + rng.uniform_int(2), pad = rng.uniform_int(2);
  Shape xs{batch, 0, 0, 0, cin};
  for (int a = 1; a <= 3; ++a) xs[a] = std::max<std::size_t>(k, 2 + rng.uniform_int(3));
  const Conv3dGeometry g{{stride, stride, stride}, {pad, pad, pad}};
  ParamStore<double> p;
  p.add("x", random_tensor(xs, rng));
  p.add("kernel", random_tensor({k, k, k, cin, cout}, rng));
  p.add("bias", random_tensor({cout}, rng));
  const auto probe = conv3d_forward(p.value("x"), p.value("kernel"), p.value("bias"), g);
  const auto proj = random_tensor(probe.shape(), rng);
  auto fn = [&](ParamStore<double>& s, bool want) {
    auto y = conv3d_forward(s.value("x"), s.value("kernel"), s.value("bias"), g);
    if (want) {
      s.zero_grad();
      conv3d_backward(s.value("x"), s.value("kernel"), g, proj, &s.grad("x"), s.grad("kernel"), s.grad("bias"));
    }
    return LossEval{project(y, proj), 0};
  };
  return gradcheck("conv3d", p, fn, rng);
}

inline GradCheckReport gcsconv(Rng& rng) {
  const std::size_t n = 2 + rng.uniform_int(5), fin = 1 + rng.uniform_int(5), fout = 1 + rng.uniform_int(5);
  Tensor64 a({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = rng.uniform() < 0.6 ? rng.uniform() : 0.0;
  }
  GraphBatch<double> batch;
  batch.features = random_tensor({n, fin}, rng);
  batch.blocks.push_back(normalize_adjacency(a));
  batch.offsets = {0, n};
  batch.segment.assign(n, 0);
  const GcsConvSpec spec{"gcs", fin, fout};
  ParamStore<double> p;
  p.add("h", batch.features);
  spec.register_params(p);
  spec.init(p, rng);
  p.value("gcs.b") = random_tensor({fout}, rng, -0.5, 0.5);
  const auto proj = random_tensor({n, fout}, rng);
  auto fn = [&](ParamStore<double>& s, bool want) {
    GcsConvCache<double> cache;
    auto y = spec.forward(s, batch, s.value("h"), &cache);
    if (want) {
      s.zero_grad();
      s.grad("h") = spec.backward(s, batch, cache, proj);
    }
    return LossEval{project(y, proj), activation_signature(y)};
  };
  return gradcheck("gcsconv", p, fn, rng);
}

inline GradCheckReport residual_block(Rng& rng) {
  const std::size_t cin = 2, cout = 2 + rng.uniform_int(2), stride = 1 + rng.uniform_int(2);
  const auto spec = ResidualBlockSpec::make("blk", cin, cout, stride);
  ParamStore<double> p;
  BufferStore<double> buf;
  p.add("x", random_tensor({2, 4, 4, 3, cin}, rng));
  spec.register_params(p, buf);
  spec.init(p, rng);
  for (auto& e : p.entries()) {
    if (e.name.ends_with(".gamma")) e.value = random_tensor(e.value.shape(), rng, 0.5, 1.5);
    if (e.name.ends_with(".beta") || e.name.ends_with(".bias")) e.value = random_tensor(e.value.shape(), rng, -0.5, 0.5);
  }
  auto probe = spec.forward(p, buf, p.value("x"), Mode::train, nullptr);
  // Scaled so that loss round-off stays far below the smallest true gradients.
  auto proj = random_tensor(probe.shape(), rng);
  for (auto& v : proj.data()) v /= static_cast<double>(proj.size());
  auto fn = [&](ParamStore<double>& s, bool want) {
    ResidualBlockCache<double> cache;
    auto y = spec.forward(s, buf, s.value("x"), Mode::train, &cache);
    if (want) {
      s.zero_grad();
      s.grad("x") = spec.backward(s, cache, proj, true);
    }
    return LossEval{project(y, proj), activation_signature(y, activation_signature(cache.a_act))};
  };
  return gradcheck("residual_block", p, fn, rng);
}

struct SuiteEntry {
  std::string name;
  GradCheckReport (*run)(Rng&);
};

inline const std::vector<SuiteEntry>& entries() {
  static const std::vector<SuiteEntry> all{{"dense", dense},         {"softmax_ce", softmax_ce},
                                           {"batchnorm", batchnorm}, {"conv3d", conv3d},
                                           {"gcsconv", gcsconv},     {"residual_block", residual_block}};
  return all;
}

}  // namespace gradsuite

/// Runs every op over `seeds` seeds and keeps the worst report per op.
inline std::vector<GradCheckReport> run_gradcheck_suite(std::size_t seeds = 10, std::uint64_t base_seed = 0) {
  std::vector<GradCheckReport> out;
  for (const auto& e : gradsuite::entries()) {
    GradCheckReport worst;
    worst.name = e.name;
    for (std::size_t s = 0; s < seeds; ++s) {
      Rng rng(Rng::subseed(base_seed, e.name, s));
      auto r = e.run(rng);
      worst.checked += r.checked;
      worst.skipped_kinks += r.skipped_kinks;
      if (worst.worst_entry.empty() || r.max_rel_error > worst.max_rel_error) {
        worst.max_rel_error = r.max_rel_error;
        worst.worst_entry = r.worst_entry + " (seed " + std::to_string(s) + ")";
      }
    }
    out.push_back(std::move(worst));
  }
  return out;
}

}  // namespace df4lcz
