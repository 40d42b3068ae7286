#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "df4lcz/errors.hpp"
#include "df4lcz/graph/instances.hpp"
#include "df4lcz/nn/tensor.hpp"

namespace df4lcz {

inline constexpr std::size_t kNodeFeatures = 5;

/// G = (A, X): node features [r, g, b, c_x, c_y] scaled to [0, 1] and a
/// symmetric adjacency with unit self-loops. Kept in double precision so that
/// geometric invariances can be checked tightly.
struct SceneGraph {
  Tensor64 features;   // N x 5
  Tensor64 adjacency;  // N x N

  std::size_t num_nodes() const { return features.dim(0); }
};

struct GraphOptions {
  std::size_t k = 8;
  /// Gaussian bandwidth in pixels; the median pairwise centroid distance when unset.
  std::optional<double> bandwidth;
};

inline double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Adjacency A_ij = exp(-d_ij^2 / (2 sigma^2)) when j is among the k nearest
/// neighbours of i or vice versa, 0 otherwise, A_ii = 1. Ties in distance are
/// broken by node index.
inline Tensor64 knn_gaussian_adjacency(const std::vector<std::array<double, 2>>& centroids, const GraphOptions& opt) {
  const std::size_t n = centroids.size();
  Tensor64 a({n, n});
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
  if (n < 2) return a;

  auto dist = [&](std::size_t i, std::size_t j) {
    return std::hypot(centroids[i][0] - centroids[j][0], centroids[i][1] - centroids[j][1]);
  };
  std::vector<double> d(n * n);
  std::vector<double> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d[i * n + j] = d[j * n + i] = dist(i, j);
      pairs.push_back(d[i * n + j]);
    }
  }
  double sigma = opt.bandwidth ? *opt.bandwidth : median_of(pairs);
  if (!(sigma > 0.0)) sigma = 1.0;
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) {
      return d[i * n + p] != d[i * n + q] ? d[i * n + p] < d[i * n + q] : p < q;
    });
    const std::size_t kk = std::min(opt.k, order.size());
    for (std::size_t m = 0; m < kk; ++m) {
      const std::size_t j = order[m];
      const double w = std::exp(-d[i * n + j] * d[i * n + j] * inv_two_sigma2);
      a(i, j) = std::max(a(i, j), w);
      a(j, i) = std::max(a(j, i), w);
    }
  }
  return a;
}

/// Instance graph of one patch. An empty instance set becomes one node with
/// the whole-patch mean colour at the patch centre.
inline SceneGraph build_graph(const InstanceSet& set, const GraphOptions& opt = {}) {
  const double frame = static_cast<double>(set.frame);
  std::vector<std::array<double, 2>> centroids;
  std::vector<std::array<double, 3>> colors;
  if (set.instances.empty()) {
    centroids.push_back({frame / 2.0, frame / 2.0});
    colors.push_back(set.patch_mean_rgb);
  } else {
    for (const auto& in : set.instances) {
      centroids.push_back(in.centroid);
      colors.push_back(in.mean_rgb);
    }
  }
  const std::size_t n = centroids.size();
  SceneGraph g;
  g.features = Tensor64({n, kNodeFeatures});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) g.features(i, c) = colors[i][c] / 255.0;
    g.features(i, 3) = centroids[i][0] / frame;
    g.features(i, 4) = centroids[i][1] / frame;
  }
  g.adjacency = knn_gaussian_adjacency(centroids, opt);
  return g;
}

/// D^{-1/2} A D^{-1/2} with D the diagonal of row sums.
template <class T>
BasicTensor<T> normalize_adjacency(const BasicTensor<T>& a) {
  require_rank(a.shape(), 2, "adjacency");
  const std::size_t n = a.dim(0);
  if (a.dim(1) != n) throw DimensionError("adjacency must be square, got " + shape_str(a.shape()));
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += a(i, j);
    if (!(s > 0.0)) throw SingularDegreeError("adjacency row " + std::to_string(i) + " has zero degree");
    inv_sqrt[i] = 1.0 / std::sqrt(s);
  }
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out(i, j) = static_cast<T>(a(i, j) * (inv_sqrt[i] * inv_sqrt[j]));
  }
  return out;
}

}  // namespace df4lcz
