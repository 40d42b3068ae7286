#pragma once

#include <array>
#include <string>

#include "df4lcz/errors.hpp"
#include "df4lcz/graph/scene_graph.hpp"
#include "df4lcz/nn/tensor.hpp"
#include "df4lcz/spectral/resnet3d.hpp"

namespace df4lcz {

/// The eight symmetries of the square, acting on patch coordinates (x, y) in
/// [0, 1] with x along columns and y along rows.
enum class D4 : int {
  identity = 0,
  rot90 = 1,
  rot180 = 2,
  rot270 = 3,
  hflip = 4,
  vflip = 5,
  transpose = 6,
  antitranspose = 7,
};

inline constexpr int kD4Size = 8;

inline D4 d4_from_int(int op) {
  if (op < 0 || op >= kD4Size) throw DomainError("unknown dihedral transform " + std::to_string(op));
  return static_cast<D4>(op);
}

inline const char* d4_name(D4 op) {
  static constexpr const char* names[] = {"identity", "rot90",  "rot180",    "rot270",
                                          "hflip",    "vflip", "transpose", "antitranspose"};
  return names[static_cast<int>(op)];
}

/// Image of (x, y) on a square of side `n`.
template <class V>
std::array<V, 2> d4_map(D4 op, V x, V y, V n) {
  switch (op) {
    case D4::identity: return {x, y};
    case D4::rot90: return {y, n - x};
    case D4::rot180: return {n - x, n - y};
    case D4::rot270: return {n - y, x};
    case D4::hflip: return {n - x, y};
    case D4::vflip: return {x, n - y};
    case D4::transpose: return {y, x};
    case D4::antitranspose: return {n - y, n - x};
  }
  throw DomainError("unknown dihedral transform");
}

/// The op equal to applying `first` and then `second`.
inline D4 d4_compose(D4 first, D4 second) {
  auto probe = [](D4 op) {
    const auto a = d4_map(op, 1, 0, 3);
    const auto b = d4_map(op, 0, 2, 3);
    return std::array<int, 4>{a[0], a[1], b[0], b[1]};
  };
  const auto a1 = d4_map(first, 1, 0, 3), b1 = d4_map(first, 0, 2, 3);
  const auto a2 = d4_map(second, a1[0], a1[1], 3), b2 = d4_map(second, b1[0], b1[1], 3);
  const std::array<int, 4> want{a2[0], a2[1], b2[0], b2[1]};
  for (int k = 0; k < kD4Size; ++k) {
    if (probe(static_cast<D4>(k)) == want) return static_cast<D4>(k);
  }
  throw ConsistencyError("dihedral composition not closed");
}

inline D4 d4_inverse(D4 op) {
  for (int k = 0; k < kD4Size; ++k) {
    if (d4_compose(op, static_cast<D4>(k)) == D4::identity) return static_cast<D4>(k);
  }
  throw ConsistencyError("dihedral inverse missing");
}

/// Transform the two leading (row, col) axes of an [S, S, ...] tensor.
template <class T>
BasicTensor<T> d4_apply(const BasicTensor<T>& t, D4 op) {
  if (t.rank() < 2 || t.dim(0) != t.dim(1)) throw DimensionError("d4_apply needs a square [S,S,...] tensor, got " + shape_str(t.shape()));
  const long n = static_cast<long>(t.dim(0)) - 1;
  const std::size_t inner = t.size() / (t.dim(0) * t.dim(1));
  BasicTensor<T> out(t.shape());
  for (long r = 0; r <= n; ++r) {
    for (long c = 0; c <= n; ++c) {
      const auto [x, y] = d4_map<long>(op, c, r, n);
      const T* src = t.raw() + (static_cast<std::size_t>(r) * t.dim(1) + c) * inner;
      T* dst = out.raw() + (static_cast<std::size_t>(y) * t.dim(1) + x) * inner;
      std::copy(src, src + inner, dst);
    }
  }
  return out;
}

/// Move node centroids (feature columns 3 and 4, normalized to [0, 1]) by the
/// same isometry. Colours and adjacency are untouched.
inline SceneGraph d4_apply(const SceneGraph& g, D4 op) {
  SceneGraph out = g;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    const auto [x, y] = d4_map<double>(op, g.features(i, 3), g.features(i, 4), 1.0);
    out.features(i, 3) = x;
    out.features(i, 4) = y;
  }
  return out;
}

struct AugmentedPair {
  SpectralPatch cube;
  SceneGraph graph;
};

inline AugmentedPair augment(const SpectralPatch& cube, const SceneGraph& graph, D4 op) {
  return {SpectralPatch{d4_apply(cube.data, op)}, d4_apply(graph, op)};
}

inline AugmentedPair augment(const SpectralPatch& cube, const SceneGraph& graph, int op) {
  return augment(cube, graph, d4_from_int(op));
}

}  // namespace df4lcz
