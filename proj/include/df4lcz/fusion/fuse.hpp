#pragma once

#include <string>
#include <vector>

#include "df4lcz/errors.hpp"
#include "df4lcz/fusion/prob_vector.hpp"

namespace df4lcz {

/// f = alpha * c_g + (1 - alpha) * c_s.
inline ProbVector weighted_fuse(const ProbVector& c_g, const ProbVector& c_s, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw DomainError("fusion weight alpha=" + std::to_string(alpha) + " outside [0,1]");
  }
  if (c_g.size() != c_s.size()) {
    throw DimensionError("fusion: stream outputs have " + std::to_string(c_g.size()) + " and " +
                         std::to_string(c_s.size()) + " classes");
  }
  const double beta = 1.0 - alpha;
  std::vector<double> f(c_g.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = alpha * c_g[i] + beta * c_s[i];
  return ProbVector(std::move(f));
}

/// Argmax; the lowest index wins ties.
inline int classify(const ProbVector& p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return static_cast<int>(best);
}

}  // namespace df4lcz
