#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "df4lcz/errors.hpp"
#include "df4lcz/fusion/fuse.hpp"
#include "df4lcz/fusion/metrics.hpp"

namespace df4lcz {

/// {0, step, 2 step, ...} below 1, then 1 itself.
inline std::vector<double> alpha_grid(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw DomainError("alpha step " + std::to_string(step) + " outside (0,1]");
  std::vector<double> grid;
  for (std::size_t i = 0;; ++i) {
    const double a = static_cast<double>(i) * step;
    if (a >= 1.0 - 1e-9) break;
    grid.push_back(a);
  }
  grid.push_back(1.0);
  return grid;
}

/// Confusion matrix of argmax(weighted_fuse(c_g, c_s, alpha)) against labels.
inline ConfusionMatrix fused_confusion(std::span<const ProbVector> c_g, std::span<const ProbVector> c_s,
                                       std::span<const int> labels, double alpha, std::size_t classes) {
  if (c_g.size() != c_s.size() || c_g.size() != labels.size()) {
    throw InputError("fusion: " + std::to_string(c_g.size()) + " graph outputs, " + std::to_string(c_s.size()) +
                     " spectral outputs, " + std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) cm.add(labels[i], classify(weighted_fuse(c_g[i], c_s[i], alpha)));
  return cm;
}

struct SweepRow {
  double alpha = 0.0;
  MetricReport metrics;
};

inline std::vector<SweepRow> sweep_alpha(std::span<const ProbVector> c_g, std::span<const ProbVector> c_s,
                                         std::span<const int> labels, double step, std::size_t classes = 17,
                                         F1Average avg = F1Average::unweighted) {
  std::vector<SweepRow> rows;
  for (double a : alpha_grid(step)) rows.push_back({a, metrics(fused_confusion(c_g, c_s, labels, a, classes), avg)});
  return rows;
}

}  // namespace df4lcz
