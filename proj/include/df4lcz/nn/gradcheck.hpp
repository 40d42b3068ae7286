#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "df4lcz/nn/params.hpp"
#include "df4lcz/nn/rng.hpp"

namespace df4lcz {

/// Result of one finite-difference probe. `signature` identifies the active
/// set of piecewise-linear units (0 for smooth functions); a probe whose
/// signature differs from the base point straddled a kink and is skipped.
struct LossEval {
  double loss = 0.0;
  std::uint64_t signature = 0;
};

struct GradCheckReport {
  std::string name;
  double max_rel_error = 0.0;
  std::string worst_entry;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Relative errors use max(|analytic|, |numeric|, floor) as denominator.
  double denominator_floor = 1e-6;
  /// 0 checks every coordinate; otherwise at most this many random ones per entry.
  std::size_t max_coords_per_entry = 0;
};

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares analytic gradients against central differences.
///
/// `fn(params, want_grad)` must return the scalar loss at the current
/// parameter values and, when `want_grad` is set, overwrite every grad in
/// `params` with the analytic gradient.
template <class Fn>
GradCheckReport gradcheck(const std::string& name, ParamStore<double>& params, Fn&& fn, Rng& probe,
                          const GradCheckOptions& opt = {}) {
  GradCheckReport report;
  report.name = name;

  params.zero_grad();
  const LossEval base = fn(params, true);
  std::vector<BasicTensor<double>> analytic;
  for (const auto& e : params.entries()) analytic.push_back(e.grad);

  for (std::size_t k = 0; k < params.entries().size(); ++k) {
    auto& entry = params.entries()[k];
    std::vector<std::size_t> coords(entry.value.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (opt.max_coords_per_entry && coords.size() > opt.max_coords_per_entry) {
      probe.shuffle(coords);
      coords.resize(opt.max_coords_per_entry);
    }
    for (std::size_t i : coords) {
      const double saved = entry.value[i];
      entry.value[i] = saved + opt.step;
      const LossEval plus = fn(params, false);
      entry.value[i] = saved - opt.step;
      const LossEval minus = fn(params, false);
      entry.value[i] = saved;
      if (plus.signature != base.signature || minus.signature != base.signature) {
        ++report.skipped_kinks;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * opt.step);
      const double err = relative_error(analytic[k][i], numeric, opt.denominator_floor);
      ++report.checked;
      if (report.worst_entry.empty() || err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_entry = entry.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace df4lcz
