#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "df4lcz/errors.hpp"

namespace df4lcz {

/// Class probabilities on the simplex. Index order follows the LCZ taxonomy:
/// 0..9 = LCZ1..LCZ10 (built types), 10..16 = LCZA..LCZG (land cover).
class ProbVector {
 public:
  static constexpr double kTolerance = 1e-5;

  ProbVector() = default;

  explicit ProbVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw DimensionError("probability vector must be non-empty");
    double sum = 0.0;
    for (double v : values_) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw DomainError("probability vector entry " + std::to_string(v) + " is not a finite nonnegative value");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kTolerance) {
      throw DomainError("probability vector sums to " + std::to_string(sum) + ", not 1");
    }
  }

  template <class T>
  static ProbVector from_span(std::span<const T> p) {
    return ProbVector(std::vector<double>(p.begin(), p.end()));
  }

  static ProbVector uniform(std::size_t n) { return ProbVector(std::vector<double>(n, 1.0 / static_cast<double>(n))); }

  static ProbVector one_hot(std::size_t n, std::size_t k) {
    std::vector<double> v(n, 0.0);
    v.at(k) = 1.0;
    return ProbVector(std::move(v));
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  const std::vector<double>& values() const noexcept { return values_; }
  double sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

  friend bool operator==(const ProbVector&, const ProbVector&) = default;

 private:
  std::vector<double> values_;
};

}  // namespace df4lcz
