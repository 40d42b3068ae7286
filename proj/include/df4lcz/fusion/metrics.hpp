#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "df4lcz/errors.hpp"

namespace df4lcz {

/// LCZ1..LCZ10 are built types; the rest are land-cover types.
inline constexpr std::size_t kBuiltClasses = 10;

inline std::string lcz_class_name(std::size_t c) {
  static const char* names[] = {"LCZ1", "LCZ2", "LCZ3", "LCZ4", "LCZ5", "LCZ6", "LCZ7", "LCZ8", "LCZ9",
                                "LCZ10", "LCZA", "LCZB", "LCZC", "LCZD", "LCZE", "LCZF", "LCZG"};
  return c < std::size(names) ? names[c] : "class" + std::to_string(c);
}

/// d x d counts, rows = true class, columns = predicted class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 17) : d_(classes), counts_(classes * classes, 0) {
    if (classes == 0) throw InputError("confusion matrix needs at least one class");
  }

  static ConfusionMatrix from_rows(const std::vector<std::vector<std::int64_t>>& rows) {
    ConfusionMatrix cm(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw InputError("confusion matrix must be square");
      for (std::size_t j = 0; j < rows.size(); ++j) {
        if (rows[i][j] < 0) throw InputError("confusion matrix counts must be nonnegative");
        cm.counts_[i * cm.d_ + j] = rows[i][j];
      }
    }
    return cm;
  }

  std::size_t classes() const noexcept { return d_; }
  std::int64_t at(std::size_t truth, std::size_t pred) const { return counts_.at(truth * d_ + pred); }

  void add(int truth, int pred) {
    check(truth, "true");
    check(pred, "predicted");
    ++counts_[static_cast<std::size_t>(truth) * d_ + static_cast<std::size_t>(pred)];
  }

  void merge(const ConfusionMatrix& other) {
    if (other.d_ != d_) throw InputError("cannot merge confusion matrices of different sizes");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  }

  std::int64_t total() const {
    std::int64_t n = 0;
    for (auto c : counts_) n += c;
    return n;
  }
  std::int64_t row_sum(std::size_t c) const {
    std::int64_t s = 0;
    for (std::size_t j = 0; j < d_; ++j) s += counts_[c * d_ + j];
    return s;
  }
  std::int64_t col_sum(std::size_t c) const {
    std::int64_t s = 0;
    for (std::size_t i = 0; i < d_; ++i) s += counts_[i * d_ + c];
    return s;
  }

  std::vector<std::vector<std::int64_t>> rows() const {
    std::vector<std::vector<std::int64_t>> out(d_, std::vector<std::int64_t>(d_));
    for (std::size_t i = 0; i < d_; ++i)
      for (std::size_t j = 0; j < d_; ++j) out[i][j] = counts_[i * d_ + j];
    return out;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  void check(int c, const char* what) const {
    if (c < 0 || static_cast<std::size_t>(c) >= d_) {
      throw InputError(std::string(what) + " class " + std::to_string(c) + " outside [0," + std::to_string(d_) + ")");
    }
  }

  std::size_t d_;
  std::vector<std::int64_t> counts_;
};

inline ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, std::size_t classes = 17) {
  if (preds.size() != labels.size()) {
    throw InputError("confusion: " + std::to_string(preds.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < preds.size(); ++i) cm.add(labels[i], preds[i]);
  return cm;
}

enum class F1Average { unweighted, support_weighted };

struct ClassMetrics {
  std::int64_t support = 0;     // true samples
  std::int64_t predicted = 0;   // samples predicted as this class
  std::optional<double> precision, recall, f1;
};

struct MetricReport {
  std::int64_t n = 0;
  double oa = 0.0;
  std::optional<double> oa_bu, oa_n;
  double kappa = 0.0;
  std::vector<ClassMetrics> per_class;
  double avg_f1 = 0.0;
  F1Average f1_average = F1Average::unweighted;
};

/// OA, OA_BU, OA_N, Cohen's kappa, per-class precision/recall/F1 and the
/// mean F1. Precision and recall with a zero denominator are undefined; F1 is
/// undefined only for a class that neither occurs nor is predicted, and such
/// classes are left out of the mean.
inline MetricReport metrics(const ConfusionMatrix& cm, F1Average avg = F1Average::unweighted) {
  const std::size_t d = cm.classes();
  const std::int64_t n = cm.total();
  if (n <= 0) throw InputError("metrics: confusion matrix is empty");
  MetricReport r;
  r.n = n;
  r.f1_average = avg;

  std::int64_t diag = 0, chance = 0;
  std::int64_t bu_n = 0, bu_tp = 0, nat_n = 0, nat_tp = 0;
  const std::size_t built = std::min(kBuiltClasses, d);
  for (std::size_t c = 0; c < d; ++c) {
    ClassMetrics m;
    const std::int64_t tp = cm.at(c, c);
    m.support = cm.row_sum(c);
    m.predicted = cm.col_sum(c);
    diag += tp;
    chance += m.support * m.predicted;
    if (c < built) {
      bu_n += m.support;
      bu_tp += tp;
    } else {
      nat_n += m.support;
      nat_tp += tp;
    }
    if (m.predicted > 0) m.precision = static_cast<double>(tp) / static_cast<double>(m.predicted);
    if (m.support > 0) m.recall = static_cast<double>(tp) / static_cast<double>(m.support);
    if (m.support + m.predicted > 0) m.f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(m.support + m.predicted);
    r.per_class.push_back(m);
  }
  r.oa = static_cast<double>(diag) / static_cast<double>(n);
  if (bu_n > 0) r.oa_bu = static_cast<double>(bu_tp) / static_cast<double>(bu_n);
  if (nat_n > 0) r.oa_n = static_cast<double>(nat_tp) / static_cast<double>(nat_n);

  // kappa = (P_o - P_e) / (1 - P_e), scaled by N^2 so that both terms are integers.
  const std::int64_t num = n * diag - chance;
  const std::int64_t den = n * n - chance;
  if (den == 0) {
    r.kappa = diag == n ? 1.0 : 0.0;
  } else {
    r.kappa = static_cast<double>(num) / static_cast<double>(den);
  }

  double sum = 0.0, weight = 0.0;
  for (const auto& m : r.per_class) {
    if (!m.f1) continue;
    const double w = avg == F1Average::unweighted ? 1.0 : static_cast<double>(m.support);
    sum += w * *m.f1;
    weight += w;
  }
  r.avg_f1 = weight > 0 ? sum / weight : 0.0;
  return r;
}

}  // namespace df4lcz
