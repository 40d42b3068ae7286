#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "df4lcz/data/manifest.hpp"
#include "df4lcz/errors.hpp"
#include "df4lcz/nn/rng.hpp"

namespace df4lcz {

enum class SplitStrategy { sample_pool, polygon_pool };

inline SplitStrategy parse_split_strategy(const std::string& s) {
  if (s == "sample_pool") return SplitStrategy::sample_pool;
  if (s == "polygon_pool") return SplitStrategy::polygon_pool;
  throw DomainError("unknown split strategy '" + s + "' (expected sample_pool or polygon_pool)");
}

struct SplitRatios {
  double train = 0.7, val = 0.2, test = 0.1;

  void validate() const {
    if (!(train > 0 && val > 0 && test > 0)) throw DomainError("split ratios must be positive");
    if (std::abs(train + val + test - 1.0) > 1e-9) throw DomainError("split ratios must sum to 1");
  }
};

struct SplitResult {
  std::vector<SampleRecord> records;  // sorted by sample_id
  std::vector<std::string> warnings;
};

namespace detail {

/// Largest-remainder apportionment of n items to (train, val, test). Ties on
/// the remainder go to the later, smaller split.
inline std::array<std::size_t, 3> apportion(std::size_t n, const SplitRatios& r) {
  const std::array<double, 3> q{n * r.train, n * r.val, n * r.test};
  std::array<std::size_t, 3> c{};
  std::size_t used = 0;
  for (int i = 0; i < 3; ++i) {
    c[i] = static_cast<std::size_t>(std::floor(q[i] + 1e-9));
    used += c[i];
  }
  std::array<int, 3> order{2, 1, 0};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return q[a] - std::floor(q[a] + 1e-9) > q[b] - std::floor(q[b] + 1e-9); });
  for (std::size_t k = 0; used < n; ++k, ++used) ++c[order[k % 3]];
  return c;
}

inline constexpr std::array<Split, 3> kSplitOrder{Split::train, Split::val, Split::test};

}  // namespace detail

/// Assign train/val/test. sample_pool shuffles the samples of each class and
/// cuts them 7:2:1; polygon_pool cuts the polygons of each class and lets every
/// sample inherit its polygon's split.
inline SplitResult split_records(std::vector<SampleRecord> records, SplitStrategy strategy, Rng& rng,
                                 const SplitRatios& ratios = {}) {
  ratios.validate();
  sort_by_id(records);
  SplitResult res;
  if (strategy == SplitStrategy::sample_pool) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < records.size(); ++i) by_class[records[i].lcz_class].push_back(i);
    for (auto& [cls, idx] : by_class) {
      rng.shuffle(idx);
      const auto c = detail::apportion(idx.size(), ratios);
      std::size_t k = 0;
      for (int s = 0; s < 3; ++s) {
        for (std::size_t j = 0; j < c[s]; ++j) records[idx[k++]].split = detail::kSplitOrder[s];
      }
    }
  } else {
    std::map<std::string, int> poly_class;
    for (const auto& r : records) {
      auto [it, fresh] = poly_class.emplace(r.polygon_id, r.lcz_class);
      if (!fresh && it->second != r.lcz_class) {
        throw ConsistencyError("polygon " + r.polygon_id + " carries samples of two classes");
      }
    }
    std::map<int, std::vector<std::string>> by_class;
    for (const auto& [pid, cls] : poly_class) by_class[cls].push_back(pid);
    std::map<std::string, Split> assign;
    for (auto& [cls, pids] : by_class) {
      rng.shuffle(pids);
      if (pids.size() < 3) {
        res.warnings.push_back("class " + std::to_string(cls) + " has " + std::to_string(pids.size()) +
                               " polygon(s); assigned in priority train, test, val");
        constexpr std::array<Split, 2> prio{Split::train, Split::test};
        for (std::size_t i = 0; i < pids.size(); ++i) assign[pids[i]] = prio[i];
        continue;
      }
      auto c = detail::apportion(pids.size(), ratios);
      for (int s = 0; s < 3; ++s) {
        if (c[s] == 0) {
          --*std::max_element(c.begin(), c.end());
          c[s] = 1;
        }
      }
      std::size_t k = 0;
      for (int s = 0; s < 3; ++s) {
        for (std::size_t j = 0; j < c[s]; ++j) assign[pids[k++]] = detail::kSplitOrder[s];
      }
    }
    for (auto& r : records) r.split = assign.at(r.polygon_id);
  }
  res.records = std::move(records);
  return res;
}

}  // namespace df4lcz
