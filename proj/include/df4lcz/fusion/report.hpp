#pragma once

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "df4lcz/errors.hpp"
#include "df4lcz/fusion/metrics.hpp"
#include "df4lcz/fusion/prob_vector.hpp"
#include "df4lcz/fusion/sweep.hpp"

namespace df4lcz {

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_num(*v) : std::string(); }

}  // namespace detail

/// Metric report as JSON. Undefined quantities are null.
inline nlohmann::json to_json(const MetricReport& r, const ConfusionMatrix& cm) {
  nlohmann::json j;
  j["n"] = r.n;
  j["oa"] = r.oa;
  j["oa_bu"] = detail::opt_json(r.oa_bu);
  j["oa_n"] = detail::opt_json(r.oa_n);
  j["kappa"] = r.kappa;
  j["avg_f1"] = r.avg_f1;
  j["avg_f1_mode"] = r.f1_average == F1Average::unweighted ? "unweighted" : "support_weighted";
  j["per_class"] = nlohmann::json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    j["per_class"].push_back({{"class", lcz_class_name(c)},
                              {"support", m.support},
                              {"predicted", m.predicted},
                              {"precision", detail::opt_json(m.precision)},
                              {"recall", detail::opt_json(m.recall)},
                              {"f1", detail::opt_json(m.f1)}});
  }
  j["confusion_matrix"] = cm.rows();
  return j;
}

inline constexpr const char* kSweepCsvHeader = "alpha,oa,oa_bu,oa_n,kappa,avg_f1";

/// One line per alpha; undefined OA_BU / OA_N are left empty.
inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << kSweepCsvHeader << '\n';
  for (const auto& r : rows) {
    os << detail::fmt_num(r.alpha) << ',' << detail::fmt_num(r.metrics.oa) << ',' << detail::fmt_opt(r.metrics.oa_bu)
       << ',' << detail::fmt_opt(r.metrics.oa_n) << ',' << detail::fmt_num(r.metrics.kappa) << ','
       << detail::fmt_num(r.metrics.avg_f1) << '\n';
  }
  return os.str();
}

/// Frozen per-sample stream outputs, so that fusion can be re-evaluated
/// without touching either model.
struct PredictionCache {
  std::size_t classes = 17;
  std::vector<std::string> sample_ids;
  std::vector<int> labels;
  std::vector<ProbVector> c_g, c_s;
};

inline nlohmann::json to_json(const PredictionCache& p) {
  nlohmann::json j;
  j["classes"] = p.classes;
  j["samples"] = nlohmann::json::array();
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    j["samples"].push_back(
        {{"sample_id", p.sample_ids[i]}, {"label", p.labels[i]}, {"c_g", p.c_g[i].values()}, {"c_s", p.c_s[i].values()}});
  }
  return j;
}

inline PredictionCache prediction_cache_from_json(const nlohmann::json& j) {
  try {
    PredictionCache p;
    p.classes = j.at("classes").get<std::size_t>();
    for (const auto& s : j.at("samples")) {
      p.sample_ids.push_back(s.at("sample_id").get<std::string>());
      p.labels.push_back(s.at("label").get<int>());
      p.c_g.emplace_back(s.at("c_g").get<std::vector<double>>());
      p.c_s.emplace_back(s.at("c_s").get<std::vector<double>>());
      if (p.c_g.back().size() != p.classes || p.c_s.back().size() != p.classes) {
        throw FormatError("prediction cache: sample " + p.sample_ids.back() + " has the wrong number of classes");
      }
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("prediction cache: ") + e.what());
  }
}

}  // namespace df4lcz
