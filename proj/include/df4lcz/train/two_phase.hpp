#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "df4lcz/data/dataset.hpp"
#include "df4lcz/errors.hpp"
#include "df4lcz/fusion/fuse.hpp"
#include "df4lcz/fusion/metrics.hpp"
#include "df4lcz/fusion/report.hpp"
#include "df4lcz/fusion/sweep.hpp"
#include "df4lcz/train/checkpoint.hpp"
#include "df4lcz/train/trainer.hpp"

namespace df4lcz {

/// Run both frozen streams once over `samples` (sorted by sample_id).
inline PredictionCache cache_predictions(const GcnModel<float>& google, const ResNet3d<float>& sentinel,
                                         std::span<const Sample* const> samples) {
  const std::size_t C = google.config().num_classes;
  if (sentinel.config().num_classes != C) {
    throw ConsistencyError("class-count mismatch: google stream has " + std::to_string(C) + ", sentinel stream has " +
                           std::to_string(sentinel.config().num_classes));
  }
  if (samples.empty()) throw InputError("no samples to cache predictions for");
  const auto pg = predict_samples(google, samples);
  const auto ps = predict_samples(sentinel, samples);
  PredictionCache cache;
  cache.classes = C;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    cache.sample_ids.push_back(samples[i]->sample_id);
    cache.labels.push_back(samples[i]->label);
    cache.c_g.push_back(ProbVector::from_span<float>(pg.data().subspan(i * C, C)));
    cache.c_s.push_back(ProbVector::from_span<float>(ps.data().subspan(i * C, C)));
  }
  return cache;
}

struct FusionReport {
  double alpha = 0.6;
  ConfusionMatrix fused_cm, google_cm, sentinel_cm;
  MetricReport fused, google, sentinel;
  std::vector<SweepRow> sweep;
};

/// Metrics of the frozen streams and of their fusion at `alpha`, plus the
/// alpha sweep, all from cached predictions.
inline FusionReport fusion_report(const PredictionCache& cache, double alpha, double step = 0.1,
                                  F1Average avg = F1Average::unweighted) {
  FusionReport r;
  r.alpha = alpha;
  r.fused_cm = fused_confusion(cache.c_g, cache.c_s, cache.labels, alpha, cache.classes);
  r.google_cm = fused_confusion(cache.c_g, cache.c_s, cache.labels, 1.0, cache.classes);
  r.sentinel_cm = fused_confusion(cache.c_g, cache.c_s, cache.labels, 0.0, cache.classes);
  r.fused = metrics(r.fused_cm, avg);
  r.google = metrics(r.google_cm, avg);
  r.sentinel = metrics(r.sentinel_cm, avg);
  r.sweep = sweep_alpha(cache.c_g, cache.c_s, cache.labels, step, cache.classes, avg);
  return r;
}

inline nlohmann::json to_json(const FusionReport& r) {
  nlohmann::json j;
  j["alpha"] = r.alpha;
  j["fused"] = to_json(r.fused, r.fused_cm);
  j["google"] = to_json(r.google, r.google_cm);
  j["sentinel"] = to_json(r.sentinel, r.sentinel_cm);
  return j;
}

/// Phase two: both streams frozen, fusion evaluated on the validation split.
inline FusionReport two_phase_fit(const Checkpoint& google_ck, const Checkpoint& sentinel_ck, const Dataset& data,
                                  const TrainConfig& cfg, double step = 0.1, PredictionCache* cache_out = nullptr) {
  cfg.validate();
  if (google_ck.num_classes() != sentinel_ck.num_classes()) {
    throw ConsistencyError("class-count mismatch: google checkpoint has " + std::to_string(google_ck.num_classes()) +
                           ", sentinel checkpoint has " + std::to_string(sentinel_ck.num_classes()));
  }
  const auto google = gcn_from_checkpoint(google_ck);
  const auto sentinel = resnet_from_checkpoint(sentinel_ck);
  const auto val = data.subset(Split::val);
  if (val.empty()) throw InputError("validation split is empty");
  auto cache = cache_predictions(google, sentinel, val);
  auto report = fusion_report(cache, cfg.alpha, step);
  if (cache_out) *cache_out = std::move(cache);
  return report;
}

}  // namespace df4lcz
