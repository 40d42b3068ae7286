#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "df4lcz/data/dataset.hpp"
#include "df4lcz/data/lczt.hpp"
#include "df4lcz/data/manifest.hpp"
#include "df4lcz/data/polygons.hpp"
#include "df4lcz/data/sentinel.hpp"
#include "df4lcz/data/split.hpp"
#include "df4lcz/errors.hpp"
#include "df4lcz/graph/instances.hpp"
#include "df4lcz/nn/rng.hpp"

namespace df4lcz {

/// spectral: class lives in the band signature only. layout: class lives in
/// the arrangement of ground objects only. product: class = (signature,
/// arrangement) pair, so each stream sees one factor.
enum class SynthTask { spectral, layout, product };

inline SynthTask parse_synth_task(const std::string& s) {
  if (s == "spectral") return SynthTask::spectral;
  if (s == "layout") return SynthTask::layout;
  if (s == "product") return SynthTask::product;
  throw DomainError("unknown synthetic task '" + s + "' (expected spectral, layout or product)");
}

inline const char* to_string(SynthTask t) {
  return t == SynthTask::spectral ? "spectral" : t == SynthTask::layout ? "layout" : "product";
}

/// Number of distinct object arrangements the renderer knows.
inline constexpr std::size_t kLayoutArchetypes = 6;

struct SynthConfig {
  SynthTask task = SynthTask::spectral;
  std::size_t classes = 4;
  std::size_t samples_per_class = 100;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;

  /// Factor sizes (spectral types, layout types).
  std::array<std::size_t, 2> factors() const {
    switch (task) {
      case SynthTask::spectral: return {classes, kLayoutArchetypes};
      case SynthTask::layout: return {classes, classes};
      case SynthTask::product: {
        std::size_t l = 1;
        for (std::size_t d = 1; d * d <= classes; ++d) {
          if (classes % d == 0) l = d;
        }
        return {classes / l, l};
      }
    }
    return {classes, classes};
  }

  void validate() const {
    if (classes < 2) throw DomainError("synthetic classes must be at least 2");
    if (classes > kNumClasses) throw DomainError("synthetic classes must be at most 17");
    if (samples_per_class < 1) throw DomainError("samples_per_class must be at least 1");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw DomainError("noise_sigma must be finite and >= 0");
    if (task == SynthTask::layout && classes > kLayoutArchetypes) {
      throw DomainError("layout task supports at most " + std::to_string(kLayoutArchetypes) + " classes");
    }
    if (task == SynthTask::product && factors()[1] < 2) {
      throw DomainError("product task needs a class count with a divisor in [2, sqrt(classes)]");
    }
  }
};

/// The raw files of one synthetic sample.
struct SynthRaw {
  SampleRecord record;
  Tensor dn;        // [32, 32, 10]
  U8Tensor rgb;     // [320, 320, 3]
  U16Tensor mask;   // [320, 320]
};

namespace synth {

/// One band signature per spectral type, pairwise at least 0.6 apart.
inline std::vector<std::array<double, kSentinelBands>> templates(std::uint64_t seed, std::size_t count) {
  Rng rng = Rng::derive(seed, "templates");
  std::vector<std::array<double, kSentinelBands>> out;
  while (out.size() < count) {
    std::array<double, kSentinelBands> t{};
    for (auto& v : t) v = rng.uniform(0.1, 0.9);
    bool far = true;
    for (const auto& o : out) {
      double d = 0.0;
      for (std::size_t b = 0; b < kSentinelBands; ++b) d += (t[b] - o[b]) * (t[b] - o[b]);
      far = far && std::sqrt(d) >= 0.6;
    }
    if (far) out.push_back(t);
  }
  return out;
}

/// Object centres in [0, 1]^2 for one arrangement.
inline std::vector<Point> layout_points(std::size_t archetype, Rng& rng) {
  std::vector<Point> pts;
  const double sx = rng.uniform(-0.05, 0.05), sy = rng.uniform(-0.05, 0.05);
  switch (archetype) {
    case 0:  // 3 x 3 grid
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) pts.push_back({0.25 + 0.25 * j, 0.25 + 0.25 * i});
      break;
    case 1: {  // one tight cluster
      const double cx = rng.uniform(0.3, 0.7), cy = rng.uniform(0.3, 0.7);
      for (int i = 0; i < 8; ++i) pts.push_back({cx + 0.05 * rng.normal(), cy + 0.05 * rng.normal()});
      break;
    }
    case 2: {  // ring
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (int i = 0; i < 10; ++i) {
        const double a = phase + 2.0 * std::numbers::pi * i / 10.0;
        pts.push_back({0.5 + 0.32 * std::cos(a), 0.5 + 0.32 * std::sin(a)});
      }
      break;
    }
    case 3: {  // two clusters
      const double a = rng.uniform(0.0, std::numbers::pi);
      for (int side : {-1, 1}) {
        const double cx = 0.5 + side * 0.25 * std::cos(a), cy = 0.5 + side * 0.25 * std::sin(a);
        for (int i = 0; i < 5; ++i) pts.push_back({cx + 0.04 * rng.normal(), cy + 0.04 * rng.normal()});
      }
      break;
    }
    case 4:  // dense 5 x 5 grid
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) pts.push_back({0.1 + 0.2 * j, 0.1 + 0.2 * i});
      break;
    default: {  // line
      const double a = rng.uniform(0.0, std::numbers::pi);
      for (int i = -3; i <= 3; ++i) pts.push_back({0.5 + 0.11 * i * std::cos(a), 0.5 + 0.11 * i * std::sin(a)});
      break;
    }
  }
  for (auto& p : pts) {
    p[0] = std::clamp(p[0] + sx + 0.01 * rng.normal(), 0.05, 0.95);
    p[1] = std::clamp(p[1] + sy + 0.01 * rng.normal(), 0.05, 0.95);
  }
  return pts;
}

/// Coloured discs on a flat background, with the matching instance raster.
inline void render(const std::vector<Point>& pts, Rng& rng, U8Tensor& rgb, U16Tensor& mask) {
  const std::size_t S = kGooglePatch;
  rgb = U8Tensor({S, S, 3});
  mask = U16Tensor({S, S});
  std::array<std::uint8_t, 3> bg{};
  for (auto& c : bg) c = static_cast<std::uint8_t>(rng.uniform_int(256));
  for (std::size_t i = 0; i < S * S; ++i) std::copy(bg.begin(), bg.end(), rgb.raw() + 3 * i);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double cx = pts[k][0] * S, cy = pts[k][1] * S, r = rng.uniform(6.0, 10.0);
    std::array<std::uint8_t, 3> col{};
    for (auto& c : col) c = static_cast<std::uint8_t>(rng.uniform_int(256));
    const long y0 = std::max(0L, static_cast<long>(cy - r)), y1 = std::min<long>(S - 1, static_cast<long>(cy + r));
    const long x0 = std::max(0L, static_cast<long>(cx - r)), x1 = std::min<long>(S - 1, static_cast<long>(cx + r));
    for (long y = y0; y <= y1; ++y) {
      for (long x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        if (dx * dx + dy * dy > r * r) continue;
        mask(y, x) = static_cast<std::uint16_t>(k + 1);
        std::copy(col.begin(), col.end(), rgb.raw() + 3 * (y * S + x));
      }
    }
  }
}

inline std::string sample_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%06zu", i);
  return buf;
}

}  // namespace synth

/// Records of the whole dataset, class-major, split stratified 7:2:1.
inline std::vector<SampleRecord> synth_records(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<SampleRecord> records;
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    for (std::size_t k = 0; k < cfg.samples_per_class; ++k) {
      SampleRecord r;
      r.sample_id = synth::sample_id(c * cfg.samples_per_class + k);
      r.city = "synth";
      r.lcz_class = static_cast<int>(c);
      r.polygon_id = "c" + std::to_string(c) + "_p" + std::to_string(k / 10);
      r.sentinel_path = "sentinel/" + r.sample_id + ".lczt";
      r.google_path = "google/" + r.sample_id + ".lczt";
      r.mask_path = "masks/" + r.sample_id + ".lczt";
      records.push_back(std::move(r));
    }
  }
  Rng rng = Rng::derive(cfg.seed, "split");
  return split_records(std::move(records), SplitStrategy::sample_pool, rng).records;
}

/// Render the rasters of one record produced by synth_records.
inline SynthRaw synth_sample(const SynthConfig& cfg, const std::vector<std::array<double, kSentinelBands>>& templates,
                             const SampleRecord& record) {
  const std::size_t index = std::stoul(record.sample_id.substr(1));
  Rng rng(Rng::subseed(cfg.seed, "sample", index));
  const auto [n_spec, n_layout] = cfg.factors();
  const auto label = static_cast<std::size_t>(record.lcz_class);
  std::size_t s = 0, l = 0;
  switch (cfg.task) {
    case SynthTask::spectral:
      s = label;
      l = rng.uniform_int(kLayoutArchetypes);
      break;
    case SynthTask::layout:
      s = rng.uniform_int(n_spec);
      l = label;
      break;
    case SynthTask::product:
      s = label / n_layout;
      l = label % n_layout;
      break;
  }
  SynthRaw raw;
  raw.record = record;
  raw.dn = Tensor({kSentinelPatch, kSentinelPatch, kSentinelBands});
  const auto& t = templates.at(s);
  for (std::size_t i = 0; i < raw.dn.size(); ++i) {
    const double v = std::clamp(t[i % kSentinelBands] + cfg.noise_sigma * rng.normal(), 0.0, 1.0);
    raw.dn[i] = static_cast<float>(std::round(v * kReflectanceScale));
  }
  synth::render(synth::layout_points(l, rng), rng, raw.rgb, raw.mask);
  return raw;
}

inline std::vector<std::array<double, kSentinelBands>> synth_templates(const SynthConfig& cfg) {
  return synth::templates(cfg.seed, cfg.factors()[0]);
}

/// The dataset as model-ready samples, without touching the disk.
inline Dataset synth_dataset(const SynthConfig& cfg, const LoadOptions& opt = {}) {
  const auto records = synth_records(cfg);
  const auto templates = synth_templates(cfg);
  Dataset ds;
  ds.classes = cfg.classes;
  ds.samples.reserve(records.size());
  for (const auto& r : records) {
    const auto raw = synth_sample(cfg, templates, r);
    ds.samples.push_back(make_sample(r, raw.dn, raw.rgb, &raw.mask, opt));
  }
  return ds;
}

/// Write patches, masks and manifest.jsonl under `dir`. Returns the records.
inline std::vector<SampleRecord> synth_generate(const SynthConfig& cfg, const std::filesystem::path& dir) {
  const auto records = synth_records(cfg);
  const auto templates = synth_templates(cfg);
  for (const auto& r : records) {
    const auto raw = synth_sample(cfg, templates, r);
    write_lczt(dir / r.sentinel_path, raw.dn);
    write_lczt(dir / r.google_path, raw.rgb);
    write_lczt(dir / r.mask_path, raw.mask);
  }
  write_manifest(dir / "manifest.jsonl", records);
  return records;
}

}  // namespace df4lcz
