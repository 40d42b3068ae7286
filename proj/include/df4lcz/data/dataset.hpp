#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "df4lcz/data/lczt.hpp"
#include "df4lcz/data/manifest.hpp"
#include "df4lcz/data/sentinel.hpp"
#include "df4lcz/errors.hpp"
#include "df4lcz/graph/instances.hpp"
#include "df4lcz/graph/scene_graph.hpp"
#include "df4lcz/spectral/resnet3d.hpp"

namespace df4lcz {

/// A model-ready pair: the reflectance cube and the scene graph of one sample.
struct Sample {
  std::string sample_id;
  int label = 0;
  Split split = Split::unassigned;
  std::string polygon_id;
  SpectralPatch cube;
  SceneGraph graph;
};

struct LoadOptions {
  double reflectance_scale = kReflectanceScale;
  GraphOptions graph;
};

/// Normalize the DN cube and turn the instance raster into a scene graph. A
/// null mask stands for an empty segmentation.
inline Sample make_sample(const SampleRecord& r, const Tensor& dn, const U8Tensor& rgb, const U16Tensor* mask,
                          const LoadOptions& opt = {}) {
  Sample s;
  s.sample_id = r.sample_id;
  s.label = r.lcz_class;
  s.split = r.split;
  s.polygon_id = r.polygon_id;
  s.cube = normalize_sentinel(dn, opt.reflectance_scale);
  if (rgb.rank() != 3) throw DimensionError("google patch must be [S,S,3], got " + shape_str(rgb.shape()));
  const U16Tensor empty = mask ? U16Tensor() : U16Tensor({rgb.dim(0), rgb.dim(1)});
  s.graph = build_graph(ingest_masks(mask ? *mask : empty, rgb, r.sample_id), opt.graph);
  return s;
}

inline Sample load_sample(const SampleRecord& r, const std::filesystem::path& base, const LoadOptions& opt = {}) {
  const auto dn = read_lczt_as<float>(base / r.sentinel_path);
  const auto rgb = read_lczt_as<std::uint8_t>(base / r.google_path);
  if (r.mask_path.empty()) return make_sample(r, dn, rgb, nullptr, opt);
  const auto mask = read_lczt_as<std::uint16_t>(base / r.mask_path);
  return make_sample(r, dn, rgb, &mask, opt);
}

struct Dataset {
  std::size_t classes = kNumClasses;
  std::vector<Sample> samples;  // sorted by sample_id

  std::vector<const Sample*> subset(Split s) const {
    std::vector<const Sample*> out;
    for (const auto& x : samples) {
      if (x.split == s) out.push_back(&x);
    }
    return out;
  }
};

inline Dataset load_dataset(const std::filesystem::path& manifest, std::size_t classes = kNumClasses,
                            const LoadOptions& opt = {}) {
  auto records = read_manifest(manifest, ManifestOptions{classes, true});
  sort_by_id(records);
  Dataset ds;
  ds.classes = classes;
  ds.samples.reserve(records.size());
  for (const auto& r : records) ds.samples.push_back(load_sample(r, manifest.parent_path(), opt));
  return ds;
}

}  // namespace df4lcz
