#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "df4lcz/errors.hpp"
#include "df4lcz/nn/tensor.hpp"

namespace df4lcz {

inline constexpr std::size_t kGooglePatch = 320;

using U8Tensor = BasicTensor<std::uint8_t>;
using U16Tensor = BasicTensor<std::uint16_t>;

/// Pixel-space bounding box: left column, top row, width, height.
struct BBox {
  int x = 0, y = 0, w = 0, h = 0;
  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Instance {
  std::uint32_t id = 0;
  BBox bbox;
  std::array<double, 2> centroid{};  // (c_x, c_y), pixels
  std::array<double, 3> mean_rgb{};  // 0..255
};

/// Ground instances of one high-resolution patch, as delivered by an external
/// segmenter (one positive id per instance in a u16 raster).
struct InstanceSet {
  std::string patch_id;
  std::vector<Instance> instances;
  /// Mean colour of the whole patch; used for the placeholder node when no
  /// instance was segmented.
  std::array<double, 3> patch_mean_rgb{0.0, 0.0, 0.0};
  std::size_t frame = kGooglePatch;
};

/// Throws InputError when an invariant of InstanceSet does not hold.
inline void validate(const InstanceSet& set) {
  std::set<std::uint32_t> seen;
  const int frame = static_cast<int>(set.frame);
  for (const auto& in : set.instances) {
    if (in.id == 0) throw InputError("instance id must be positive");
    if (!seen.insert(in.id).second) throw InputError("duplicate instance id " + std::to_string(in.id));
    const auto& b = in.bbox;
    if (b.x < 0 || b.y < 0 || b.w <= 0 || b.h <= 0 || b.x + b.w > frame || b.y + b.h > frame) {
      throw InputError("instance " + std::to_string(in.id) + " bbox outside the " + std::to_string(frame) + " px frame");
    }
    const auto [cx, cy] = in.centroid;
    if (cx < b.x || cx > b.x + b.w || cy < b.y || cy > b.y + b.h) {
      throw InputError("instance " + std::to_string(in.id) + " centroid lies outside its bbox");
    }
  }
}

/// One instance per distinct positive id in `raster` [H x W]: tight bbox,
/// centroid at the bbox centre, mean colour over the instance's own pixels in
/// `rgb` [H x W x 3].
template <class Pixel>
InstanceSet ingest_masks(const U16Tensor& raster, const BasicTensor<Pixel>& rgb, std::string patch_id = {}) {
  require_rank(raster.shape(), 2, "instance raster");
  if (rgb.rank() != 3 || rgb.dim(2) != 3 || rgb.dim(0) != raster.dim(0) || rgb.dim(1) != raster.dim(1)) {
    throw DimensionError("ingest_masks: raster " + shape_str(raster.shape()) + " does not match rgb patch " +
                         shape_str(rgb.shape()));
  }
  if (raster.dim(0) != raster.dim(1)) throw DimensionError("ingest_masks: patch must be square");
  const std::size_t H = raster.dim(0), W = raster.dim(1);

  struct Acc {
    int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1;
    std::array<double, 3> sum{};
    std::size_t count = 0;
  };
  std::map<std::uint32_t, Acc> acc;
  std::array<double, 3> total{};
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const double r = static_cast<double>(rgb(y, x, 0));
      const double g = static_cast<double>(rgb(y, x, 1));
      const double b = static_cast<double>(rgb(y, x, 2));
      total[0] += r;
      total[1] += g;
      total[2] += b;
      const std::uint16_t id = raster(y, x);
      if (id == 0) continue;
      auto& a = acc[id];
      a.x0 = std::min(a.x0, static_cast<int>(x));
      a.x1 = std::max(a.x1, static_cast<int>(x));
      a.y0 = std::min(a.y0, static_cast<int>(y));
      a.y1 = std::max(a.y1, static_cast<int>(y));
      a.sum[0] += r;
      a.sum[1] += g;
      a.sum[2] += b;
      ++a.count;
    }
  }

  InstanceSet set;
  set.patch_id = std::move(patch_id);
  set.frame = H;
  const double npix = static_cast<double>(H * W);
  set.patch_mean_rgb = {total[0] / npix, total[1] / npix, total[2] / npix};
  for (const auto& [id, a] : acc) {
    Instance in;
    in.id = id;
    in.bbox = BBox{a.x0, a.y0, a.x1 - a.x0 + 1, a.y1 - a.y0 + 1};
    in.centroid = {in.bbox.x + in.bbox.w / 2.0, in.bbox.y + in.bbox.h / 2.0};
    const double n = static_cast<double>(a.count);
    in.mean_rgb = {a.sum[0] / n, a.sum[1] / n, a.sum[2] / n};
    set.instances.push_back(in);
  }
  return set;
}

inline nlohmann::json to_json(const InstanceSet& set) {
  nlohmann::json j;
  j["patch_id"] = set.patch_id;
  j["instances"] = nlohmann::json::array();
  for (const auto& in : set.instances) {
    j["instances"].push_back({{"id", in.id},
                              {"bbox", {in.bbox.x, in.bbox.y, in.bbox.w, in.bbox.h}},
                              {"centroid", {in.centroid[0], in.centroid[1]}},
                              {"mean_rgb", {in.mean_rgb[0], in.mean_rgb[1], in.mean_rgb[2]}}});
  }
  j["patch_mean_rgb"] = {set.patch_mean_rgb[0], set.patch_mean_rgb[1], set.patch_mean_rgb[2]};
  return j;
}

inline InstanceSet instance_set_from_json(const nlohmann::json& j) {
  try {
    InstanceSet set;
    set.patch_id = j.at("patch_id").get<std::string>();
    for (const auto& e : j.at("instances")) {
      Instance in;
      in.id = e.at("id").get<std::uint32_t>();
      const auto& b = e.at("bbox");
      in.bbox = BBox{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
      in.centroid = {e.at("centroid").at(0).get<double>(), e.at("centroid").at(1).get<double>()};
      const auto& c = e.at("mean_rgb");
      in.mean_rgb = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
      set.instances.push_back(in);
    }
    if (j.contains("patch_mean_rgb")) {
      const auto& c = j.at("patch_mean_rgb");
      set.patch_mean_rgb = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
    }
    validate(set);
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("instance sidecar: ") + e.what());
  }
}

}  // namespace df4lcz
