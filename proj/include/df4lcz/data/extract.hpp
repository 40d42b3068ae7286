#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "df4lcz/data/lczt.hpp"
#include "df4lcz/data/manifest.hpp"
#include "df4lcz/data/polygons.hpp"
#include "df4lcz/errors.hpp"
#include "df4lcz/graph/instances.hpp"
#include "df4lcz/nn/rng.hpp"
#include "df4lcz/spectral/resnet3d.hpp"

namespace df4lcz {

/// Google imagery has ten times the Sentinel ground resolution.
inline constexpr std::size_t kResolutionRatio = kGooglePatch / kSentinelPatch;

/// Co-registered rasters. Polygon coordinates are Sentinel pixel coordinates.
struct RasterPair {
  Tensor sentinel;           // [H, W, 10] digital numbers
  U8Tensor google;           // [10H, 10W, 3]
  const U16Tensor* masks = nullptr;  // optional [10H, 10W] instance ids

  void validate() const {
    if (sentinel.rank() != 3 || sentinel.dim(2) != kSentinelBands) {
      throw DimensionError("sentinel raster must be [H,W,10], got " + shape_str(sentinel.shape()));
    }
    const Shape g{sentinel.dim(0) * kResolutionRatio, sentinel.dim(1) * kResolutionRatio, 3};
    if (google.shape() != g) {
      throw DimensionError("google raster must be " + shape_str(g) + " to match the sentinel raster, got " +
                           shape_str(google.shape()));
    }
    if (masks && masks->shape() != Shape{g[0], g[1]}) {
      throw DimensionError("mask raster must be " + shape_str({g[0], g[1]}) + ", got " + shape_str(masks->shape()));
    }
    if (sentinel.dim(0) < kSentinelPatch || sentinel.dim(1) < kSentinelPatch) {
      throw DimensionError("sentinel raster is smaller than one patch");
    }
  }
};

struct ExtractOptions {
  std::size_t per_polygon = 10;
  /// Minimum fraction of the patch covered by its polygon.
  double overlap_min = 0.5;
  std::string city = "city";
  /// Candidate draws allowed per requested sample before giving up.
  std::size_t attempts_per_sample = 200;
};

struct ExtractResult {
  std::vector<SampleRecord> records;  // sorted by sample_id
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string sample_id(const std::string& polygon, std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%03zu", k);
  return polygon + buf;
}

template <class T>
BasicTensor<T> crop(const BasicTensor<T>& src, std::size_t top, std::size_t left, std::size_t size) {
  Shape shape = src.shape();
  shape[0] = shape[1] = size;
  BasicTensor<T> out(shape);
  const std::size_t inner = src.size() / (src.dim(0) * src.dim(1));
  for (std::size_t r = 0; r < size; ++r) {
    const T* s = src.raw() + ((top + r) * src.dim(1) + left) * inner;
    std::copy(s, s + size * inner, out.raw() + r * size * inner);
  }
  return out;
}

}  // namespace detail

/// Top-left corner of the window centred on `p`, clamped into the raster.
inline std::array<std::size_t, 2> patch_origin(const Point& p, std::size_t height, std::size_t width) {
  const double half = kSentinelPatch / 2.0;
  auto place = [&](double v, std::size_t extent) {
    const double hi = static_cast<double>(extent - kSentinelPatch);
    return static_cast<std::size_t>(std::clamp(std::round(v - half), 0.0, hi));
  };
  return {place(p[1], height), place(p[0], width)};
}

/// Rejection-sample centroids inside each polygon, keep windows whose polygon
/// coverage reaches overlap_min, and write the aligned patch files under `out_dir`.
inline ExtractResult extract_patches(const RasterPair& rasters, const PolygonSet& polygons, const ExtractOptions& opt,
                                     Rng& rng, const std::filesystem::path& out_dir) {
  rasters.validate();
  validate(polygons);
  if (!(opt.overlap_min >= 0.0 && opt.overlap_min <= 1.0)) throw DomainError("overlap_min must lie in [0,1]");
  const std::size_t H = rasters.sentinel.dim(0), W = rasters.sentinel.dim(1);
  const double patch_area = static_cast<double>(kSentinelPatch * kSentinelPatch);
  const std::uint64_t base = rng.next_u64();

  ExtractResult res;
  for (const auto& poly : polygons.polygons) {
    if (polygon_area(poly) < opt.overlap_min * patch_area) {
      res.warnings.push_back("polygon " + poly.polygon_id + " skipped: area " + std::to_string(polygon_area(poly)) +
                             " px cannot reach overlap " + std::to_string(opt.overlap_min));
      continue;
    }
    Rng prng(Rng::subseed(base, poly.polygon_id));
    double x0 = poly.ring[0][0], x1 = x0, y0 = poly.ring[0][1], y1 = y0;
    for (const auto& v : poly.ring) {
      x0 = std::min(x0, v[0]), x1 = std::max(x1, v[0]);
      y0 = std::min(y0, v[1]), y1 = std::max(y1, v[1]);
    }
    std::size_t kept = 0;
    for (std::size_t attempt = 0; attempt < opt.per_polygon * opt.attempts_per_sample && kept < opt.per_polygon;
         ++attempt) {
      const Point p{prng.uniform(x0, x1), prng.uniform(y0, y1)};
      if (!contains(poly, p)) continue;
      const auto [top, left] = patch_origin(p, H, W);
      const double cover = overlap_area(poly, left, top, left + kSentinelPatch, top + kSentinelPatch) / patch_area;
      if (cover < opt.overlap_min) continue;

      SampleRecord r;
      r.sample_id = detail::sample_id(poly.polygon_id, kept);
      r.city = opt.city;
      r.lcz_class = poly.lcz_class;
      r.polygon_id = poly.polygon_id;
      r.sentinel_path = "sentinel/" + r.sample_id + ".lczt";
      r.google_path = "google/" + r.sample_id + ".lczt";
      write_lczt(out_dir / r.sentinel_path, detail::crop(rasters.sentinel, top, left, kSentinelPatch));
      const std::size_t gt = top * kResolutionRatio, gl = left * kResolutionRatio;
      write_lczt(out_dir / r.google_path, detail::crop(rasters.google, gt, gl, kGooglePatch));
      if (rasters.masks) {
        r.mask_path = "masks/" + r.sample_id + ".lczt";
        write_lczt(out_dir / r.mask_path, detail::crop(*rasters.masks, gt, gl, kGooglePatch));
      }
      res.records.push_back(std::move(r));
      ++kept;
    }
    if (kept < opt.per_polygon) {
      res.warnings.push_back("polygon " + poly.polygon_id + ": kept " + std::to_string(kept) + " of " +
                             std::to_string(opt.per_polygon) + " samples");
    }
  }
  sort_by_id(res.records);
  return res;
}

}  // namespace df4lcz
