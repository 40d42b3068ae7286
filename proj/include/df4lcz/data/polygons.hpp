#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "df4lcz/errors.hpp"

namespace df4lcz {

using Point = std::array<double, 2>;

/// A labelled training area. `ring` is closed: the last vertex repeats the first.
struct Polygon {
  std::string polygon_id;
  int lcz_class = 0;
  std::vector<Point> ring;
};

struct PolygonSet {
  std::vector<Polygon> polygons;
};

namespace geom {

inline double cross(const Point& o, const Point& a, const Point& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

inline bool on_segment(const Point& p, const Point& a, const Point& b) {
  return std::min(a[0], b[0]) <= p[0] && p[0] <= std::max(a[0], b[0]) && std::min(a[1], b[1]) <= p[1] &&
         p[1] <= std::max(a[1], b[1]);
}

inline int sign(double v) { return (v > 0) - (v < 0); }

/// Closed-segment intersection test, collinear overlaps included.
inline bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d) {
  const int d1 = sign(cross(c, d, a)), d2 = sign(cross(c, d, b));
  const int d3 = sign(cross(a, b, c)), d4 = sign(cross(a, b, d));
  if (d1 * d2 < 0 && d3 * d4 < 0) return true;
  if (d1 == 0 && on_segment(a, c, d)) return true;
  if (d2 == 0 && on_segment(b, c, d)) return true;
  if (d3 == 0 && on_segment(c, a, b)) return true;
  if (d4 == 0 && on_segment(d, a, b)) return true;
  return false;
}

/// Shoelace area of an open vertex list (no repeated closing vertex).
inline double area(const std::vector<Point>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& p = v[i];
    const auto& q = v[(i + 1) % v.size()];
    s += p[0] * q[1] - q[0] * p[1];
  }
  return std::abs(s) / 2.0;
}

inline std::vector<Point> open_ring(const std::vector<Point>& ring) {
  return {ring.begin(), ring.end() - 1};
}

/// Clip an arbitrary simple polygon to the axis-aligned box [x0,x1] x [y0,y1]
/// (Sutherland-Hodgman; the box is convex so the clipped area is exact).
inline std::vector<Point> clip_to_box(std::vector<Point> poly, double x0, double y0, double x1, double y1) {
  auto clip = [&](auto inside, auto intersect) {
    std::vector<Point> out;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Point& cur = poly[i];
      const Point& prev = poly[(i + poly.size() - 1) % poly.size()];
      const bool ci = inside(cur), pi = inside(prev);
      if (ci) {
        if (!pi) out.push_back(intersect(prev, cur));
        out.push_back(cur);
      } else if (pi) {
        out.push_back(intersect(prev, cur));
      }
    }
    poly = std::move(out);
  };
  auto at_x = [](double x) {
    return [x](const Point& a, const Point& b) {
      const double t = (x - a[0]) / (b[0] - a[0]);
      return Point{x, a[1] + t * (b[1] - a[1])};
    };
  };
  auto at_y = [](double y) {
    return [y](const Point& a, const Point& b) {
      const double t = (y - a[1]) / (b[1] - a[1]);
      return Point{a[0] + t * (b[0] - a[0]), y};
    };
  };
  clip([&](const Point& p) { return p[0] >= x0; }, at_x(x0));
  if (!poly.empty()) clip([&](const Point& p) { return p[0] <= x1; }, at_x(x1));
  if (!poly.empty()) clip([&](const Point& p) { return p[1] >= y0; }, at_y(y0));
  if (!poly.empty()) clip([&](const Point& p) { return p[1] <= y1; }, at_y(y1));
  return poly;
}

}  // namespace geom

/// Even-odd point-in-polygon test on a closed ring.
inline bool contains(const Polygon& poly, const Point& p) {
  bool in = false;
  const auto& r = poly.ring;
  for (std::size_t i = 0, j = r.size() - 2; i + 1 < r.size(); j = i++) {
    if ((r[i][1] > p[1]) != (r[j][1] > p[1]) &&
        p[0] < (r[j][0] - r[i][0]) * (p[1] - r[i][1]) / (r[j][1] - r[i][1]) + r[i][0]) {
      in = !in;
    }
  }
  return in;
}

inline double polygon_area(const Polygon& poly) { return geom::area(geom::open_ring(poly.ring)); }

/// Area of poly inside the box [x0,x1] x [y0,y1].
inline double overlap_area(const Polygon& poly, double x0, double y0, double x1, double y1) {
  const auto clipped = geom::clip_to_box(geom::open_ring(poly.ring), x0, y0, x1, y1);
  return clipped.size() < 3 ? 0.0 : geom::area(clipped);
}

inline void validate(const Polygon& poly, std::size_t classes = 17) {
  const auto& id = poly.polygon_id;
  if (id.empty()) throw InputError("polygon with empty polygon_id");
  if (poly.lcz_class < 0 || static_cast<std::size_t>(poly.lcz_class) >= classes) {
    throw InputError("polygon " + id + ": lcz_class " + std::to_string(poly.lcz_class) + " out of range");
  }
  const auto& r = poly.ring;
  if (r.size() < 4) throw InputError("polygon " + id + ": ring needs at least 3 vertices");
  if (r.front() != r.back()) throw InputError("polygon " + id + ": ring is not closed");
  for (const auto& p : r) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw InputError("polygon " + id + ": non-finite vertex");
  }
  const std::size_t n = r.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (r[i] == r[i + 1]) throw InputError("polygon " + id + ": repeated vertex " + std::to_string(i));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (geom::segments_intersect(r[i], r[i + 1], r[j], r[j + 1])) {
        throw InputError("polygon " + id + ": ring self-intersects (edges " + std::to_string(i) + " and " +
                         std::to_string(j) + ")");
      }
    }
  }
  if (!(polygon_area(poly) > 0.0)) throw InputError("polygon " + id + ": zero area");
}

inline void validate(const PolygonSet& set, std::size_t classes = 17) {
  std::set<std::string> ids;
  for (const auto& p : set.polygons) {
    validate(p, classes);
    if (!ids.insert(p.polygon_id).second) throw InputError("duplicate polygon_id " + p.polygon_id);
  }
}

inline nlohmann::json to_json(const PolygonSet& set) {
  nlohmann::json j;
  j["polygons"] = nlohmann::json::array();
  for (const auto& p : set.polygons) {
    nlohmann::json ring = nlohmann::json::array();
    for (const auto& v : p.ring) ring.push_back({v[0], v[1]});
    j["polygons"].push_back({{"polygon_id", p.polygon_id}, {"lcz_class", p.lcz_class}, {"ring", ring}});
  }
  return j;
}

inline PolygonSet polygon_set_from_json(const nlohmann::json& j, std::size_t classes = 17) {
  PolygonSet set;
  try {
    for (const auto& pj : j.at("polygons")) {
      Polygon p;
      p.polygon_id = pj.at("polygon_id").get<std::string>();
      p.lcz_class = pj.at("lcz_class").get<int>();
      for (const auto& v : pj.at("ring")) {
        if (!v.is_array() || v.size() != 2) throw FormatError("polygon " + p.polygon_id + ": vertex must be [x,y]");
        p.ring.push_back({v[0].get<double>(), v[1].get<double>()});
      }
      set.polygons.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("polygon file: ") + e.what());
  }
  validate(set, classes);
  return set;
}

inline PolygonSet read_polygons(const std::filesystem::path& path, std::size_t classes = 17) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open polygon file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return polygon_set_from_json(j, classes);
}

}  // namespace df4lcz
