#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "firerisk/detect_eval.hpp"
#include "firerisk/error.hpp"
#include "firerisk/geometry.hpp"
#include "firerisk/image.hpp"

namespace firerisk {

// ---------------------------------------------------------------------------
// Convex hull
// ---------------------------------------------------------------------------

/// > 0 when o->a->b turns counter-clockwise.
inline double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

struct Hull {
  std::vector<Point2> vertices;  // CCW, no repeated or collinear vertices
  bool degenerate = false;       // fewer than three non-collinear input points
};

/// Andrew's monotone chain. The first vertex is the lowest (x, then y)
/// input point.
inline Hull convex_hull(std::span<const Point2> input) {
  if (input.empty()) throw DomainError("convex_hull: empty point set");
  std::vector<Point2> pts(input.begin(), input.end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return {pts, true};

  std::vector<Point2> h(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  if (h.size() < 3) return {std::move(h), true};
  return {std::move(h), false};
}

/// Signed shoelace area: positive for CCW order.
inline double signed_area(std::span<const Point2> poly) {
  double s = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % n];
    s += a.x * b.y - b.x * a.y;
  }
  return s / 2.0;
}

/// Axis-aligned georeference: pixel (0,0) sits at `origin`, x grows east
/// and y grows south. Uses a local equirectangular approximation.
struct GeoRef {
  double origin_lat = 0.0;
  double origin_lon = 0.0;
  double meters_per_pixel_x = 1.0;
  double meters_per_pixel_y = 1.0;

  static constexpr double kEarthRadius = 6378137.0;

  void validate() const {
    if (!(meters_per_pixel_x > 0 && meters_per_pixel_y > 0)) throw ConfigError("georef: meters_per_pixel must be > 0");
    if (!(std::abs(origin_lat) < 90 && std::abs(origin_lon) <= 180)) throw ConfigError("georef: origin out of range");
  }

  double pixel_area_m2() const { return meters_per_pixel_x * meters_per_pixel_y; }

  /// (lon, lat) in degrees.
  std::array<double, 2> to_lonlat(const Point2& p) const {
    constexpr double deg = 180.0 / std::numbers::pi;
    const double lat = origin_lat - p.y * meters_per_pixel_y / kEarthRadius * deg;
    const double lon =
        origin_lon + p.x * meters_per_pixel_x / (kEarthRadius * std::cos(origin_lat / deg)) * deg;
    return {lon, lat};
  }

  Point2 to_pixel(double lon, double lat) const {
    constexpr double deg = 180.0 / std::numbers::pi;
    return {(lon - origin_lon) / deg * kEarthRadius * std::cos(origin_lat / deg) / meters_per_pixel_x,
            (origin_lat - lat) / deg * kEarthRadius / meters_per_pixel_y};
  }
};

struct PolygonArea {
  double px2 = 0.0;
  double m2 = 0.0;
  bool degenerate = false;
};

/// Area of a hull in px^2 and m^2. Orientation does not matter.
inline PolygonArea polygon_area(std::span<const Point2> hull, const GeoRef& geo = {}) {
  if (hull.size() < 3) return {0.0, 0.0, true};
  const double px = std::abs(signed_area(hull));
  return {px, px * geo.pixel_area_m2(), px == 0.0};
}

// ---------------------------------------------------------------------------
// Clustering and scoring
// ---------------------------------------------------------------------------

/// Single-linkage components over box centers: two detections of the same
/// class are linked when their centers are at most `radius` apart.
/// Clusters are ordered by their smallest index; members ascend.
inline std::vector<std::vector<std::size_t>> cluster_detections(std::span<const Detection> dets, double radius) {
  if (!(radius > 0)) throw ConfigError("cluster radius must be > 0");
  const std::size_t n = dets.size();
  const double r2 = radius * radius;
  std::vector<int> label(n, -1);
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (label[seed] >= 0) continue;
    const int id = static_cast<int>(clusters.size());
    std::vector<std::size_t> members{seed}, stack{seed};
    label[seed] = id;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const Point2 ci = dets[i].bbox.center();
      for (std::size_t j = 0; j < n; ++j) {
        if (label[j] >= 0 || dets[j].class_id != dets[i].class_id) continue;
        const Point2 cj = dets[j].bbox.center();
        const double dx = ci.x - cj.x, dy = ci.y - cj.y;
        if (dx * dx + dy * dy <= r2) {
          label[j] = id;
          members.push_back(j);
          stack.push_back(j);
        }
      }
    }
    std::sort(members.begin(), members.end());
    clusters.push_back(std::move(members));
  }
  return clusters;
}

/// Relative flammability per class id (unitless, >= 0).
struct FlammabilityTable {
  std::map<std::int64_t, double> weights;

  double weight(std::int64_t class_id) const {
    const auto it = weights.find(class_id);
    if (it == weights.end()) throw ConfigError("no flammability weight for class " + std::to_string(class_id));
    return it->second;
  }
};

enum class HullGeometry { Centers, Corners };

struct RiskPolygon {
  std::vector<Point2> hull;  // CCW, pixel coordinates
  std::int64_t class_id = 0;
  std::vector<std::size_t> members;  // detection indices
  double mean_confidence = 0.0;
  double area_px2 = 0.0;
  double area_m2 = 0.0;
  /// weight * members / area_m2; 0 for degenerate polygons.
  double score = 0.0;
  bool degenerate = false;
};

inline constexpr const char* kRiskFormula =
    "score = flammability_weight(class) * detections_in_cluster / hull_area_m2; degenerate hulls score 0";

/// Clusters detections per class, hulls each cluster and scores it.
inline std::vector<RiskPolygon> build_risk_polygons(std::span<const Detection> dets, const FlammabilityTable& table,
                                                    const GeoRef& geo, double radius,
                                                    HullGeometry geometry = HullGeometry::Centers) {
  geo.validate();
  for (const auto& d : dets) table.weight(d.class_id);  // every class must be covered
  std::vector<RiskPolygon> out;
  for (const auto& members : cluster_detections(dets, radius)) {
    RiskPolygon rp;
    rp.class_id = dets[members.front()].class_id;
    rp.members = members;
    std::vector<Point2> pts;
    double conf = 0.0;
    for (auto i : members) {
      const auto& b = dets[i].bbox;
      conf += dets[i].confidence;
      if (geometry == HullGeometry::Centers) {
        pts.push_back(b.center());
      } else {
        pts.insert(pts.end(), {{b.x_min, b.y_min}, {b.x_max, b.y_min}, {b.x_max, b.y_max}, {b.x_min, b.y_max}});
      }
    }
    rp.mean_confidence = conf / static_cast<double>(members.size());
    const Hull hull = convex_hull(pts);
    rp.hull = hull.vertices;
    const PolygonArea area = polygon_area(rp.hull, geo);
    rp.degenerate = hull.degenerate || area.degenerate;
    rp.area_px2 = area.px2;
    rp.area_m2 = area.m2;
    rp.score = rp.degenerate ? 0.0 : table.weight(rp.class_id) * static_cast<double>(members.size()) / area.m2;
    out.push_back(std::move(rp));
  }
  std::stable_sort(out.begin(), out.end(), [](const RiskPolygon& a, const RiskPolygon& b) { return a.class_id < b.class_id; });
  return out;
}

// ---------------------------------------------------------------------------
// Overlay rendering
// ---------------------------------------------------------------------------

struct Rgb8 {
  std::uint8_t r, g, b;
  friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

/// Green -> yellow -> red, linear in t in [0,1].
inline Rgb8 risk_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const auto u8 = [](double v) { return static_cast<std::uint8_t>(std::round(std::clamp(v, 0.0, 255.0))); };
  if (t <= 0.5) return {u8(510.0 * t), 255, 0};
  return {255, u8(255.0 * (2.0 - 2.0 * t)), 0};
}

struct OverlayResult {
  ImageU8 image;
  std::vector<std::string> warnings;
};

inline constexpr double kOverlayAlpha = 0.4;

namespace riskmap_detail {

inline bool inside_convex(std::span<const Point2> ccw, const Point2& p) {
  for (std::size_t i = 0, n = ccw.size(); i < n; ++i)
    if (cross(ccw[i], ccw[(i + 1) % n], p) < 0) return false;
  return true;
}

inline void put(ImageU8& img, int x, int y, Rgb8 c) {
  if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return;
  img.at(0, y, x) = c.r;
  img.at(1, y, x) = c.g;
  img.at(2, y, x) = c.b;
}

// Bresenham; pixels outside the image are skipped.
inline void line(ImageU8& img, Point2 a, Point2 b, Rgb8 c) {
  int x0 = static_cast<int>(std::floor(a.x)), y0 = static_cast<int>(std::floor(a.y));
  const int x1 = static_cast<int>(std::floor(b.x)), y1 = static_cast<int>(std::floor(b.y));
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    put(img, x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

} // namespace riskmap_detail

/// Blends each hull interior (pixel centers inside the hull) with its risk
/// color, then draws 1px hull edges. Scores are normalized by the maximum
/// score present. Pixels outside every hull are untouched.
inline OverlayResult render_overlay(const ImageU8& src, std::span<const RiskPolygon> polys) {
  OverlayResult res{src, {}};
  double max_score = 0.0;
  for (const auto& p : polys) max_score = std::max(max_score, p.score);

  for (std::size_t k = 0; k < polys.size(); ++k) {
    const auto& poly = polys[k];
    if (poly.hull.empty()) continue;
    for (const auto& v : poly.hull)
      if (v.x < 0 || v.y < 0 || v.x > src.width() || v.y > src.height()) {
        res.warnings.push_back("polygon " + std::to_string(k) + " has vertices outside the image; clipped");
        break;
      }
    const Rgb8 color = risk_color(max_score > 0 ? poly.score / max_score : 0.0);

    if (!poly.degenerate && poly.hull.size() >= 3) {
      double x_lo = poly.hull[0].x, x_hi = x_lo, y_lo = poly.hull[0].y, y_hi = y_lo;
      for (const auto& v : poly.hull) {
        x_lo = std::min(x_lo, v.x), x_hi = std::max(x_hi, v.x);
        y_lo = std::min(y_lo, v.y), y_hi = std::max(y_hi, v.y);
      }
      const int xa = std::max(0, static_cast<int>(std::floor(x_lo))), xb = std::min(src.width() - 1, static_cast<int>(std::ceil(x_hi)));
      const int ya = std::max(0, static_cast<int>(std::floor(y_lo))), yb = std::min(src.height() - 1, static_cast<int>(std::ceil(y_hi)));
      const std::array<std::uint8_t, 3> rgb{color.r, color.g, color.b};
      for (int y = ya; y <= yb; ++y)
        for (int x = xa; x <= xb; ++x) {
          if (!riskmap_detail::inside_convex(poly.hull, {x + 0.5, y + 0.5})) continue;
          for (int c = 0; c < 3; ++c) {
            const double v = (1.0 - kOverlayAlpha) * src.at(c, y, x) + kOverlayAlpha * rgb[static_cast<std::size_t>(c)];
            res.image.at(c, y, x) = static_cast<std::uint8_t>(std::round(v));
          }
        }
    }
    const std::size_t n = poly.hull.size();
    if (n == 1) riskmap_detail::line(res.image, poly.hull[0], poly.hull[0], color);
    for (std::size_t i = 0; n >= 2 && i < (n == 2 ? 1 : n); ++i)
      riskmap_detail::line(res.image, poly.hull[i], poly.hull[(i + 1) % n], color);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

/// RFC 7946 FeatureCollection in lon/lat. Polygon rings are closed;
/// degenerate hulls become Point or LineString features.
inline nlohmann::ordered_json geojson(std::span<const RiskPolygon> polys, const GeoRef& geo,
                                      const std::map<std::int64_t, std::string>& names = {}) {
  using oj = nlohmann::ordered_json;
  geo.validate();
  oj fc;
  fc["type"] = "FeatureCollection";
  fc["risk_convention"] = kRiskFormula;
  oj features = oj::array();
  for (const auto& p : polys) {
    if (p.hull.empty()) continue;
    oj coords = oj::array();
    for (const auto& v : p.hull) {
      const auto ll = geo.to_lonlat(v);
      coords.push_back({ll[0], ll[1]});
    }
    oj geom;
    if (p.hull.size() == 1) {
      geom = {{"type", "Point"}, {"coordinates", coords[0]}};
    } else if (p.degenerate || p.hull.size() == 2) {
      geom = {{"type", "LineString"}, {"coordinates", coords}};
    } else {
      coords.push_back(coords[0]);
      geom = {{"type", "Polygon"}, {"coordinates", oj::array({coords})}};
    }
    const auto it = names.find(p.class_id);
    oj props = {{"class", it != names.end() ? oj(it->second) : oj(std::to_string(p.class_id))},
                {"class_id", p.class_id},
                {"score", p.score},
                {"area_m2", p.area_m2},
                {"mean_confidence", p.mean_confidence},
                {"detections", p.members.size()},
                {"degenerate", p.degenerate}};
    features.push_back({{"type", "Feature"}, {"geometry", geom}, {"properties", props}});
  }
  fc["features"] = features;
  return fc;
}

inline std::string export_geojson(std::span<const RiskPolygon> polys, const GeoRef& geo,
                                  const std::map<std::int64_t, std::string>& names = {}) {
  return geojson(polys, geo, names).dump(2) + "\n";
}

inline nlohmann::ordered_json risk_report_json(std::span<const RiskPolygon> polys, const GeoRef& geo,
                                               const std::map<std::int64_t, std::string>& names = {}) {
  using oj = nlohmann::ordered_json;
  oj r;
  r["risk_formula"] = kRiskFormula;
  r["weights_are_normative"] = false;
  r["georef"] = {{"origin_lat", geo.origin_lat},
                 {"origin_lon", geo.origin_lon},
                 {"meters_per_pixel_x", geo.meters_per_pixel_x},
                 {"meters_per_pixel_y", geo.meters_per_pixel_y}};
  oj arr = oj::array();
  for (const auto& p : polys) {
    oj hull = oj::array();
    for (const auto& v : p.hull) hull.push_back({v.x, v.y});
    const auto it = names.find(p.class_id);
    arr.push_back({{"class_id", p.class_id},
                   {"class", it != names.end() ? it->second : std::to_string(p.class_id)},
                   {"hull_px", hull},
                   {"members", p.members},
                   {"mean_confidence", p.mean_confidence},
                   {"area_px2", p.area_px2},
                   {"area_m2", p.area_m2},
                   {"score", p.score},
                   {"degenerate", p.degenerate}});
  }
  r["polygons"] = arr;
  return r;
}

} // namespace firerisk
