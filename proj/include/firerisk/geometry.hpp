#pragma once

#include <algorithm>
#include <string>

#include "firerisk/error.hpp"

namespace firerisk {

struct Point2 {
  double x = 0;
  double y = 0;
  friend bool operator==(const Point2&, const Point2&) = default;
  friend auto operator<=>(const Point2&, const Point2&) = default;
};

/// Axis-aligned box in corner form.
struct BBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  static BBox from_xywh(double x, double y, double w, double h) { return {x, y, x + w, y + h}; }

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }
  Point2 center() const noexcept { return {(x_min + x_max) / 2, (y_min + y_max) / 2}; }
  bool valid() const noexcept { return x_min < x_max && y_min < y_max; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

inline void require_valid(const BBox& b, const char* op) {
  if (!b.valid())
    throw DomainError(std::string(op) + ": degenerate box [" + std::to_string(b.x_min) + "," +
                      std::to_string(b.y_min) + "," + std::to_string(b.x_max) + "," +
                      std::to_string(b.y_max) + "]");
}

/// Intersection over union of two non-degenerate boxes.
inline double iou(const BBox& a, const BBox& b) {
  require_valid(a, "iou");
  require_valid(b, "iou");
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

} // namespace firerisk
