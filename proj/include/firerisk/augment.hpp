#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "firerisk/error.hpp"
#include "firerisk/geometry.hpp"
#include "firerisk/image.hpp"
#include "firerisk/rng.hpp"

namespace firerisk {

/// Anything with width/height/channels and at(c, y, x): ImageU8 and ImageF.
template <class Img>
concept PlanarAccess = requires(Img& img, const Img& cimg) {
  typename Img::value_type;
  { cimg.width() } -> std::convertible_to<int>;
  { cimg.height() } -> std::convertible_to<int>;
  { cimg.channels() } -> std::convertible_to<int>;
  { img.at(0, 0, 0) } -> std::same_as<typename Img::value_type&>;
};

struct LabeledBox {
  BBox box;
  int class_id = 0;
  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

template <PlanarAccess Img>
struct AnnotatedImage {
  Img image;
  std::vector<LabeledBox> boxes;

  friend bool operator==(const AnnotatedImage&, const AnnotatedImage&) = default;
};

template <PlanarAccess Img>
bool boxes_within_bounds(const AnnotatedImage<Img>& a) {
  return std::all_of(a.boxes.begin(), a.boxes.end(), [&](const LabeledBox& b) {
    return b.box.x_min >= 0 && b.box.y_min >= 0 && b.box.x_max <= a.image.width() &&
           b.box.y_max <= a.image.height();
  });
}

// ---------------------------------------------------------------------------
// Random erasing
// ---------------------------------------------------------------------------

enum class FillMode { RandomPerPixel, Constant };

struct EraseConfig {
  double probability = 0.5;
  double area_lo = 0.02;  // fraction of image area
  double area_hi = 0.4;
  double aspect_lo = 0.3;
  double aspect_hi = 3.33;
  FillMode fill_mode = FillMode::RandomPerPixel;
  double fill_value = 0.0;  // normalized [0,1]; used by FillMode::Constant
  int max_attempts = 100;

  void validate() const {
    std::vector<std::string> bad;
    if (!(probability >= 0 && probability <= 1)) bad.push_back("erase probability must be in [0,1]");
    if (!(area_lo >= 0 && area_lo <= area_hi && area_hi <= 1))
      bad.push_back("erase area range must satisfy 0 <= lo <= hi <= 1");
    if (!(aspect_lo > 0 && aspect_lo <= aspect_hi)) bad.push_back("erase aspect range must satisfy 0 < lo <= hi");
    if (max_attempts < 1) bad.push_back("erase max_attempts must be >= 1");
    if (!bad.empty()) throw ConfigError(bad.front() + (bad.size() > 1 ? " (and more)" : ""));
  }
};

struct EraseRecord {
  bool applied = false;
  int x = 0, y = 0, width = 0, height = 0;
  std::uint64_t fill_seed = 0;
  int attempts = 0;

  friend bool operator==(const EraseRecord&, const EraseRecord&) = default;
};

namespace augment_detail {

template <class T>
T random_fill_value(Rng& rng) {
  if constexpr (std::is_floating_point_v<T>)
    return static_cast<T>(rng.uniform());
  else
    return static_cast<T>(rng.uniform_int(0, 255));
}

template <class T>
T constant_fill_value(double v) {
  if constexpr (std::is_floating_point_v<T>)
    return static_cast<T>(v);
  else
    return static_cast<T>(quantize_unit(v));
}

} // namespace augment_detail

/// Overwrites one random rectangle with noise or a constant, with
/// probability cfg.probability. Boxes are left unchanged.
///
/// A candidate rectangle is accepted only when it fits inside the image and
/// its integer area fraction stays in [area_lo, area_hi]; otherwise another
/// draw is made, up to max_attempts. Exhausting the attempts is not an
/// error; the record just says nothing was applied.
template <PlanarAccess Img>
std::pair<AnnotatedImage<Img>, EraseRecord> random_erase(AnnotatedImage<Img> in, const EraseConfig& cfg,
                                                         Rng& rng) {
  cfg.validate();
  EraseRecord rec;
  if (!(rng.uniform() < cfg.probability)) return {std::move(in), rec};

  const int W = in.image.width(), H = in.image.height();
  const double total = static_cast<double>(W) * H;
  for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
    rec.attempts = attempt;
    const double target = rng.uniform(cfg.area_lo, cfg.area_hi) * total;
    const double aspect = rng.uniform(cfg.aspect_lo, cfg.aspect_hi);
    const auto w = static_cast<int>(std::round(std::sqrt(target * aspect)));
    const auto h = static_cast<int>(std::round(std::sqrt(target / aspect)));
    if (w < 1 || h < 1 || w > W || h > H) continue;
    const double frac = static_cast<double>(w) * h / total;
    if (frac < cfg.area_lo || frac > cfg.area_hi) continue;

    rec.applied = true;
    rec.width = w;
    rec.height = h;
    rec.x = static_cast<int>(rng.uniform_int(0, W - w));
    rec.y = static_cast<int>(rng.uniform_int(0, H - h));
    rec.fill_seed = rng.next_u64();
    break;
  }
  if (!rec.applied) return {std::move(in), rec};

  using T = typename Img::value_type;
  Rng fill(rec.fill_seed);
  const T constant = augment_detail::constant_fill_value<T>(cfg.fill_value);
  for (int c = 0; c < in.image.channels(); ++c)
    for (int y = rec.y; y < rec.y + rec.height; ++y)
      for (int x = rec.x; x < rec.x + rec.width; ++x)
        in.image.at(c, y, x) =
            cfg.fill_mode == FillMode::RandomPerPixel ? augment_detail::random_fill_value<T>(fill) : constant;
  return {std::move(in), rec};
}

// ---------------------------------------------------------------------------
// Multiscale sampling and resize
// ---------------------------------------------------------------------------

/// (long side, short side) target pair in pixels.
struct ScalePair {
  int long_side = 0;
  int short_side = 0;
  friend bool operator==(const ScalePair&, const ScalePair&) = default;
};

struct ScaleRange {
  ScalePair min{1333, 800};
  ScalePair max{1666, 1000};

  void validate() const {
    if (min.long_side < 1 || min.short_side < 1 || min.long_side > max.long_side ||
        min.short_side > max.short_side)
      throw ConfigError("scale range must satisfy 1 <= min <= max on both sides");
  }
};

enum class ScaleMode { Continuous, Discrete };

/// Linear interpolation between the two pairs at t in [0,1].
inline ScalePair scale_at(const ScaleRange& r, double t) {
  const auto lerp = [t](int a, int b) { return static_cast<int>(std::round(a + t * (b - a))); };
  return {lerp(r.min.long_side, r.max.long_side), lerp(r.min.short_side, r.max.short_side)};
}

/// Continuous mode draws t uniformly from [0,1] (both ends reachable);
/// discrete mode picks one of the two endpoint pairs.
inline ScalePair sample_scale(const ScaleRange& r, Rng& rng, ScaleMode mode = ScaleMode::Continuous) {
  r.validate();
  if (mode == ScaleMode::Discrete) return rng.uniform_int(0, 1) == 0 ? r.min : r.max;
  return scale_at(r, rng.uniform_closed());
}

/// Scale factor that fits the image inside (long_side, short_side).
inline double fit_scale(int width, int height, ScalePair target) {
  return std::min(static_cast<double>(target.long_side) / std::max(width, height),
                  static_cast<double>(target.short_side) / std::min(width, height));
}

/// Bilinear resample with half-pixel centers; edge pixels are replicated.
template <PlanarAccess Img>
Img resize_bilinear(const Img& src, int new_w, int new_h) {
  using T = typename Img::value_type;
  Img out = [&] {
    if constexpr (std::is_same_v<Img, ImageF>)
      return ImageF(new_w, new_h, src.channels(), src.space());
    else
      return Img(new_w, new_h);
  }();
  const int W = src.width(), H = src.height();
  const double sx = static_cast<double>(W) / new_w, sy = static_cast<double>(H) / new_h;
  for (int y = 0; y < new_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(H - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, H - 1);
    const double wy = fy - y0;
    for (int x = 0; x < new_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(W - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, W - 1);
      const double wx = fx - x0;
      for (int c = 0; c < src.channels(); ++c) {
        const double top = src.at(c, y0, x0) * (1 - wx) + src.at(c, y0, x1) * wx;
        const double bot = src.at(c, y1, x0) * (1 - wx) + src.at(c, y1, x1) * wx;
        const double v = top * (1 - wy) + bot * wy;
        if constexpr (std::is_floating_point_v<T>)
          out.at(c, y, x) = static_cast<T>(v);
        else
          out.at(c, y, x) = static_cast<T>(std::clamp(std::round(v), 0.0, 255.0));
      }
    }
  }
  return out;
}

/// Resizes so the image fits (long, short) preserving aspect ratio, and
/// scales every box by the same factor, clamped to the new bounds.
template <PlanarAccess Img>
AnnotatedImage<Img> resize_with_boxes(const AnnotatedImage<Img>& in, ScalePair target) {
  if (target.long_side < 1 || target.short_side < 1)
    throw ConfigError("resize target sides must be >= 1");
  const int W = in.image.width(), H = in.image.height();
  const double s = fit_scale(W, H, target);
  const auto new_w = static_cast<int>(std::round(s * W));
  const auto new_h = static_cast<int>(std::round(s * H));
  if (new_w < 1 || new_h < 1)
    throw ShapeError("resize_with_boxes: degenerate result " + std::to_string(new_w) + "x" +
                     std::to_string(new_h));

  AnnotatedImage<Img> out;
  out.image = (new_w == W && new_h == H) ? in.image : resize_bilinear(in.image, new_w, new_h);
  out.boxes.reserve(in.boxes.size());
  for (const auto& lb : in.boxes) {
    const BBox& b = lb.box;
    out.boxes.push_back({{std::clamp(b.x_min * s, 0.0, double(new_w)), std::clamp(b.y_min * s, 0.0, double(new_h)),
                          std::clamp(b.x_max * s, 0.0, double(new_w)), std::clamp(b.y_max * s, 0.0, double(new_h))},
                         lb.class_id});
  }
  return out;
}

} // namespace firerisk
