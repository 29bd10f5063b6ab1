#pragma once

// Detection evaluation: greedy confidence-ranked matching, precision/recall
// curves, interpolated AP, dataset-wide per-class mAP over an IoU grid, and
// the per-image, per-object mean
//
//   mAP = 1/Q * sum_q 1/M_q * sum_m AP_qm
//
// where AP_qm is the AP of object m's class computed within image q.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "firerisk/dataset.hpp"
#include "firerisk/error.hpp"
#include "firerisk/geometry.hpp"

namespace firerisk {

struct Detection {
  std::int64_t image_id = 0;
  std::int64_t class_id = 0;
  BBox bbox;
  double confidence = 0.0;
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundTruthBox {
  std::int64_t image_id = 0;
  std::int64_t class_id = 0;
  BBox bbox;
  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

/// Indices of `dets` by descending confidence; ties keep input order.
inline std::vector<std::size_t> rank_by_confidence(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });
  return order;
}

/// TP/FP label per detection (indexed like `dets`). All inputs must share
/// one image and class. Detections are visited by rank; each takes the
/// still-unmatched GT with the highest IoU >= threshold (ties: first GT).
inline std::vector<bool> match_detections(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                                          double iou_threshold) {
  std::vector<bool> tp(dets.size(), false);
  std::vector<bool> used(gts.size(), false);
  for (std::size_t d : rank_by_confidence(dets)) {
    double best = -1.0;
    std::size_t best_g = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const double o = iou(dets[d].bbox, gts[g].bbox);
      if (o >= iou_threshold && o > best) {
        best = o;
        best_g = g;
      }
    }
    if (best_g < gts.size()) {
      used[best_g] = true;
      tp[d] = true;
    }
  }
  return tp;
}

struct PRCurve {
  std::vector<double> recall;     // nondecreasing
  std::vector<double> precision;
  std::size_t num_gt = 0;
};

/// Curve from TP flags listed in rank order.
inline PRCurve pr_curve(const std::vector<bool>& ranked_tp, std::size_t num_gt) {
  PRCurve c;
  c.num_gt = num_gt;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ranked_tp.size(); ++i) {
    if (ranked_tp[i]) ++tp;
    c.recall.push_back(num_gt ? static_cast<double>(tp) / static_cast<double>(num_gt) : 0.0);
    c.precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  return c;
}

enum class Interpolation { AllPoints, Point11, Point101 };

inline std::optional<Interpolation> parse_interpolation(std::string_view s) {
  if (s == "all" || s == "all-points") return Interpolation::AllPoints;
  if (s == "11" || s == "11-point") return Interpolation::Point11;
  if (s == "101" || s == "101-point") return Interpolation::Point101;
  return std::nullopt;
}

inline std::string_view to_string(Interpolation i) {
  switch (i) {
    case Interpolation::AllPoints: return "all-points";
    case Interpolation::Point11: return "11-point";
    case Interpolation::Point101: return "101-point";
  }
  return "?";
}

/// Average precision; nullopt when the class has no ground truth.
inline std::optional<double> average_precision(const PRCurve& c, Interpolation mode = Interpolation::AllPoints) {
  if (c.num_gt == 0) return std::nullopt;
  const std::size_t n = c.recall.size();
  if (n == 0) return 0.0;
  // Precision envelope: max precision at any rank at or after i.
  std::vector<double> env(c.precision);
  for (std::size_t i = n - 1; i-- > 0;) env[i] = std::max(env[i], env[i + 1]);

  if (mode == Interpolation::AllPoints) {
    double ap = 0.0, prev_r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (c.recall[i] > prev_r) {
        ap += (c.recall[i] - prev_r) * env[i];
        prev_r = c.recall[i];
      }
    }
    return ap;
  }
  const int steps = mode == Interpolation::Point11 ? 10 : 100;
  double sum = 0.0;
  for (int k = 0; k <= steps; ++k) {
    const double r = static_cast<double>(k) / steps;
    const auto it = std::lower_bound(c.recall.begin(), c.recall.end(), r - 1e-12);
    if (it != c.recall.end()) sum += env[static_cast<std::size_t>(it - c.recall.begin())];
  }
  return sum / (steps + 1);
}

inline std::optional<double> ap_all_points(const PRCurve& c) { return average_precision(c, Interpolation::AllPoints); }

/// Evenly spaced IoU thresholds from lo to hi inclusive, snapped to 1e-9.
inline std::vector<double> threshold_grid(double lo, double hi, double step) {
  if (!(step > 0) || !(lo <= hi) || lo < 0 || hi > 1) throw ConfigError("IoU grid must satisfy 0 <= lo <= hi <= 1, step > 0");
  const auto count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(std::round((lo + i * step) * 1e9) / 1e9);
  return out;
}

/// AP of one class pooled over all images at one threshold.
inline std::optional<double> class_ap(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                                      std::int64_t class_id, double threshold,
                                      Interpolation mode = Interpolation::AllPoints) {
  std::map<std::int64_t, std::vector<std::size_t>> det_by_image, gt_by_image;
  std::vector<Detection> cls_dets;
  std::size_t num_gt = 0;
  for (const auto& d : dets)
    if (d.class_id == class_id) cls_dets.push_back(d);
  for (std::size_t i = 0; i < cls_dets.size(); ++i) det_by_image[cls_dets[i].image_id].push_back(i);
  std::map<std::int64_t, std::vector<GroundTruthBox>> gts_of;
  for (const auto& g : gts)
    if (g.class_id == class_id) {
      gts_of[g.image_id].push_back(g);
      ++num_gt;
    }
  std::vector<bool> tp(cls_dets.size(), false);
  for (const auto& [img, idx] : det_by_image) {
    std::vector<Detection> local;
    for (auto i : idx) local.push_back(cls_dets[i]);
    const auto git = gts_of.find(img);
    const std::span<const GroundTruthBox> local_gt =
        git == gts_of.end() ? std::span<const GroundTruthBox>{} : std::span<const GroundTruthBox>(git->second);
    const auto flags = match_detections(local, local_gt, threshold);
    for (std::size_t k = 0; k < idx.size(); ++k) tp[idx[k]] = flags[k];
  }
  std::vector<bool> ranked;
  for (auto i : rank_by_confidence(cls_dets)) ranked.push_back(tp[i]);
  return average_precision(pr_curve(ranked, num_gt), mode);
}

struct ClassResult {
  std::int64_t class_id = 0;
  std::string name;
  std::size_t num_gt = 0;
  std::size_t num_detections = 0;
  std::vector<std::optional<double>> ap;  // per threshold; nullopt when num_gt == 0
  std::optional<double> ap50;
  bool excluded() const { return num_gt == 0; }
};

struct EvalReport {
  std::vector<double> thresholds;
  Interpolation interpolation = Interpolation::AllPoints;
  std::vector<ClassResult> classes;
  std::vector<double> map_per_threshold;  // mean over non-excluded classes
  double map50 = 0.0;
  double map_range = 0.0;  // mean of map_per_threshold
  double eq1_map50 = 0.0;
  double eq1_map_range = 0.0;
  std::size_t num_images = 0;  // images with at least one GT object
  std::size_t num_gt = 0;
  std::size_t num_detections = 0;
};

/// Per-image, per-object mean of class AP computed within each image.
/// Images without ground truth are skipped.
inline double map_eq1(std::span<const Detection> dets, std::span<const GroundTruthBox> gts, double threshold,
                      Interpolation mode = Interpolation::AllPoints) {
  std::map<std::int64_t, std::vector<Detection>> dets_of;
  std::map<std::int64_t, std::vector<GroundTruthBox>> gts_of;
  for (const auto& d : dets) dets_of[d.image_id].push_back(d);
  for (const auto& g : gts) gts_of[g.image_id].push_back(g);
  if (gts_of.empty()) throw Error("map_eq1: no image has ground-truth objects");

  double total = 0.0;
  for (const auto& [img, img_gts] : gts_of) {
    const auto& img_dets = dets_of[img];
    std::map<std::int64_t, std::size_t> per_class;
    for (const auto& g : img_gts) ++per_class[g.class_id];
    double object_sum = 0.0;
    for (const auto& [cls, count] : per_class)
      object_sum += static_cast<double>(count) * class_ap(img_dets, img_gts, cls, threshold, mode).value();
    total += object_sum / static_cast<double>(img_gts.size());
  }
  return total / static_cast<double>(gts_of.size());
}

/// Standard dataset-wide evaluation over `thresholds`, with the
/// per-image/per-object variant reported alongside. Classes without ground
/// truth are listed but excluded from every mean.
inline EvalReport evaluate(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                           std::vector<double> thresholds, Interpolation mode = Interpolation::AllPoints,
                           const std::map<std::int64_t, std::string>& names = {}) {
  if (gts.empty()) throw Error("evaluate: ground-truth set is empty for every class");
  if (thresholds.empty()) throw ConfigError("evaluate: empty IoU threshold set");
  EvalReport r;
  r.thresholds = std::move(thresholds);
  r.interpolation = mode;
  r.num_gt = gts.size();
  r.num_detections = dets.size();

  std::set<std::int64_t> class_ids, images;
  for (const auto& g : gts) {
    class_ids.insert(g.class_id);
    images.insert(g.image_id);
  }
  for (const auto& d : dets) class_ids.insert(d.class_id);
  for (const auto& [id, _] : names) class_ids.insert(id);
  r.num_images = images.size();

  for (auto cls : class_ids) {
    ClassResult cr;
    cr.class_id = cls;
    if (auto it = names.find(cls); it != names.end()) cr.name = it->second;
    cr.num_gt = static_cast<std::size_t>(std::count_if(gts.begin(), gts.end(), [cls](const auto& g) { return g.class_id == cls; }));
    cr.num_detections = static_cast<std::size_t>(std::count_if(dets.begin(), dets.end(), [cls](const auto& d) { return d.class_id == cls; }));
    for (double t : r.thresholds) cr.ap.push_back(class_ap(dets, gts, cls, t, mode));
    cr.ap50 = class_ap(dets, gts, cls, 0.5, mode);
    r.classes.push_back(std::move(cr));
  }

  const auto mean_over_classes = [&](auto get) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& c : r.classes)
      if (!c.excluded()) {
        s += get(c);
        ++n;
      }
    return s / static_cast<double>(n);
  };
  for (std::size_t t = 0; t < r.thresholds.size(); ++t)
    r.map_per_threshold.push_back(mean_over_classes([t](const ClassResult& c) { return *c.ap[t]; }));
  r.map50 = mean_over_classes([](const ClassResult& c) { return *c.ap50; });
  r.map_range = std::accumulate(r.map_per_threshold.begin(), r.map_per_threshold.end(), 0.0) /
                static_cast<double>(r.map_per_threshold.size());

  r.eq1_map50 = map_eq1(dets, gts, 0.5, mode);
  double eq1_sum = 0.0;
  for (double t : r.thresholds) eq1_sum += map_eq1(dets, gts, t, mode);
  r.eq1_map_range = eq1_sum / static_cast<double>(r.thresholds.size());
  return r;
}

// ---------------------------------------------------------------------------
// Interchange
// ---------------------------------------------------------------------------

inline std::vector<GroundTruthBox> ground_truth_boxes(const AnnotationSet& set) {
  std::vector<GroundTruthBox> out;
  out.reserve(set.annotations.size());
  for (const auto& a : set.annotations) out.push_back({a.image_id, a.category_id, a.bbox()});
  return out;
}

inline std::map<std::int64_t, std::string> category_names(const AnnotationSet& set) {
  std::map<std::int64_t, std::string> m;
  for (const auto& c : set.categories) m[c.id] = c.name;
  return m;
}

/// Parses COCO results `[{image_id, category_id, bbox:[x,y,w,h], score}]`.
inline std::vector<Detection> parse_detections(std::string_view text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError({std::string("invalid detections JSON: ") + e.what()});
  }
  if (!root.is_array()) throw ValidationError({"detections file must be a JSON array"});
  std::vector<std::string> bad;
  std::vector<Detection> out;
  std::size_t i = 0;
  for (const auto& j : root) {
    const std::string where = "detections[" + std::to_string(i++) + "]";
    auto img = dataset_detail::field<std::int64_t>(j, "image_id", where, bad);
    auto cat = dataset_detail::field<std::int64_t>(j, "category_id", where, bad);
    auto box = dataset_detail::field<std::vector<double>>(j, "bbox", where, bad);
    auto score = dataset_detail::field<double>(j, "score", where, bad);
    if (!img || !cat || !box || !score) continue;
    if (box->size() != 4 || !((*box)[2] > 0 && (*box)[3] > 0)) {
      bad.push_back(where + ": bbox must be [x,y,w,h] with w,h > 0");
      continue;
    }
    if (!std::isfinite(*score)) {
      bad.push_back(where + ": score must be finite");
      continue;
    }
    out.push_back({*img, *cat, BBox::from_xywh((*box)[0], (*box)[1], (*box)[2], (*box)[3]), *score});
  }
  if (!bad.empty()) throw ValidationError(std::move(bad));
  return out;
}

/// Checks detections against the dataset's images and categories.
inline void validate_detections(std::span<const Detection> dets, const AnnotationSet& set) {
  std::vector<std::string> bad;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (!set.find_image(dets[i].image_id))
      bad.push_back("detections[" + std::to_string(i) + "] references unknown image_id " +
                    std::to_string(dets[i].image_id));
    if (!set.category_name(dets[i].class_id))
      bad.push_back("detections[" + std::to_string(i) + "] references unknown category_id " +
                    std::to_string(dets[i].class_id));
  }
  if (!bad.empty()) throw ValidationError(std::move(bad));
}

inline nlohmann::ordered_json report_json(const EvalReport& r) {
  using oj = nlohmann::ordered_json;
  const auto opt = [](const std::optional<double>& v) { return v ? oj(*v) : oj(nullptr); };
  oj j;
  j["protocol"] = {
      {"interpolation", std::string(to_string(r.interpolation))},
      {"matching", "greedy by descending confidence (ties: input order); best unmatched GT with IoU >= threshold"},
      {"class_mean", "classes without ground truth are excluded from every mean"},
      {"per_image_map", "mean over images with GT of the mean over GT objects of the AP of the object's class within that image"},
  };
  j["iou_thresholds"] = r.thresholds;
  j["counts"] = {{"images_with_gt", r.num_images}, {"ground_truth", r.num_gt}, {"detections", r.num_detections}};
  oj classes = oj::array();
  oj excluded = oj::array();
  for (const auto& c : r.classes) {
    oj aps = oj::array();
    for (const auto& a : c.ap) aps.push_back(opt(a));
    classes.push_back({{"class_id", c.class_id},
                       {"name", c.name},
                       {"num_gt", c.num_gt},
                       {"num_detections", c.num_detections},
                       {"excluded", c.excluded()},
                       {"ap50", opt(c.ap50)},
                       {"ap_per_threshold", aps}});
    if (c.excluded()) excluded.push_back(c.class_id);
  }
  j["classes"] = classes;
  j["excluded_classes"] = excluded;
  j["map_per_threshold"] = r.map_per_threshold;
  j["map50"] = r.map50;
  j["map_range"] = r.map_range;
  j["per_image_map50"] = r.eq1_map50;
  j["per_image_map_range"] = r.eq1_map_range;
  return j;
}

inline std::string report_csv(const EvalReport& r) {
  const auto num = [](std::optional<double> v) {
    if (!v) return std::string("NA");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return std::string(buf);
  };
  std::string out = "class_id,name,num_gt,num_detections,ap50,ap_range\n";
  for (const auto& c : r.classes) {
    std::optional<double> range;
    if (!c.excluded()) {
      double s = 0;
      for (const auto& a : c.ap) s += *a;
      range = s / static_cast<double>(c.ap.size());
    }
    out += std::to_string(c.class_id) + "," + c.name + "," + std::to_string(c.num_gt) + "," +
           std::to_string(c.num_detections) + "," + num(c.ap50) + "," + num(range) + "\n";
  }
  out += "all,mAP," + std::to_string(r.num_gt) + "," + std::to_string(r.num_detections) + "," + num(r.map50) + "," +
         num(r.map_range) + "\n";
  out += "all,per_image_mAP," + std::to_string(r.num_gt) + "," + std::to_string(r.num_detections) + "," +
         num(r.eq1_map50) + "," + num(r.eq1_map_range) + "\n";
  return out;
}

} // namespace firerisk
