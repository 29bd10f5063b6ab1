#pragma once

// Command-line front end. Every subcommand resolves an effective Settings
// (defaults < --config JSON < explicit flags), does its work through the
// library, and writes a manifest next to its outputs.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <jpeglib.h>
#include <nlohmann/json.hpp>
#include <png.h>

#include "firerisk/augment.hpp"
#include "firerisk/cbam.hpp"
#include "firerisk/codec.hpp"
#include "firerisk/colorspace.hpp"
#include "firerisk/dataset.hpp"
#include "firerisk/detect_eval.hpp"
#include "firerisk/riskmap.hpp"

namespace firerisk::cli {

inline constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

enum class Exit { Ok = 0, Failure = 1, Usage = 2 };

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Closest candidate within a small edit distance, if any.
inline std::optional<std::string> suggest(std::string_view word, const std::vector<std::string>& candidates) {
  std::optional<std::string> best;
  std::size_t best_d = std::max<std::size_t>(2, word.size() / 3) + 1;
  for (const auto& c : candidates) {
    const auto d = edit_distance(word, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::array<double, 2> parse_pair(const std::string& s, const char* what) {
  const auto comma = s.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument(s);
    std::size_t used_a = 0, used_b = 0;
    const double a = std::stod(s.substr(0, comma), &used_a);
    const double b = std::stod(s.substr(comma + 1), &used_b);
    if (used_a != comma || used_b != s.size() - comma - 1) throw std::invalid_argument(s);
    return {a, b};
  } catch (const std::exception&) {
    throw ConfigError(std::string(what) + " expects 'lo,hi', got '" + s + "'");
  }
}

/// Runs fn(i) for i in [0, n) on `threads` workers. Each item's exception
/// message is returned in its slot; results never depend on scheduling.
template <class Fn>
std::vector<std::optional<std::string>> parallel_for(std::size_t n, unsigned threads, Fn fn) {
  std::vector<std::optional<std::string>> errors(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return errors;
}

// ---------------------------------------------------------------------------
// Settings
// ---------------------------------------------------------------------------

enum class ScaleChoice { None, Continuous, Discrete };

struct Settings {
  std::uint64_t seed = 0;

  std::string annotations, images, detections, image;

  ColorSpace color_to = ColorSpace::SRGB;
  DisplayNormalization normalize = DisplayNormalization::Fixed;

  EraseConfig erase;
  ScaleChoice scale_mode = ScaleChoice::Continuous;
  ScaleRange scale;
  std::vector<std::string> order{"convert", "erase", "scale"};

  double iou_min = 0.2, iou_max = 0.95, iou_step = 0.05;
  Interpolation interpolation = Interpolation::AllPoints;

  std::map<std::string, double> flammability;  // class name or id -> weight
  GeoRef georef;
  double cluster_radius = 50.0;
  HullGeometry geometry = HullGeometry::Centers;
  double min_confidence = 0.0;
};

namespace settings_detail {

inline std::string_view scale_name(ScaleChoice s) {
  switch (s) {
    case ScaleChoice::None: return "none";
    case ScaleChoice::Continuous: return "continuous";
    case ScaleChoice::Discrete: return "discrete";
  }
  return "?";
}

inline ScaleChoice parse_scale(const std::string& s) {
  if (s == "none") return ScaleChoice::None;
  if (s == "continuous") return ScaleChoice::Continuous;
  if (s == "discrete") return ScaleChoice::Discrete;
  throw ConfigError("scale mode must be none|continuous|discrete, got '" + s + "'");
}

inline std::string_view normalize_name(DisplayNormalization n) {
  switch (n) {
    case DisplayNormalization::Fixed: return "fixed";
    case DisplayNormalization::MinMax: return "minmax";
    case DisplayNormalization::Clamp: return "clamp";
  }
  return "?";
}

inline ColorSpace space_or_throw(const std::string& s) {
  if (auto c = parse_color_space(s)) return *c;
  throw ConfigError("unknown color space '" + s + "' (expected srgb|linear|log|yuv|lab)");
}

inline DisplayNormalization normalize_or_throw(const std::string& s) {
  if (auto n = parse_normalization(s)) return *n;
  throw ConfigError("unknown normalization '" + s + "' (expected fixed|minmax|clamp)");
}

inline Interpolation interpolation_or_throw(const std::string& s) {
  if (auto i = parse_interpolation(s)) return *i;
  throw ConfigError("unknown interpolation '" + s + "' (expected all|11|101)");
}

inline HullGeometry geometry_or_throw(const std::string& s) {
  if (s == "centers") return HullGeometry::Centers;
  if (s == "corners") return HullGeometry::Corners;
  throw ConfigError("hull geometry must be centers|corners, got '" + s + "'");
}

/// Rejects keys outside `allowed`, naming the closest allowed key.
inline void check_keys(const nlohmann::json& obj, const std::string& where, const std::vector<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [k, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) != allowed.end()) continue;
    std::string msg = "config: unknown key '" + (where.empty() ? k : where + "." + k) + "'";
    if (auto s = suggest(k, allowed)) msg += " (did you mean '" + *s + "'?)";
    throw ConfigError(msg);
  }
}

template <class T>
T get(const nlohmann::json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: '" + where + "." + key + "' has the wrong type");
  }
}

inline ScalePair get_pair(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto v = get<std::vector<int>>(obj, key, where);
  if (v.size() != 2) throw ConfigError("config: '" + where + "." + key + "' must be [long, short]");
  return {v[0], v[1]};
}

} // namespace settings_detail

inline void apply_config(Settings& s, const nlohmann::json& j) {
  using namespace settings_detail;
  check_keys(j, "", {"seed", "input", "color", "erase", "scale", "order", "evaluate", "riskmap"});
  if (j.contains("seed")) s.seed = get<std::uint64_t>(j, "seed", "");
  if (j.contains("input")) {
    const auto& in = j["input"];
    check_keys(in, "input", {"annotations", "images", "detections", "image"});
    if (in.contains("annotations")) s.annotations = get<std::string>(in, "annotations", "input");
    if (in.contains("images")) s.images = get<std::string>(in, "images", "input");
    if (in.contains("detections")) s.detections = get<std::string>(in, "detections", "input");
    if (in.contains("image")) s.image = get<std::string>(in, "image", "input");
  }
  if (j.contains("color")) {
    const auto& c = j["color"];
    check_keys(c, "color", {"to", "normalize"});
    if (c.contains("to")) s.color_to = space_or_throw(get<std::string>(c, "to", "color"));
    if (c.contains("normalize")) s.normalize = normalize_or_throw(get<std::string>(c, "normalize", "color"));
  }
  if (j.contains("erase")) {
    const auto& e = j["erase"];
    check_keys(e, "erase", {"p", "area", "aspect", "fill", "fill_value", "max_attempts"});
    if (e.contains("p")) s.erase.probability = get<double>(e, "p", "erase");
    if (e.contains("area")) {
      const auto a = get<std::array<double, 2>>(e, "area", "erase");
      s.erase.area_lo = a[0], s.erase.area_hi = a[1];
    }
    if (e.contains("aspect")) {
      const auto a = get<std::array<double, 2>>(e, "aspect", "erase");
      s.erase.aspect_lo = a[0], s.erase.aspect_hi = a[1];
    }
    if (e.contains("fill")) {
      const auto f = get<std::string>(e, "fill", "erase");
      if (f == "random") s.erase.fill_mode = FillMode::RandomPerPixel;
      else if (f == "constant") s.erase.fill_mode = FillMode::Constant;
      else throw ConfigError("config: erase.fill must be random|constant");
    }
    if (e.contains("fill_value")) s.erase.fill_value = get<double>(e, "fill_value", "erase");
    if (e.contains("max_attempts")) s.erase.max_attempts = get<int>(e, "max_attempts", "erase");
  }
  if (j.contains("scale")) {
    const auto& sc = j["scale"];
    check_keys(sc, "scale", {"mode", "min", "max"});
    if (sc.contains("mode")) s.scale_mode = parse_scale(get<std::string>(sc, "mode", "scale"));
    if (sc.contains("min")) s.scale.min = get_pair(sc, "min", "scale");
    if (sc.contains("max")) s.scale.max = get_pair(sc, "max", "scale");
  }
  if (j.contains("order")) s.order = get<std::vector<std::string>>(j, "order", "");
  if (j.contains("evaluate")) {
    const auto& ev = j["evaluate"];
    check_keys(ev, "evaluate", {"iou_min", "iou_max", "iou_step", "interpolation"});
    if (ev.contains("iou_min")) s.iou_min = get<double>(ev, "iou_min", "evaluate");
    if (ev.contains("iou_max")) s.iou_max = get<double>(ev, "iou_max", "evaluate");
    if (ev.contains("iou_step")) s.iou_step = get<double>(ev, "iou_step", "evaluate");
    if (ev.contains("interpolation"))
      s.interpolation = interpolation_or_throw(get<std::string>(ev, "interpolation", "evaluate"));
  }
  if (j.contains("riskmap")) {
    const auto& r = j["riskmap"];
    check_keys(r, "riskmap", {"flammability", "georef", "cluster_radius_px", "hull_geometry", "min_confidence"});
    if (r.contains("flammability")) s.flammability = get<std::map<std::string, double>>(r, "flammability", "riskmap");
    if (r.contains("georef")) {
      const auto& g = r["georef"];
      check_keys(g, "riskmap.georef", {"origin_lat", "origin_lon", "meters_per_pixel_x", "meters_per_pixel_y"});
      if (g.contains("origin_lat")) s.georef.origin_lat = get<double>(g, "origin_lat", "riskmap.georef");
      if (g.contains("origin_lon")) s.georef.origin_lon = get<double>(g, "origin_lon", "riskmap.georef");
      if (g.contains("meters_per_pixel_x")) s.georef.meters_per_pixel_x = get<double>(g, "meters_per_pixel_x", "riskmap.georef");
      if (g.contains("meters_per_pixel_y")) s.georef.meters_per_pixel_y = get<double>(g, "meters_per_pixel_y", "riskmap.georef");
    }
    if (r.contains("cluster_radius_px")) s.cluster_radius = get<double>(r, "cluster_radius_px", "riskmap");
    if (r.contains("hull_geometry")) s.geometry = geometry_or_throw(get<std::string>(r, "hull_geometry", "riskmap"));
    if (r.contains("min_confidence")) s.min_confidence = get<double>(r, "min_confidence", "riskmap");
  }
}

/// Config file paths are resolved against the file's directory.
inline void load_config_file(Settings& s, const fs::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(file));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + file.string() + ": " + e.what());
  }
  apply_config(s, j);
  const auto base = file.parent_path();
  for (auto* p : {&s.annotations, &s.images, &s.detections, &s.image})
    if (!p->empty() && fs::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
}

inline void validate_settings(const Settings& s) {
  s.erase.validate();
  if (s.scale.min.long_side < 1 || s.scale.min.short_side < 1 || s.scale.max.long_side < s.scale.min.long_side ||
      s.scale.max.short_side < s.scale.min.short_side)
    throw ConfigError("scale range must satisfy 1 <= min <= max per side");
  for (const auto& op : s.order)
    if (op != "convert" && op != "erase" && op != "scale")
      throw ConfigError("order entries must be convert|erase|scale, got '" + op + "'");
  threshold_grid(s.iou_min, s.iou_max, s.iou_step);
  s.georef.validate();
  if (!(s.cluster_radius > 0)) throw ConfigError("cluster radius must be > 0");
  for (const auto& [k, w] : s.flammability)
    if (!(w >= 0)) throw ConfigError("flammability weight for '" + k + "' must be >= 0");
}

inline ojson settings_json(const Settings& s) {
  using namespace settings_detail;
  ojson j;
  j["seed"] = s.seed;
  j["input"] = {{"annotations", s.annotations}, {"images", s.images}, {"detections", s.detections}, {"image", s.image}};
  j["color"] = {{"to", std::string(to_string(s.color_to))}, {"normalize", std::string(normalize_name(s.normalize))}};
  j["erase"] = {{"p", s.erase.probability},
                {"area", {s.erase.area_lo, s.erase.area_hi}},
                {"aspect", {s.erase.aspect_lo, s.erase.aspect_hi}},
                {"fill", s.erase.fill_mode == FillMode::Constant ? "constant" : "random"},
                {"fill_value", s.erase.fill_value},
                {"max_attempts", s.erase.max_attempts}};
  j["scale"] = {{"mode", std::string(scale_name(s.scale_mode))},
                {"min", {s.scale.min.long_side, s.scale.min.short_side}},
                {"max", {s.scale.max.long_side, s.scale.max.short_side}}};
  j["order"] = s.order;
  j["evaluate"] = {{"iou_min", s.iou_min},
                   {"iou_max", s.iou_max},
                   {"iou_step", s.iou_step},
                   {"interpolation", std::string(to_string(s.interpolation))}};
  ojson fl = ojson::object();
  for (const auto& [k, w] : s.flammability) fl[k] = w;
  j["riskmap"] = {{"flammability", fl},
                  {"georef",
                   {{"origin_lat", s.georef.origin_lat},
                    {"origin_lon", s.georef.origin_lon},
                    {"meters_per_pixel_x", s.georef.meters_per_pixel_x},
                    {"meters_per_pixel_y", s.georef.meters_per_pixel_y}}},
                  {"cluster_radius_px", s.cluster_radius},
                  {"hull_geometry", s.geometry == HullGeometry::Centers ? "centers" : "corners"},
                  {"min_confidence", s.min_confidence}};
  return j;
}

// ---------------------------------------------------------------------------
// Outputs and manifest
// ---------------------------------------------------------------------------

/// Writes files under `root` and remembers a content hash per file.
class OutputSet {
public:
  explicit OutputSet(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const { return root_; }

  void write(const std::string& rel, std::span<const std::uint8_t> bytes) {
    const auto path = root_ / rel;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_bytes(path, bytes);
    std::lock_guard lock(mu_);
    hashes_[rel] = fnv1a64({reinterpret_cast<const char*>(bytes.data()), bytes.size()});
  }
  void write(const std::string& rel, std::string_view text) {
    write(rel, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }

  ojson listing() const {
    ojson arr = ojson::array();
    for (const auto& [rel, h] : hashes_) arr.push_back({{"path", rel}, {"fnv1a64", hex64(h)}});
    return arr;
  }

private:
  fs::path root_;
  std::mutex mu_;
  std::map<std::string, std::uint64_t> hashes_;
};

inline ojson library_versions() {
  return {{"firerisk", kVersion},
          {"libpng", PNG_LIBPNG_VER_STRING},
          {"libjpeg", JPEG_LIB_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION}};
}

/// Manifest text: no timestamps or absolute output paths, so identical runs
/// produce identical bytes.
inline std::string manifest_text(const std::string& command, const Settings& s, const OutputSet& outputs,
                                 const ojson& extra = ojson::object()) {
  const ojson eff = settings_json(s);
  ojson m;
  m["tool"] = "firerisk";
  m["command"] = command;
  m["versions"] = library_versions();
  m["seed"] = s.seed;
  m["config_hash"] = "fnv1a64:" + hex64(fnv1a64(eff.dump()));
  m["effective_config"] = eff;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  m["outputs"] = outputs.listing();
  return m.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Shared option wiring
// ---------------------------------------------------------------------------

/// A flag whose value only overrides the config when it was given.
template <class T>
struct Flag {
  T value{};
  CLI::Option* opt = nullptr;
  bool given() const { return opt && opt->count() > 0; }
};

struct CommonFlags {
  std::string config;
  Flag<std::uint64_t> seed;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
};

inline void add_common(CLI::App* app, CommonFlags& f, bool with_threads) {
  app->add_option("--config", f.config, "JSON config file (flags override it)");
  f.seed.opt = app->add_option("--seed", f.seed.value, "global seed");
  if (with_threads) app->add_option("--threads", f.threads, "worker threads (never changes results)")->check(CLI::PositiveNumber);
}

inline Settings base_settings(const CommonFlags& f) {
  Settings s;
  if (!f.config.empty()) load_config_file(s, f.config);
  if (f.seed.given()) s.seed = f.seed.value;
  return s;
}

template <class T, class Fn>
void override_if(const Flag<T>& flag, Fn apply) {
  if (flag.given()) apply(flag.value);
}

inline void report_item_errors(const std::vector<std::optional<std::string>>& errors,
                               const std::vector<std::string>& names, std::ostream& err, int& failures) {
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (errors[i]) {
      err << "error: " << names[i] << ": " << *errors[i] << "\n";
      ++failures;
    }
}

inline std::vector<LabeledBox> boxes_of(const AnnotationSet& set, std::int64_t image_id) {
  std::vector<LabeledBox> out;
  for (const auto& a : set.annotations)
    if (a.image_id == image_id) out.push_back({a.bbox(), static_cast<int>(a.category_id)});
  return out;
}

inline std::string stem_png(const std::string& file_name) { return fs::path(file_name).stem().string() + ".png"; }

inline ImageU8 load_checked(const fs::path& dir, const ImageRecord& rec) {
  ImageU8 img = load_image(dir / rec.file_name);
  if (img.width() != rec.width || img.height() != rec.height)
    throw ValidationError({rec.file_name + " is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                           " but annotations say " + std::to_string(rec.width) + "x" + std::to_string(rec.height)});
  return img;
}

inline ojson erase_record_json(const EraseRecord& r) {
  return {{"applied", r.applied}, {"x", r.x},         {"y", r.y},
          {"width", r.width},     {"height", r.height}, {"fill_seed", r.fill_seed},
          {"attempts", r.attempts}};
}

/// One image through the configured op order. Boxes follow every op.
struct AugmentResult {
  ImageU8 image;
  std::vector<LabeledBox> boxes;
  ojson record;
};

inline AugmentResult augment_one(const ImageU8& src, std::vector<LabeledBox> boxes, std::int64_t image_id,
                                 const Settings& s, const std::vector<std::string>& order) {
  Rng rng(derive_seed(s.seed, static_cast<std::uint64_t>(image_id)));
  AnnotatedImage<ImageF> cur{u8_to_float(src), std::move(boxes)};
  ojson rec;
  rec["image_id"] = image_id;
  for (const auto& op : order) {
    if (op == "convert") {
      cur.image = convert(cur.image, s.color_to);
    } else if (op == "erase") {
      auto [next, er] = random_erase(cur, s.erase, rng);
      cur = std::move(next);
      rec["erase"] = erase_record_json(er);
    } else if (op == "scale" && s.scale_mode != ScaleChoice::None) {
      const auto target = sample_scale(s.scale, rng,
                                       s.scale_mode == ScaleChoice::Discrete ? ScaleMode::Discrete : ScaleMode::Continuous);
      cur = resize_with_boxes(cur, target);
      rec["scale"] = {{"long", target.long_side}, {"short", target.short_side}};
    }
  }
  rec["width"] = cur.image.width();
  rec["height"] = cur.image.height();
  return {float_to_u8(normalize_for_display(cur.image, s.normalize)), std::move(cur.boxes), std::move(rec)};
}

/// Annotation set rewritten with augmented sizes, boxes and PNG names.
inline AnnotationSet augmented_set(const AnnotationSet& src, const std::vector<std::optional<AugmentResult>>& results) {
  AnnotationSet out;
  out.categories = src.categories;
  std::int64_t next_id = 1;
  for (std::size_t i = 0; i < src.images.size(); ++i) {
    if (!results[i]) continue;
    const auto& r = *results[i];
    const auto& im = src.images[i];
    out.images.push_back({im.id, stem_png(im.file_name), r.image.width(), r.image.height()});
    for (const auto& b : r.boxes) {
      const double w = b.box.width(), h = b.box.height();
      if (!(w > 0 && h > 0)) continue;  // erased-to-nothing boxes cannot occur, resize can collapse slivers
      out.annotations.push_back({next_id++, im.id, b.class_id, {b.box.x_min, b.box.y_min, w, h}});
    }
  }
  return out;
}

inline FlammabilityTable flammability_table(const Settings& s, const AnnotationSet* gt) {
  FlammabilityTable t;
  for (const auto& [key, w] : s.flammability) {
    std::optional<std::int64_t> id;
    if (gt) {
      if (auto canon = canonical_category_name(key)) id = gt->category_id(*canon);
    } else if (auto canon = canonical_category_name(key)) {
      const auto it = std::find(kCanonicalCategories.begin(), kCanonicalCategories.end(), *canon);
      id = static_cast<std::int64_t>(it - kCanonicalCategories.begin()) + 1;
    }
    if (!id) {
      try {
        std::size_t used = 0;
        const long long v = std::stoll(key, &used);
        if (used == key.size()) id = v;
      } catch (const std::exception&) {
      }
    }
    if (!id) throw ConfigError("flammability key '" + key + "' is neither a known class name nor an id");
    t.weights[*id] = w;
  }
  return t;
}

inline std::map<std::int64_t, std::string> class_names(const AnnotationSet* gt) {
  if (gt) return category_names(*gt);
  std::map<std::int64_t, std::string> m;
  for (std::size_t i = 0; i < kCanonicalCategories.size(); ++i)
    m[static_cast<std::int64_t>(i) + 1] = std::string(kCanonicalCategories[i]);
  return m;
}

struct RiskOutputs {
  std::string geojson, report;
  std::vector<std::uint8_t> overlay_png;
  std::vector<std::string> warnings;
};

inline RiskOutputs risk_for_image(const ImageU8& img, std::span<const Detection> dets, const Settings& s,
                                  const FlammabilityTable& table, const std::map<std::int64_t, std::string>& names) {
  std::vector<Detection> kept;
  for (const auto& d : dets)
    if (d.confidence >= s.min_confidence) kept.push_back(d);
  const auto polys = build_risk_polygons(kept, table, s.georef, s.cluster_radius, s.geometry);
  auto overlay = render_overlay(img, polys);
  return {export_geojson(polys, s.georef, names), risk_report_json(polys, s.georef, names).dump(2) + "\n",
          encode_png(overlay.image), std::move(overlay.warnings)};
}

inline EvalReport run_evaluation(const AnnotationSet& gt, const std::vector<Detection>& dets, const Settings& s) {
  validate_detections(dets, gt);
  return evaluate(dets, ground_truth_boxes(gt), threshold_grid(s.iou_min, s.iou_max, s.iou_step), s.interpolation,
                  category_names(gt));
}

inline std::string eval_summary(const EvalReport& r) {
  ojson j{{"map50", r.map50},
          {"map_range", r.map_range},
          {"per_image_map50", r.eq1_map50},
          {"per_image_map_range", r.eq1_map_range}};
  return j.dump() + "\n";
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"firerisk: color conversion, augmentation, detection evaluation and fire-risk mapping", "firerisk"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", kVersion);

  // convert
  CommonFlags convert_common;
  Flag<std::string> convert_to, convert_norm;
  std::string convert_in, convert_out;
  auto* convert_cmd = app.add_subcommand("convert", "convert an image to another color space (8-bit display PNG)");
  add_common(convert_cmd, convert_common, false);
  convert_to.opt = convert_cmd->add_option("--to", convert_to.value, "srgb|linear|log|yuv|lab");
  convert_norm.opt = convert_cmd->add_option("--normalize", convert_norm.value, "fixed|minmax|clamp");
  convert_cmd->add_option("input", convert_in, "input PNG/JPEG")->required();
  convert_cmd->add_option("output", convert_out, "output PNG")->required();

  // augment
  CommonFlags aug_common;
  Flag<std::string> aug_gt, aug_images, aug_area, aug_aspect, aug_scale_mode, aug_scale_min, aug_scale_max;
  Flag<double> aug_p;
  std::string aug_out;
  auto* aug_cmd = app.add_subcommand("augment", "random erasing and multiscale resizing of an annotated image set");
  add_common(aug_cmd, aug_common, true);
  aug_gt.opt = aug_cmd->add_option("--gt", aug_gt.value, "annotation JSON");
  aug_images.opt = aug_cmd->add_option("--images", aug_images.value, "image directory");
  aug_cmd->add_option("--out", aug_out, "output directory")->required();
  aug_p.opt = aug_cmd->add_option("--erase-p", aug_p.value, "erase probability");
  aug_area.opt = aug_cmd->add_option("--erase-area", aug_area.value, "area fraction range lo,hi");
  aug_aspect.opt = aug_cmd->add_option("--erase-aspect", aug_aspect.value, "aspect range lo,hi");
  aug_scale_mode.opt = aug_cmd->add_option("--scale-mode", aug_scale_mode.value, "none|continuous|discrete");
  aug_scale_min.opt = aug_cmd->add_option("--scale-min", aug_scale_min.value, "smallest (long,short)");
  aug_scale_max.opt = aug_cmd->add_option("--scale-max", aug_scale_max.value, "largest (long,short)");

  // evaluate
  CommonFlags eval_common;
  Flag<std::string> eval_gt, eval_dets, eval_interp;
  Flag<double> eval_min, eval_max, eval_step;
  std::string eval_out;
  auto* eval_cmd = app.add_subcommand("evaluate", "per-class AP / mAP over an IoU grid");
  add_common(eval_cmd, eval_common, false);
  eval_gt.opt = eval_cmd->add_option("--gt", eval_gt.value, "annotation JSON");
  eval_dets.opt = eval_cmd->add_option("--dets", eval_dets.value, "detections JSON (COCO results)");
  eval_min.opt = eval_cmd->add_option("--iou-min", eval_min.value, "lowest IoU threshold");
  eval_max.opt = eval_cmd->add_option("--iou-max", eval_max.value, "highest IoU threshold");
  eval_step.opt = eval_cmd->add_option("--iou-step", eval_step.value, "threshold step");
  eval_interp.opt = eval_cmd->add_option("--interp", eval_interp.value, "all|11|101");
  eval_cmd->add_option("--out", eval_out, "write <out>.json, <out>.csv and <out>.manifest.json");

  // riskmap
  CommonFlags risk_common;
  Flag<std::string> risk_dets, risk_image, risk_gt, risk_geometry;
  Flag<double> risk_radius, risk_min_conf;
  std::optional<std::int64_t> risk_image_id;
  std::string risk_prefix;
  auto* risk_cmd = app.add_subcommand("riskmap", "cluster detections into flammability-weighted risk polygons");
  add_common(risk_cmd, risk_common, false);
  risk_dets.opt = risk_cmd->add_option("--dets", risk_dets.value, "detections JSON");
  risk_image.opt = risk_cmd->add_option("--image", risk_image.value, "image to draw on");
  risk_cmd->add_option("--image-id", risk_image_id, "which image_id in --dets (needed when several are present)");
  risk_gt.opt = risk_cmd->add_option("--gt", risk_gt.value, "annotation JSON for class names");
  risk_radius.opt = risk_cmd->add_option("--radius", risk_radius.value, "cluster link radius in px");
  risk_geometry.opt = risk_cmd->add_option("--geometry", risk_geometry.value, "centers|corners");
  risk_min_conf.opt = risk_cmd->add_option("--min-confidence", risk_min_conf.value, "drop detections below this");
  risk_cmd->add_option("--out-prefix", risk_prefix, "output prefix")->required();

  // cbam-check
  int cb_n = 2, cb_c = 4, cb_h = 5, cb_w = 5, cb_r = 2, cb_k = 7;
  std::uint64_t cb_seed = 0;
  double cb_eps = 1e-5, cb_tol = 1e-4;
  std::string cb_params_out;
  auto* cb_cmd = app.add_subcommand("cbam-check", "finite-difference gradient check of the attention block");
  cb_cmd->set_help_flag("--help", "Print this help message and exit");  // frees -h for --h
  cb_cmd->add_option("--n", cb_n, "batch")->check(CLI::PositiveNumber);
  cb_cmd->add_option("--c", cb_c, "channels")->check(CLI::PositiveNumber);
  cb_cmd->add_option("--h", cb_h, "height")->check(CLI::PositiveNumber);
  cb_cmd->add_option("--w", cb_w, "width")->check(CLI::PositiveNumber);
  cb_cmd->add_option("--r", cb_r, "reduction ratio")->check(CLI::PositiveNumber);
  cb_cmd->add_option("--k", cb_k, "spatial kernel (odd)")->check(CLI::PositiveNumber);
  cb_cmd->add_option("--seed", cb_seed, "seed");
  cb_cmd->add_option("--eps", cb_eps, "finite-difference step");
  cb_cmd->add_option("--tol", cb_tol, "max relative error to pass");
  cb_cmd->add_option("--params-out", cb_params_out, "write the parameters as a binary file");

  // histogram
  std::string hist_in, hist_out;
  auto* hist_cmd = app.add_subcommand("histogram", "per-channel 256-bin histogram as CSV");
  hist_cmd->add_option("input", hist_in, "input PNG/JPEG")->required();
  hist_cmd->add_option("--out", hist_out, "CSV path (default stdout)");

  // validate
  std::string val_ann, val_dets, val_images;
  auto* val_cmd = app.add_subcommand("validate", "check an annotation file (and optionally detections / images)");
  val_cmd->add_option("annotations", val_ann, "annotation JSON")->required();
  val_cmd->add_option("--dets", val_dets, "detections JSON to check against it");
  val_cmd->add_option("--images", val_images, "image directory to check sizes against");

  // pipeline
  CommonFlags pipe_common;
  std::string pipe_out;
  auto* pipe_cmd = app.add_subcommand("pipeline", "convert, augment, evaluate and riskmap in one seeded run");
  add_common(pipe_cmd, pipe_common, true);
  pipe_cmd->add_option("--out", pipe_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    if (dynamic_cast<const CLI::ExtrasError*>(&e)) {
      std::vector<std::string> known;
      std::vector<CLI::App*> apps{&app};
      for (auto* sub : app.get_subcommands({})) apps.push_back(sub);
      for (auto* a : apps)
        for (const auto* o : a->get_options())
          for (const auto& n : o->get_lnames()) known.push_back("--" + n);
      for (int i = 1; i < argc; ++i) {
        const std::string_view arg = argv[i];
        if (!arg.starts_with("--")) continue;
        const auto name = arg.substr(0, arg.find('='));
        if (std::find(known.begin(), known.end(), name) != known.end()) continue;
        if (auto s = suggest(name, known)) err << "unknown flag '" << name << "'; did you mean '" << *s << "'?\n";
      }
    }
    err << "run 'firerisk --help' for usage\n";
    return static_cast<int>(Exit::Usage);
  }

  try {
    // ---------------------------------------------------------------- convert
    if (*convert_cmd) {
      Settings s = base_settings(convert_common);
      override_if(convert_to, [&](const auto& v) { s.color_to = settings_detail::space_or_throw(v); });
      override_if(convert_norm, [&](const auto& v) { s.normalize = settings_detail::normalize_or_throw(v); });
      validate_settings(s);
      s.image = convert_in;
      const ImageU8 src = load_image(convert_in);
      const ImageU8 dst = float_to_u8(normalize_for_display(convert(u8_to_float(src), s.color_to), s.normalize));
      const fs::path outp(convert_out);
      OutputSet outputs(outp.parent_path().empty() ? fs::path(".") : outp.parent_path());
      outputs.write(outp.filename().string(), encode_png(dst));
      write_file_text(outp.string() + ".manifest.json", manifest_text("convert", s, outputs));
      return 0;
    }

    // ---------------------------------------------------------------- augment
    if (*aug_cmd) {
      Settings s = base_settings(aug_common);
      override_if(aug_gt, [&](const auto& v) { s.annotations = v; });
      override_if(aug_images, [&](const auto& v) { s.images = v; });
      override_if(aug_p, [&](double v) { s.erase.probability = v; });
      override_if(aug_area, [&](const auto& v) {
        const auto p = parse_pair(v, "--erase-area");
        s.erase.area_lo = p[0], s.erase.area_hi = p[1];
      });
      override_if(aug_aspect, [&](const auto& v) {
        const auto p = parse_pair(v, "--erase-aspect");
        s.erase.aspect_lo = p[0], s.erase.aspect_hi = p[1];
      });
      override_if(aug_scale_mode, [&](const auto& v) { s.scale_mode = settings_detail::parse_scale(v); });
      const auto as_scale = [](const std::string& v, const char* what) {
        const auto p = parse_pair(v, what);
        return ScalePair{static_cast<int>(p[0]), static_cast<int>(p[1])};
      };
      override_if(aug_scale_min, [&](const auto& v) { s.scale.min = as_scale(v, "--scale-min"); });
      override_if(aug_scale_max, [&](const auto& v) { s.scale.max = as_scale(v, "--scale-max"); });
      validate_settings(s);
      if (s.annotations.empty() || s.images.empty()) throw ConfigError("augment needs --gt and --images");

      const AnnotationSet gt = parse_annotations(read_text(s.annotations));
      const std::vector<std::string> order{"erase", "scale"};
      Settings aug_s = s;
      aug_s.color_to = ColorSpace::SRGB;
      OutputSet outputs(aug_out);
      std::vector<std::optional<AugmentResult>> results(gt.images.size());
      const auto errors = parallel_for(gt.images.size(), aug_common.threads, [&](std::size_t i) {
        const auto& rec = gt.images[i];
        auto r = augment_one(load_checked(s.images, rec), boxes_of(gt, rec.id), rec.id, aug_s, order);
        outputs.write("images/" + stem_png(rec.file_name), encode_png(r.image));
        results[i] = std::move(r);
      });
      std::vector<std::string> names;
      for (const auto& im : gt.images) names.push_back(im.file_name);
      int failures = 0;
      report_item_errors(errors, names, err, failures);
      outputs.write("annotations.json", serialize_annotations(augmented_set(gt, results)));
      ojson records = ojson::array();
      for (const auto& r : results)
        if (r) records.push_back(r->record);
      outputs.write("augment_records.json", records.dump(2) + "\n");
      write_file_text(fs::path(aug_out) / "manifest.json",
                      manifest_text("augment", s, outputs, {{"order", order}, {"failed_items", failures}}));
      out << "augmented " << (gt.images.size() - static_cast<std::size_t>(failures)) << "/" << gt.images.size()
          << " images\n";
      return failures ? static_cast<int>(Exit::Failure) : 0;
    }

    // ---------------------------------------------------------------- evaluate
    if (*eval_cmd) {
      Settings s = base_settings(eval_common);
      override_if(eval_gt, [&](const auto& v) { s.annotations = v; });
      override_if(eval_dets, [&](const auto& v) { s.detections = v; });
      override_if(eval_min, [&](double v) { s.iou_min = v; });
      override_if(eval_max, [&](double v) { s.iou_max = v; });
      override_if(eval_step, [&](double v) { s.iou_step = v; });
      override_if(eval_interp, [&](const auto& v) { s.interpolation = settings_detail::interpolation_or_throw(v); });
      validate_settings(s);
      if (s.annotations.empty() || s.detections.empty()) throw ConfigError("evaluate needs --gt and --dets");
      const AnnotationSet gt = parse_annotations(read_text(s.annotations));
      const auto dets = parse_detections(read_text(s.detections));
      const EvalReport r = run_evaluation(gt, dets, s);
      if (!eval_out.empty()) {
        const fs::path prefix(eval_out);
        OutputSet outputs(prefix.parent_path().empty() ? fs::path(".") : prefix.parent_path());
        const std::string base = prefix.filename().string();
        outputs.write(base + ".json", report_json(r).dump(2) + "\n");
        outputs.write(base + ".csv", report_csv(r));
        write_file_text(prefix.string() + ".manifest.json", manifest_text("evaluate", s, outputs));
      }
      out << eval_summary(r);
      return 0;
    }

    // ---------------------------------------------------------------- riskmap
    if (*risk_cmd) {
      Settings s = base_settings(risk_common);
      override_if(risk_dets, [&](const auto& v) { s.detections = v; });
      override_if(risk_image, [&](const auto& v) { s.image = v; });
      override_if(risk_gt, [&](const auto& v) { s.annotations = v; });
      override_if(risk_radius, [&](double v) { s.cluster_radius = v; });
      override_if(risk_geometry, [&](const auto& v) { s.geometry = settings_detail::geometry_or_throw(v); });
      override_if(risk_min_conf, [&](double v) { s.min_confidence = v; });
      validate_settings(s);
      if (s.detections.empty() || s.image.empty()) throw ConfigError("riskmap needs --dets and --image");
      std::optional<AnnotationSet> gt;
      if (!s.annotations.empty()) gt = parse_annotations(read_text(s.annotations));
      auto dets = parse_detections(read_text(s.detections));
      std::set<std::int64_t> ids;
      for (const auto& d : dets) ids.insert(d.image_id);
      if (!risk_image_id && ids.size() > 1)
        throw ConfigError("--dets covers " + std::to_string(ids.size()) + " images; pick one with --image-id");
      if (risk_image_id)
        std::erase_if(dets, [&](const Detection& d) { return d.image_id != *risk_image_id; });
      const auto table = flammability_table(s, gt ? &*gt : nullptr);
      const auto res = risk_for_image(load_image(s.image), dets, s, table, class_names(gt ? &*gt : nullptr));
      for (const auto& w : res.warnings) err << "warning: " << w << "\n";
      const fs::path prefix(risk_prefix);
      OutputSet outputs(prefix.parent_path().empty() ? fs::path(".") : prefix.parent_path());
      const std::string base = prefix.filename().string();
      outputs.write(base + ".geojson", res.geojson);
      outputs.write(base + "_overlay.png", res.overlay_png);
      outputs.write(base + "_report.json", res.report);
      write_file_text(prefix.string() + "_manifest.json",
                      manifest_text("riskmap", s, outputs, {{"warnings", res.warnings}}));
      return 0;
    }

    // ---------------------------------------------------------------- cbam-check
    if (*cb_cmd) {
      Rng rng(cb_seed);
      const auto p = cbam::init_params(rng, cb_c, cb_r, cb_k);
      cbam::Tensor4 f(cb_n, cb_c, cb_h, cb_w), up(cb_n, cb_c, cb_h, cb_w);
      for (double& v : f.data()) v = rng.uniform(-1.0, 1.0);
      for (double& v : up.data()) v = rng.uniform(-1.0, 1.0);
      const auto r = cbam::check_gradients(f, p, up, cb_eps);
      const bool pass = r.max_rel_error < cb_tol;
      out << ojson{{"max_rel_error", r.max_rel_error},
                   {"worst", r.worst_coordinate},
                   {"coordinates", r.coordinates_checked},
                   {"tolerance", cb_tol},
                   {"pass", pass}}
                 .dump()
          << "\n";
      if (!cb_params_out.empty()) write_file_bytes(cb_params_out, cbam::serialize_params(p));
      return pass ? 0 : static_cast<int>(Exit::Failure);
    }

    // ---------------------------------------------------------------- histogram
    if (*hist_cmd) {
      const auto csv = histogram_csv(channel_histogram(load_image(hist_in)));
      if (hist_out.empty())
        out << csv;
      else
        write_file_text(hist_out, csv);
      return 0;
    }

    // ---------------------------------------------------------------- validate
    if (*val_cmd) {
      std::vector<std::string> bad;
      std::optional<AnnotationSet> set;
      try {
        set = parse_annotations(read_text(val_ann));
      } catch (const ValidationError& e) {
        bad = e.violations();
      }
      if (set && !val_dets.empty()) {
        try {
          validate_detections(parse_detections(read_text(val_dets)), *set);
        } catch (const ValidationError& e) {
          bad.insert(bad.end(), e.violations().begin(), e.violations().end());
        }
      }
      if (set && !val_images.empty())
        for (const auto& im : set->images) {
          try {
            load_checked(val_images, im);
          } catch (const ValidationError& e) {
            bad.insert(bad.end(), e.violations().begin(), e.violations().end());
          } catch (const Error& e) {
            bad.push_back(im.file_name + ": " + e.what());
          }
        }
      for (const auto& b : bad) err << "invalid: " << b << "\n";
      if (!bad.empty()) return static_cast<int>(Exit::Failure);
      out << "ok: " << set->images.size() << " images, " << set->annotations.size() << " annotations, "
          << set->categories.size() << " categories\n";
      return 0;
    }

    // ---------------------------------------------------------------- pipeline
    if (*pipe_cmd) {
      if (pipe_common.config.empty()) throw ConfigError("pipeline needs --config");
      Settings s = base_settings(pipe_common);
      validate_settings(s);
      if (s.annotations.empty() || s.images.empty() || s.detections.empty())
        throw ConfigError("pipeline config needs input.annotations, input.images and input.detections");
      const AnnotationSet gt = parse_annotations(read_text(s.annotations));
      const auto dets = parse_detections(read_text(s.detections));
      validate_detections(dets, gt);
      const auto table = flammability_table(s, &gt);
      const auto names = category_names(gt);
      OutputSet outputs(pipe_out);

      std::vector<std::optional<AugmentResult>> results(gt.images.size());
      std::vector<std::vector<std::string>> warnings(gt.images.size());
      const auto errors = parallel_for(gt.images.size(), pipe_common.threads, [&](std::size_t i) {
        const auto& rec = gt.images[i];
        const ImageU8 src = load_checked(s.images, rec);
        auto r = augment_one(src, boxes_of(gt, rec.id), rec.id, s, s.order);
        const std::string stem = fs::path(rec.file_name).stem().string();
        outputs.write("images/" + stem + ".png", encode_png(r.image));
        std::vector<Detection> mine;
        for (const auto& d : dets)
          if (d.image_id == rec.id) mine.push_back(d);
        auto risk = risk_for_image(src, mine, s, table, names);
        outputs.write("riskmap/" + stem + ".geojson", risk.geojson);
        outputs.write("riskmap/" + stem + "_overlay.png", risk.overlay_png);
        outputs.write("riskmap/" + stem + "_report.json", risk.report);
        warnings[i] = std::move(risk.warnings);
        results[i] = std::move(r);
      });
      std::vector<std::string> item_names;
      for (const auto& im : gt.images) item_names.push_back(im.file_name);
      int failures = 0;
      report_item_errors(errors, item_names, err, failures);
      ojson all_warnings = ojson::array();
      for (std::size_t i = 0; i < warnings.size(); ++i)
        for (const auto& w : warnings[i]) {
          err << "warning: " << item_names[i] << ": " << w << "\n";
          all_warnings.push_back(item_names[i] + ": " + w);
        }

      outputs.write("annotations.json", serialize_annotations(augmented_set(gt, results)));
      ojson records = ojson::array();
      for (const auto& r : results)
        if (r) records.push_back(r->record);
      outputs.write("augment_records.json", records.dump(2) + "\n");
      const EvalReport report = run_evaluation(gt, dets, s);
      outputs.write("eval.json", report_json(report).dump(2) + "\n");
      outputs.write("eval.csv", report_csv(report));
      write_file_text(fs::path(pipe_out) / "manifest.json",
                      manifest_text("pipeline", s, outputs, {{"failed_items", failures}, {"warnings", all_warnings}}));
      out << eval_summary(report);
      return failures ? static_cast<int>(Exit::Failure) : 0;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return static_cast<int>(Exit::Usage);
  } catch (const ValidationError& e) {
    err << "validation failed:\n";
    for (const auto& v : e.violations()) err << "  " << v << "\n";
    return static_cast<int>(Exit::Failure);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(Exit::Failure);
  }
  return static_cast<int>(Exit::Usage);
}

} // namespace firerisk::cli
