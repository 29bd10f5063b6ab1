#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "firerisk/error.hpp"
#include "firerisk/geometry.hpp"
#include "firerisk/rng.hpp"

namespace firerisk {

// ---------------------------------------------------------------------------
// Fuel classes
// ---------------------------------------------------------------------------

/// Canonical forest-fuel class names. Alias spellings found in the wild are
/// folded onto these by canonical_category_name().
inline constexpr std::array<std::string_view, 4> kCanonicalCategories{
    "alive_tree", "beetle_fire_tree", "dead_tree", "debris"};

/// Lowercases, maps runs of non-alphanumerics to '_', strips a plural 's'
/// per word, then resolves aliases. Returns nullopt for unknown classes.
inline std::optional<std::string> canonical_category_name(std::string_view raw) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  for (auto& w : words)
    if (w.size() > 3 && w.back() == 's' && w != "debris") w.pop_back();

  std::string key;
  for (const auto& w : words) key += (key.empty() ? "" : "_") + w;

  static const std::map<std::string, std::string, std::less<>> aliases{
      {"alive_tree", "alive_tree"},          {"live_tree", "alive_tree"},
      {"alive", "alive_tree"},               {"healthy_tree", "alive_tree"},
      {"beetle_fire_tree", "beetle_fire_tree"}, {"beetle_impacted_tree", "beetle_fire_tree"},
      {"fire_impacted_tree", "beetle_fire_tree"}, {"beetle_tree", "beetle_fire_tree"},
      {"fire_tree", "beetle_fire_tree"},     {"beetle_killed_tree", "beetle_fire_tree"},
      {"dead_tree", "dead_tree"},            {"dead", "dead_tree"},
      {"debris", "debris"},
  };
  if (auto it = aliases.find(key); it != aliases.end()) return it->second;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Annotation set
// ---------------------------------------------------------------------------

struct ImageRecord {
  std::int64_t id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// Box kept in file convention [x, y, w, h]; bbox() gives corner form.
struct Annotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  std::array<double, 4> xywh{};

  BBox bbox() const { return BBox::from_xywh(xywh[0], xywh[1], xywh[2], xywh[3]); }
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Category {
  std::int64_t id = 0;
  std::string name;  // canonical
  friend bool operator==(const Category&, const Category&) = default;
};

struct AnnotationSet {
  std::vector<ImageRecord> images;
  std::vector<Annotation> annotations;
  std::vector<Category> categories;

  const ImageRecord* find_image(std::int64_t id) const {
    auto it = std::find_if(images.begin(), images.end(), [id](const auto& r) { return r.id == id; });
    return it == images.end() ? nullptr : &*it;
  }
  std::optional<std::string> category_name(std::int64_t id) const {
    for (const auto& c : categories)
      if (c.id == id) return c.name;
    return std::nullopt;
  }
  std::optional<std::int64_t> category_id(std::string_view name) const {
    for (const auto& c : categories)
      if (c.name == name) return c.id;
    return std::nullopt;
  }

  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

/// Returns every invariant violation; empty means valid.
inline std::vector<std::string> validation_errors(const AnnotationSet& set) {
  std::vector<std::string> bad;
  std::map<std::int64_t, const ImageRecord*> images;
  std::set<std::int64_t> cats, ann_ids;
  std::set<std::string> cat_names;

  for (const auto& im : set.images) {
    if (!images.emplace(im.id, &im).second) bad.push_back("duplicate image id " + std::to_string(im.id));
    if (im.width < 1 || im.height < 1)
      bad.push_back("image " + std::to_string(im.id) + " has non-positive size");
  }
  for (const auto& c : set.categories) {
    if (!cats.insert(c.id).second) bad.push_back("duplicate category id " + std::to_string(c.id));
    if (!cat_names.insert(c.name).second) bad.push_back("duplicate category name '" + c.name + "'");
  }
  for (const auto& a : set.annotations) {
    const std::string tag = "annotation " + std::to_string(a.id);
    if (!ann_ids.insert(a.id).second) bad.push_back("duplicate annotation id " + std::to_string(a.id));
    const auto it = images.find(a.image_id);
    if (it == images.end()) bad.push_back(tag + " references missing image_id " + std::to_string(a.image_id));
    if (!cats.count(a.category_id))
      bad.push_back(tag + " references missing category_id " + std::to_string(a.category_id));
    const auto [x, y, w, h] = a.xywh;
    if (!(std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h))) {
      bad.push_back(tag + " has non-finite bbox");
      continue;
    }
    if (!(w > 0 && h > 0)) bad.push_back(tag + " has non-positive bbox width/height");
    if (it != images.end()) {
      const auto& im = *it->second;
      if (x < 0 || y < 0 || x + w > im.width || y + h > im.height)
        bad.push_back(tag + " bbox exceeds image " + std::to_string(im.id) + " extents " +
                      std::to_string(im.width) + "x" + std::to_string(im.height));
    }
  }
  return bad;
}

inline void validate(const AnnotationSet& set) {
  if (auto bad = validation_errors(set); !bad.empty()) throw ValidationError(std::move(bad));
}

namespace dataset_detail {

template <class T>
std::optional<T> field(const nlohmann::json& obj, const char* key, const std::string& where,
                       std::vector<std::string>& bad) {
  if (!obj.is_object() || !obj.contains(key)) {
    bad.push_back(where + ": missing field '" + key + "'");
    return std::nullopt;
  }
  try {
    const auto& v = obj.at(key);
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() &&
          !(v.is_number_float() && std::floor(v.get<double>()) == v.get<double>())) {
        bad.push_back(where + ": field '" + key + "' must be an integer");
        return std::nullopt;
      }
    }
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    bad.push_back(where + ": field '" + key + "' has the wrong type");
    return std::nullopt;
  }
}

inline const nlohmann::json& array_field(const nlohmann::json& root, const char* key,
                                         std::vector<std::string>& bad) {
  static const nlohmann::json empty = nlohmann::json::array();
  if (!root.contains(key)) {
    bad.push_back(std::string("missing top-level array '") + key + "'");
    return empty;
  }
  if (!root.at(key).is_array()) {
    bad.push_back(std::string("top-level '") + key + "' must be an array");
    return empty;
  }
  return root.at(key);
}

} // namespace dataset_detail

/// Parses COCO-subset JSON and enforces every invariant. Unknown extra keys
/// (info, licenses, iscrowd, ...) are ignored. All problems are collected
/// into one ValidationError.
inline AnnotationSet parse_annotations(std::string_view text) {
  using dataset_detail::field;
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError({std::string("invalid JSON: ") + e.what()});
  }
  if (!root.is_object()) throw ValidationError({"annotation file root must be an object"});

  std::vector<std::string> bad;
  AnnotationSet set;
  std::size_t i = 0;
  for (const auto& j : dataset_detail::array_field(root, "images", bad)) {
    const std::string where = "images[" + std::to_string(i++) + "]";
    auto id = field<std::int64_t>(j, "id", where, bad);
    auto fn = field<std::string>(j, "file_name", where, bad);
    auto w = field<int>(j, "width", where, bad);
    auto h = field<int>(j, "height", where, bad);
    if (id && fn && w && h) set.images.push_back({*id, *fn, *w, *h});
  }
  i = 0;
  for (const auto& j : dataset_detail::array_field(root, "categories", bad)) {
    const std::string where = "categories[" + std::to_string(i++) + "]";
    auto id = field<std::int64_t>(j, "id", where, bad);
    auto name = field<std::string>(j, "name", where, bad);
    if (!id || !name) continue;
    auto canon = canonical_category_name(*name);
    if (!canon) {
      bad.push_back(where + ": unknown category name '" + *name + "'");
      continue;
    }
    set.categories.push_back({*id, *canon});
  }
  i = 0;
  for (const auto& j : dataset_detail::array_field(root, "annotations", bad)) {
    const std::string where = "annotations[" + std::to_string(i++) + "]";
    auto id = field<std::int64_t>(j, "id", where, bad);
    auto img = field<std::int64_t>(j, "image_id", where, bad);
    auto cat = field<std::int64_t>(j, "category_id", where, bad);
    auto box = field<std::vector<double>>(j, "bbox", where, bad);
    if (box && box->size() != 4) {
      bad.push_back(where + ": bbox must have 4 numbers [x,y,w,h]");
      continue;
    }
    if (id && img && cat && box) set.annotations.push_back({*id, *img, *cat, {(*box)[0], (*box)[1], (*box)[2], (*box)[3]}});
  }
  auto more = validation_errors(set);
  bad.insert(bad.end(), more.begin(), more.end());
  if (!bad.empty()) throw ValidationError(std::move(bad));
  return set;
}

inline nlohmann::ordered_json to_json(const AnnotationSet& set) {
  nlohmann::ordered_json root;
  root["images"] = nlohmann::ordered_json::array();
  for (const auto& im : set.images)
    root["images"].push_back({{"id", im.id}, {"file_name", im.file_name}, {"width", im.width}, {"height", im.height}});
  root["annotations"] = nlohmann::ordered_json::array();
  for (const auto& a : set.annotations)
    root["annotations"].push_back({{"id", a.id},
                                   {"image_id", a.image_id},
                                   {"category_id", a.category_id},
                                   {"bbox", {a.xywh[0], a.xywh[1], a.xywh[2], a.xywh[3]}}});
  root["categories"] = nlohmann::ordered_json::array();
  for (const auto& c : set.categories) root["categories"].push_back({{"id", c.id}, {"name", c.name}});
  return root;
}

inline std::string serialize_annotations(const AnnotationSet& set) { return to_json(set).dump(2) + "\n"; }

/// Image-level random partition. `fractions` must sum to 1; every partition
/// with a nonzero fraction needs at least one image. Annotations follow
/// their images; categories are copied into every part.
inline std::vector<AnnotationSet> split(const AnnotationSet& set, const std::vector<double>& fractions,
                                        std::uint64_t seed) {
  if (fractions.empty()) throw ConfigError("split: no fractions given");
  double total = 0;
  for (double f : fractions) {
    if (!(f >= 0)) throw ConfigError("split: fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");
  const auto nonzero = static_cast<std::size_t>(std::count_if(fractions.begin(), fractions.end(), [](double f) { return f > 0; }));
  const std::size_t n = set.images.size();
  if (n < nonzero)
    throw ConfigError("split: " + std::to_string(n) + " image(s) cannot fill " + std::to_string(nonzero) +
                      " partitions");

  // Fisher-Yates over image indices.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);

  // Cumulative rounding, then make sure every nonzero part gets an image.
  std::vector<std::size_t> counts(fractions.size(), 0);
  double cum = 0;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    cum += fractions[k];
    const auto upto = k + 1 == fractions.size() ? n : static_cast<std::size_t>(std::llround(cum * n));
    counts[k] = std::max(upto, assigned) - assigned;
    assigned += counts[k];
  }
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (fractions[k] > 0 && counts[k] == 0) {
      auto donor = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      --counts[donor];
      ++counts[k];
    }
  }

  std::vector<AnnotationSet> parts(fractions.size());
  std::map<std::int64_t, std::size_t> part_of;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    parts[k].categories = set.categories;
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                 order.begin() + static_cast<std::ptrdiff_t>(pos + counts[k]));
    std::sort(idx.begin(), idx.end());  // keep original image order within a part
    for (auto i : idx) {
      parts[k].images.push_back(set.images[i]);
      part_of[set.images[i].id] = k;
    }
    pos += counts[k];
  }
  for (const auto& a : set.annotations) parts[part_of.at(a.image_id)].annotations.push_back(a);
  return parts;
}

} // namespace firerisk
