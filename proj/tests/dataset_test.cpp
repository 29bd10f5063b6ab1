#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "firerisk/dataset.hpp"

namespace firerisk {
namespace {

std::string fixture(const std::string& name) {
  std::ifstream in(std::string(FIRERISK_FIXTURES) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool mentions(const ValidationError& e, const std::string& needle) {
  for (const auto& v : e.violations())
    if (v.find(needle) != std::string::npos) return true;
  return false;
}

TEST(CategoryNames, AliasesFoldToCanonical) {
  EXPECT_EQ(canonical_category_name("Alive Trees"), "alive_tree");
  EXPECT_EQ(canonical_category_name("live-tree"), "alive_tree");
  EXPECT_EQ(canonical_category_name("beetle-fire tree"), "beetle_fire_tree");
  EXPECT_EQ(canonical_category_name("Beetle/Fire Trees"), "beetle_fire_tree");
  EXPECT_EQ(canonical_category_name("DEAD_TREES"), "dead_tree");
  EXPECT_EQ(canonical_category_name("debris"), "debris");
  EXPECT_EQ(canonical_category_name("shrub"), std::nullopt);
  for (auto c : kCanonicalCategories) EXPECT_EQ(canonical_category_name(c), std::string(c));
}

TEST(ParseAnnotations, FixtureLoads) {
  const auto set = parse_annotations(fixture("gt.json"));
  EXPECT_EQ(set.images.size(), 2u);
  EXPECT_EQ(set.annotations.size(), 4u);
  EXPECT_EQ(set.category_name(1), "alive_tree");
  EXPECT_EQ(set.category_id("debris"), 4);
  EXPECT_EQ(set.annotations[1].bbox(), (BBox{30, 10, 42, 24}));
  ASSERT_NE(set.find_image(2), nullptr);
  EXPECT_EQ(set.find_image(2)->file_name, "b.png");
  EXPECT_EQ(set.find_image(3), nullptr);
}

TEST(ParseAnnotations, RoundTripIsStable) {
  const auto set = parse_annotations(fixture("gt.json"));
  const auto text = serialize_annotations(set);
  const auto again = parse_annotations(text);
  EXPECT_EQ(again, set);
  EXPECT_EQ(serialize_annotations(again), text);
}

TEST(ParseAnnotations, FiftyBoxRoundTrip) {
  const auto set = parse_annotations(fixture("gt50.json"));
  EXPECT_EQ(set.annotations.size(), 50u);
  EXPECT_EQ(parse_annotations(serialize_annotations(set)), set);
}

TEST(ParseAnnotations, MinimalSetReserializesModuloKeyOrder) {
  const std::string text =
      R"({"categories":[{"name":"debris","id":4}],"annotations":[{"bbox":[1,2,3,4],"category_id":4,"image_id":7,"id":1}],)"
      R"("images":[{"width":10,"height":10,"file_name":"x.png","id":7}]})";
  const auto set = parse_annotations(text);
  EXPECT_EQ(nlohmann::json::parse(serialize_annotations(set)), nlohmann::json::parse(text));
}

TEST(ParseAnnotations, FractionalBoxesSurviveRoundTrip) {
  AnnotationSet s;
  s.images = {{1, "x.png", 100, 100}};
  s.categories = {{1, "debris"}};
  s.annotations = {{5, 1, 1, {0.1, 1.0 / 3.0, 12.345678901234567, 7.000000000000001}}};
  EXPECT_EQ(parse_annotations(serialize_annotations(s)), s);
}

TEST(ParseAnnotations, CollectsAllViolations) {
  const std::string text = R"({
    "images": [{"id": 1, "file_name": "a", "width": 10, "height": 10},
               {"id": 1, "file_name": "b", "width": 10, "height": 10}],
    "annotations": [
      {"id": 1, "image_id": 9, "category_id": 1, "bbox": [0, 0, 1, 1]},
      {"id": 2, "image_id": 1, "category_id": 7, "bbox": [0, 0, 1, 1]},
      {"id": 3, "image_id": 1, "category_id": 1, "bbox": [5, 5, 10, 1]},
      {"id": 4, "image_id": 1, "category_id": 1, "bbox": [0, 0, 0, 1]},
      {"id": 4, "image_id": 1, "category_id": 1, "bbox": [0, 0, 1]}
    ],
    "categories": [{"id": 1, "name": "debris"}, {"id": 2, "name": "cactus"}]
  })";
  try {
    parse_annotations(text);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_TRUE(mentions(e, "duplicate image id 1"));
    EXPECT_TRUE(mentions(e, "missing image_id 9"));
    EXPECT_TRUE(mentions(e, "missing category_id 7"));
    EXPECT_TRUE(mentions(e, "exceeds image"));
    EXPECT_TRUE(mentions(e, "non-positive bbox"));
    EXPECT_TRUE(mentions(e, "bbox must have 4"));
    EXPECT_TRUE(mentions(e, "unknown category name 'cactus'"));
    EXPECT_GE(e.violations().size(), 7u);
  }
}

TEST(ParseAnnotations, MalformedInputs) {
  EXPECT_THROW(parse_annotations("{"), ValidationError);
  EXPECT_THROW(parse_annotations("[]"), ValidationError);
  try {
    parse_annotations(R"({"images": [], "categories": []})");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_TRUE(mentions(e, "annotations"));
  }
  try {
    parse_annotations(R"({"images": [{"id": "x", "file_name": "a", "width": 1.5, "height": 1}], "annotations": [], "categories": []})");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_TRUE(mentions(e, "'id'"));
    EXPECT_TRUE(mentions(e, "'width'"));
  }
}

AnnotationSet synthetic(int n) {
  AnnotationSet s;
  s.categories = {{1, "alive_tree"}, {2, "dead_tree"}};
  std::int64_t aid = 0;
  for (int i = 0; i < n; ++i) {
    s.images.push_back({100 + i, "img" + std::to_string(i) + ".png", 50, 40});
    for (int k = 0; k < i % 3; ++k) s.annotations.push_back({aid++, 100 + i, 1 + k % 2, {1.0 * k, 2, 5, 5}});
  }
  return s;
}

TEST(Split, PartitionsImagesAndFollowsAnnotations) {
  const auto s = synthetic(37);
  const auto parts = split(s, {0.7, 0.2, 0.1}, 11);
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(parts[0].images.size() + parts[1].images.size() + parts[2].images.size(), 37u);
  EXPECT_EQ(parts[0].images.size(), 26u);  // llround(0.7 * 37)
  EXPECT_EQ(parts[1].images.size(), 7u);   // llround(0.9 * 37) - 26
  std::set<std::int64_t> seen;
  std::size_t anns = 0;
  for (const auto& p : parts) {
    EXPECT_TRUE(validation_errors(p).empty());
    EXPECT_EQ(p.categories, s.categories);
    for (const auto& im : p.images) EXPECT_TRUE(seen.insert(im.id).second);
    for (const auto& a : p.annotations) EXPECT_NE(p.find_image(a.image_id), nullptr);
    anns += p.annotations.size();
  }
  EXPECT_EQ(anns, s.annotations.size());
}

TEST(Split, SeedDeterminismAndVariation) {
  const auto s = synthetic(30);
  EXPECT_EQ(split(s, {0.5, 0.5}, 3), split(s, {0.5, 0.5}, 3));
  EXPECT_NE(split(s, {0.5, 0.5}, 3), split(s, {0.5, 0.5}, 4));
}

TEST(Split, TinySetsAndErrors) {
  const auto s = synthetic(3);
  const auto parts = split(s, {0.98, 0.01, 0.01}, 1);
  for (const auto& p : parts) EXPECT_EQ(p.images.size(), 1u);
  const auto with_zero = split(s, {1.0, 0.0}, 1);
  EXPECT_EQ(with_zero[0].images.size(), 3u);
  EXPECT_TRUE(with_zero[1].images.empty());
  EXPECT_THROW(split(synthetic(2), {0.4, 0.3, 0.3}, 1), ConfigError);
  EXPECT_THROW(split(s, {0.5, 0.6}, 1), ConfigError);
  EXPECT_THROW(split(s, {}, 1), ConfigError);
  EXPECT_THROW(split(s, {1.5, -0.5}, 1), ConfigError);
}

} // namespace
} // namespace firerisk
