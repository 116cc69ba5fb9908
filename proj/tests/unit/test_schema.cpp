#include "sppb/schema.hpp"

#include <cstdio>
#include <map>
#include <set>
#include <string>

#include "doctest.h"
#include "sppb/errors.hpp"

using namespace sppb;

TEST_CASE("default schema shape") {
  const auto s = default_schema();
  CHECK(s.features.size() == 89);
  CHECK(s.expanded_width() == 95);
  CHECK(s.expanded_names().size() == 95);

  std::map<FeatureCategory, int> counts;
  for (const auto& f : s.features) counts[f.category]++;
  CHECK(counts.size() == 13);
  CHECK(counts[FeatureCategory::demographics] == 9);
  CHECK(counts[FeatureCategory::health_state] == 21);
  CHECK(counts[FeatureCategory::medical_procedures] == 1);
  CHECK(counts[FeatureCategory::recent_medical_history] == 4);
  CHECK(counts[FeatureCategory::physical_capabilities] == 6);
  CHECK(counts[FeatureCategory::sensory_capabilities] == 3);
  CHECK(counts[FeatureCategory::cognitive_functions] == 3);
  CHECK(counts[FeatureCategory::falls_and_outcomes] == 4);
  CHECK(counts[FeatureCategory::physical_performance] == 6);
  CHECK(counts[FeatureCategory::derived_scores] == 4);
  CHECK(counts[FeatureCategory::daily_functioning] == 13);
  CHECK(counts[FeatureCategory::habits] == 10);
  CHECK(counts[FeatureCategory::physical_measures] == 5);
}

TEST_CASE("default schema content") {
  const auto s = default_schema();

  const auto* marital = s.find("marital_status");
  REQUIRE(marital != nullptr);
  CHECK(marital->kind == FeatureKind::nominal);
  CHECK(marital->categories.size() == 7);
  CHECK(marital->categories.front().label == "married");

  const auto names = s.expanded_names();
  CHECK(std::count(names.begin(), names.end(), "marital_status=widowed") == 1);
  CHECK(std::count(names.begin(), names.end(), "sppb_total") == 1);
  CHECK(std::count(names.begin(), names.end(), "age") == 1);

  // expanded names are unique
  std::set<std::string> unique(names.begin(), names.end());
  CHECK(unique.size() == names.size());

  // exactly the four derived score columns are flagged derived
  int derived = 0;
  for (const auto& f : s.features)
    if (f.derived) {
      ++derived;
      CHECK(f.category == FeatureCategory::derived_scores);
    }
  CHECK(derived == 4);

  CHECK(s.index_of("age") == 0);
  CHECK_THROWS_AS(s.index_of("no_such_feature"), DataError);
  CHECK(s.find("no_such_feature") == nullptr);
}

TEST_CASE("schema validation rejects malformed definitions") {
  FeatureSchema s = default_schema();
  s.features.push_back(s.features.front());
  CHECK_THROWS_AS(s.validate(), DataError);

  FeatureSchema t;
  FeatureDef f;
  f.name = "color";
  f.kind = FeatureKind::nominal;
  t.features.push_back(f);
  CHECK_THROWS_AS(t.validate(), DataError);
}

TEST_CASE("schema json round trip") {
  const auto s = default_schema();
  const std::string path = "schema_roundtrip_tmp.json";
  save_schema(s, path);
  const auto loaded = load_schema(path);
  std::remove(path.c_str());

  REQUIRE(loaded.features.size() == s.features.size());
  CHECK(loaded.name == s.name);
  for (std::size_t i = 0; i < s.features.size(); ++i) {
    const auto& a = s.features[i];
    const auto& b = loaded.features[i];
    CHECK(a.name == b.name);
    CHECK(a.category == b.category);
    CHECK(a.kind == b.kind);
    CHECK(a.missing_codes == b.missing_codes);
    CHECK(a.derived == b.derived);
    REQUIRE(a.categories.size() == b.categories.size());
    for (std::size_t j = 0; j < a.categories.size(); ++j) {
      CHECK(a.categories[j].code == b.categories[j].code);
      CHECK(a.categories[j].label == b.categories[j].label);
    }
  }
}

TEST_CASE("shipped schema file matches the built-in default") {
  const auto shipped = load_schema(std::string(SPPB_REPO_DIR) + "/schema/elsa_default.json");
  const auto builtin = default_schema();
  REQUIRE(shipped.features.size() == builtin.features.size());
  CHECK(shipped.expanded_names() == builtin.expanded_names());
  for (std::size_t i = 0; i < builtin.features.size(); ++i) {
    CHECK(shipped.features[i].category == builtin.features[i].category);
    CHECK(shipped.features[i].kind == builtin.features[i].kind);
    CHECK(shipped.features[i].missing_codes == builtin.features[i].missing_codes);
  }
}

TEST_CASE("load errors carry the path") {
  CHECK_THROWS_AS(load_schema("/nonexistent/schema.json"), DataError);
}
