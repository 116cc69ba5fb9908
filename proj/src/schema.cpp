#include "sppb/schema.hpp"

#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "sppb/errors.hpp"

namespace sppb {

namespace {

using nlohmann::json;

constexpr int kSchemaFormatVersion = 1;

// ELSA-style sentinel codes for "refused / don't know / not applicable".
const std::vector<double> kDefaultMissingCodes{-1.0, -8.0, -9.0};

FeatureDef feature(std::string name, FeatureCategory cat, FeatureKind kind) {
  FeatureDef def;
  def.name = std::move(name);
  def.category = cat;
  def.kind = kind;
  def.missing_codes = kDefaultMissingCodes;
  return def;
}

}  // namespace

const char* to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::continuous: return "continuous";
    case FeatureKind::binary: return "binary";
    case FeatureKind::ordinal: return "ordinal";
    case FeatureKind::nominal: return "nominal";
  }
  return "?";
}

const char* to_string(FeatureCategory c) {
  switch (c) {
    case FeatureCategory::demographics: return "demographics";
    case FeatureCategory::health_state: return "health_state";
    case FeatureCategory::medical_procedures: return "medical_procedures";
    case FeatureCategory::recent_medical_history: return "recent_medical_history";
    case FeatureCategory::physical_capabilities: return "physical_capabilities";
    case FeatureCategory::sensory_capabilities: return "sensory_capabilities";
    case FeatureCategory::cognitive_functions: return "cognitive_functions";
    case FeatureCategory::falls_and_outcomes: return "falls_and_outcomes";
    case FeatureCategory::physical_performance: return "physical_performance";
    case FeatureCategory::derived_scores: return "derived_scores";
    case FeatureCategory::daily_functioning: return "daily_functioning";
    case FeatureCategory::habits: return "habits";
    case FeatureCategory::physical_measures: return "physical_measures";
  }
  return "?";
}

FeatureKind feature_kind_from_string(const std::string& s) {
  for (auto k : {FeatureKind::continuous, FeatureKind::binary, FeatureKind::ordinal,
                 FeatureKind::nominal})
    if (s == to_string(k)) return k;
  throw DataError("unknown feature kind: " + s);
}

FeatureCategory feature_category_from_string(const std::string& s) {
  for (auto c : {FeatureCategory::demographics, FeatureCategory::health_state,
                 FeatureCategory::medical_procedures, FeatureCategory::recent_medical_history,
                 FeatureCategory::physical_capabilities, FeatureCategory::sensory_capabilities,
                 FeatureCategory::cognitive_functions, FeatureCategory::falls_and_outcomes,
                 FeatureCategory::physical_performance, FeatureCategory::derived_scores,
                 FeatureCategory::daily_functioning, FeatureCategory::habits,
                 FeatureCategory::physical_measures})
    if (s == to_string(c)) return c;
  throw DataError("unknown feature category: " + s);
}

std::size_t FeatureSchema::expanded_width() const {
  std::size_t w = 0;
  for (const auto& f : features)
    w += f.kind == FeatureKind::nominal ? f.categories.size() : 1;
  return w;
}

std::vector<std::string> FeatureSchema::expanded_names() const {
  std::vector<std::string> names;
  names.reserve(expanded_width());
  for (const auto& f : features) {
    if (f.kind == FeatureKind::nominal) {
      for (const auto& c : f.categories) names.push_back(f.name + "=" + c.label);
    } else {
      names.push_back(f.name);
    }
  }
  return names;
}

const FeatureDef* FeatureSchema::find(const std::string& feature_name) const {
  for (const auto& f : features)
    if (f.name == feature_name) return &f;
  return nullptr;
}

std::size_t FeatureSchema::index_of(const std::string& feature_name) const {
  for (std::size_t i = 0; i < features.size(); ++i)
    if (features[i].name == feature_name) return i;
  throw DataError("unknown feature: " + feature_name);
}

void FeatureSchema::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& f : features) {
    if (!seen.insert(f.name).second) throw DataError("duplicate feature name: " + f.name);
    if (f.kind == FeatureKind::nominal && f.categories.empty())
      throw DataError("nominal feature without categories: " + f.name);
    if (f.kind != FeatureKind::nominal && !f.categories.empty())
      throw DataError("non-nominal feature with categories: " + f.name);
  }
}

FeatureSchema default_schema() {
  FeatureSchema s;
  s.name = "elsa_default";
  s.note =
      "Reconstruction of the harmonized ELSA UK variable set used for SPPB "
      "prediction; the source study does not publish the exact variable list, "
      "so names and encodings here are a faithful re-derivation of the "
      "documented categories. 95 columns after one-hot expansion.";

  auto add = [&s](std::string name, FeatureCategory cat, FeatureKind kind) {
    s.features.push_back(feature(std::move(name), cat, kind));
  };

  // demographics (8 + marital status -> 15 expanded)
  add("age", FeatureCategory::demographics, FeatureKind::continuous);
  add("gender", FeatureCategory::demographics, FeatureKind::binary);
  add("education_level", FeatureCategory::demographics, FeatureKind::ordinal);
  add("household_size", FeatureCategory::demographics, FeatureKind::continuous);
  add("mother_age", FeatureCategory::demographics, FeatureKind::continuous);
  add("father_age", FeatureCategory::demographics, FeatureKind::continuous);
  add("mother_alive", FeatureCategory::demographics, FeatureKind::binary);
  add("father_alive", FeatureCategory::demographics, FeatureKind::binary);
  {
    FeatureDef marital = feature("marital_status", FeatureCategory::demographics,
                                 FeatureKind::nominal);
    marital.categories = {{1, "married"},  {2, "remarried"}, {3, "partnered"},
                          {4, "separated"}, {5, "divorced"},  {6, "widowed"},
                          {7, "never_married"}};
    s.features.push_back(std::move(marital));
  }

  // health state (21)
  add("self_rated_health", FeatureCategory::health_state, FeatureKind::ordinal);
  add("dental_health", FeatureCategory::health_state, FeatureKind::ordinal);
  for (const char* d : {"diag_high_blood_pressure", "diag_diabetes", "diag_cancer",
                        "diag_lung_disease", "diag_heart_problems", "diag_stroke",
                        "diag_arthritis", "diag_asthma", "diag_high_cholesterol",
                        "diag_cataracts", "diag_parkinsons", "diag_hip_fracture",
                        "diag_osteoporosis", "diag_psychiatric"})
    add(d, FeatureCategory::health_state, FeatureKind::binary);
  add("shortness_of_breath", FeatureCategory::health_state, FeatureKind::binary);
  add("persistent_wheezing", FeatureCategory::health_state, FeatureKind::binary);
  add("pain_troubled", FeatureCategory::health_state, FeatureKind::binary);
  add("pain_severity", FeatureCategory::health_state, FeatureKind::ordinal);
  add("leg_pain_walking", FeatureCategory::health_state, FeatureKind::binary);

  // medical procedures (1)
  add("joint_replacement", FeatureCategory::medical_procedures, FeatureKind::binary);

  // recent medical history (4)
  add("recent_angina", FeatureCategory::recent_medical_history, FeatureKind::binary);
  add("recent_heart_attack", FeatureCategory::recent_medical_history, FeatureKind::binary);
  add("recent_hip_fracture", FeatureCategory::recent_medical_history, FeatureKind::binary);
  add("recent_psych_problems", FeatureCategory::recent_medical_history, FeatureKind::binary);

  // physical capabilities (6)
  for (const char* d : {"diff_walk_100yds", "diff_sit_2hours", "diff_carry_10lbs",
                        "diff_pick_up_coin", "diff_reach_arms", "diff_push_pull_large"})
    add(d, FeatureCategory::physical_capabilities, FeatureKind::binary);

  // sensory capabilities (3)
  add("eyesight_distance", FeatureCategory::sensory_capabilities, FeatureKind::ordinal);
  add("eyesight_near", FeatureCategory::sensory_capabilities, FeatureKind::ordinal);
  add("hearing", FeatureCategory::sensory_capabilities, FeatureKind::ordinal);

  // cognitive functions (3)
  add("cesd_score", FeatureCategory::cognitive_functions, FeatureKind::continuous);
  add("memory_problems", FeatureCategory::cognitive_functions, FeatureKind::binary);
  add("self_rated_memory", FeatureCategory::cognitive_functions, FeatureKind::ordinal);

  // falls & outcomes (4)
  add("fallen_down_2y", FeatureCategory::falls_and_outcomes, FeatureKind::binary);
  add("number_of_falls", FeatureCategory::falls_and_outcomes, FeatureKind::continuous);
  add("fall_injury", FeatureCategory::falls_and_outcomes, FeatureKind::binary);
  add("uses_fall_alarm", FeatureCategory::falls_and_outcomes, FeatureKind::binary);

  // physical performance: timed measurements + grip (6)
  add("balance_sbs_time", FeatureCategory::physical_performance, FeatureKind::continuous);
  add("balance_semi_tandem_time", FeatureCategory::physical_performance,
      FeatureKind::continuous);
  add("balance_full_tandem_time", FeatureCategory::physical_performance,
      FeatureKind::continuous);
  add("gait_time", FeatureCategory::physical_performance, FeatureKind::continuous);
  add("chair_stand_time", FeatureCategory::physical_performance, FeatureKind::continuous);
  add("grip_strength", FeatureCategory::physical_performance, FeatureKind::continuous);

  // derived SPPB scores, appended from the measurements at build time (4)
  for (const char* d : {"balance_score", "gait_score", "chair_score", "sppb_total"}) {
    FeatureDef def = feature(d, FeatureCategory::derived_scores, FeatureKind::ordinal);
    def.derived = true;
    s.features.push_back(std::move(def));
  }

  // daily functioning (13)
  add("health_limits_work", FeatureCategory::daily_functioning, FeatureKind::binary);
  for (const char* d : {"adl_dressing", "adl_walking_room", "adl_bathing", "adl_eating",
                        "adl_bed_transfer", "adl_toilet"})
    add(d, FeatureCategory::daily_functioning, FeatureKind::binary);
  for (const char* d : {"iadl_map_use", "iadl_hot_meal", "iadl_shopping",
                        "iadl_medications", "iadl_housework", "iadl_money"})
    add(d, FeatureCategory::daily_functioning, FeatureKind::binary);

  // habits (10)
  add("smokes_now", FeatureCategory::habits, FeatureKind::binary);
  add("ever_smoked", FeatureCategory::habits, FeatureKind::binary);
  add("cigarettes_per_day", FeatureCategory::habits, FeatureKind::continuous);
  add("drinks_alcohol", FeatureCategory::habits, FeatureKind::binary);
  add("drinks_per_week", FeatureCategory::habits, FeatureKind::continuous);
  add("social_participation", FeatureCategory::habits, FeatureKind::ordinal);
  add("working_status", FeatureCategory::habits, FeatureKind::binary);
  add("activity_vigorous", FeatureCategory::habits, FeatureKind::ordinal);
  add("activity_moderate", FeatureCategory::habits, FeatureKind::ordinal);
  add("activity_light", FeatureCategory::habits, FeatureKind::ordinal);

  // physical measures (5)
  add("height_cm", FeatureCategory::physical_measures, FeatureKind::continuous);
  add("weight_kg", FeatureCategory::physical_measures, FeatureKind::continuous);
  add("bmi", FeatureCategory::physical_measures, FeatureKind::continuous);
  add("systolic_bp", FeatureCategory::physical_measures, FeatureKind::continuous);
  add("diastolic_bp", FeatureCategory::physical_measures, FeatureKind::continuous);

  s.validate();
  return s;
}

FeatureSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("cannot parse schema file " + path + ": " + e.what());
  }
  if (j.value("format_version", 0) != kSchemaFormatVersion)
    throw DataError("unsupported schema format_version in " + path);

  FeatureSchema s;
  s.name = j.value("name", "");
  s.note = j.value("note", "");
  for (const auto& jf : j.at("features")) {
    FeatureDef f;
    f.name = jf.at("name").get<std::string>();
    f.category = feature_category_from_string(jf.at("category").get<std::string>());
    f.kind = feature_kind_from_string(jf.at("kind").get<std::string>());
    f.missing_codes = jf.value("missing_codes", std::vector<double>{});
    f.derived = jf.value("derived", false);
    if (jf.contains("categories"))
      for (const auto& jc : jf.at("categories"))
        f.categories.push_back({jc.at("code").get<int>(), jc.at("label").get<std::string>()});
    s.features.push_back(std::move(f));
  }
  s.validate();
  return s;
}

void save_schema(const FeatureSchema& schema, const std::string& path) {
  json j;
  j["format_version"] = kSchemaFormatVersion;
  j["name"] = schema.name;
  j["note"] = schema.note;
  j["features"] = json::array();
  for (const auto& f : schema.features) {
    json jf;
    jf["name"] = f.name;
    jf["category"] = to_string(f.category);
    jf["kind"] = to_string(f.kind);
    jf["missing_codes"] = f.missing_codes;
    if (f.derived) jf["derived"] = true;
    if (!f.categories.empty()) {
      jf["categories"] = json::array();
      for (const auto& c : f.categories)
        jf["categories"].push_back({{"code", c.code}, {"label", c.label}});
    }
    j["features"].push_back(std::move(jf));
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write schema file: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace sppb
