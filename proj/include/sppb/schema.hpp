#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace sppb {

enum class FeatureKind { continuous, binary, ordinal, nominal };

/// The thirteen variable categories of the feature table.
enum class FeatureCategory {
  demographics,
  health_state,
  medical_procedures,
  recent_medical_history,
  physical_capabilities,
  sensory_capabilities,
  cognitive_functions,
  falls_and_outcomes,
  physical_performance,
  derived_scores,
  daily_functioning,
  habits,
  physical_measures,
};

const char* to_string(FeatureKind k);
const char* to_string(FeatureCategory c);
FeatureKind feature_kind_from_string(const std::string& s);
FeatureCategory feature_category_from_string(const std::string& s);

struct NominalCategory {
  int code = 0;
  std::string label;
};

struct FeatureDef {
  std::string name;
  FeatureCategory category = FeatureCategory::demographics;
  FeatureKind kind = FeatureKind::continuous;
  std::vector<double> missing_codes;
  std::vector<NominalCategory> categories;  // nominal features only
  /// Derived features are computed from the timed measurements when the
  /// supervised dataset is assembled; they are never read from a cohort file.
  bool derived = false;
};

struct FeatureSchema {
  std::string name;
  std::string note;
  std::vector<FeatureDef> features;

  /// Column count after one-hot expansion of nominal features.
  std::size_t expanded_width() const;
  /// Column names after expansion; a nominal feature "f" with categories
  /// {a, b} expands to "f=a", "f=b" in declared order.
  std::vector<std::string> expanded_names() const;

  const FeatureDef* find(const std::string& feature_name) const;
  std::size_t index_of(const std::string& feature_name) const;

  /// Checks name uniqueness and that nominal features declare categories.
  void validate() const;
};

/// The shipped default schema: a reconstruction of the feature table with 95
/// expanded columns across the thirteen categories.
FeatureSchema default_schema();

FeatureSchema load_schema(const std::string& path);
void save_schema(const FeatureSchema& schema, const std::string& path);

}  // namespace sppb
