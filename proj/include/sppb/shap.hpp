#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sppb/eval.hpp"
#include "sppb/matrix.hpp"
#include "sppb/regressor.hpp"

namespace sppb {

/// Signed per-sample, per-feature contributions. For every sample the base
/// value plus the row sum reproduces the model prediction within 1e-9.
struct AttributionMatrix {
  Matrix values;
  double base_value = 0.0;
  std::vector<std::string> feature_names;
};

struct RankedFeature {
  std::string name;
  double importance = 0.0;  // mean absolute attribution
};

struct FeatureRanking {
  std::vector<RankedFeature> entries;  // importance descending, ties by name
};

/// Exact Shapley values for a tree-ensemble model under tree-path-dependent
/// conditional expectations: an absent feature routes a fraction of the
/// prediction down each child in proportion to training cover. Forest
/// attributions average the per-tree values; boosted attributions sum the
/// learning-rate-scaled trees on top of the base score. The base value is
/// the cover-weighted expected leaf value of the ensemble. Rows are
/// attributed independently and may run in parallel; output order always
/// matches input order. Empty feature_names defaults to f0..f{p-1}.
AttributionMatrix tree_shap(const TrainedRegressor& model, const Matrix& x,
                            std::vector<std::string> feature_names = {});

/// Classical Shapley formula over all feature subsets with the same
/// path-dependent expectation semantics as tree_shap. Exponential in the
/// feature count, so it refuses more than 20 features.
std::vector<double> brute_force_shap(const TrainedRegressor& model,
                                     std::span<const double> x);

/// Closed-form attribution for the linear family: coefficient times the
/// feature's offset from its column mean over x; the base value is the
/// prediction at the column means.
AttributionMatrix linear_attributions(const TrainedRegressor& model,
                                      const Matrix& x,
                                      std::vector<std::string> feature_names = {});

/// Importance is the mean absolute attribution per feature, sorted
/// descending; exact ties fall back to name order.
FeatureRanking rank_features(const AttributionMatrix& attr);

/// Component scores and raw timed measurements of the target assessment;
/// the current total score stays in. Used when picking reduced feature sets
/// so the simplified model cannot lean on near-copies of the target.
std::vector<std::string> default_shap_exclusions();

/// First k ranked features after dropping the exclusions; throws
/// ConfigError when fewer than k remain.
std::vector<std::string> select_top_k(const FeatureRanking& ranking,
                                      std::size_t k,
                                      const std::vector<std::string>& exclusions);

/// Restricts the dataset to the top-k selection (columns kept in their
/// original order) and cross-validates a boosted model with 100 trees of
/// depth 2 under the given fold plan.
CvReport simplify_and_retrain(const SupervisedDataset& dataset,
                              const FeatureRanking& ranking, std::size_t k,
                              const std::vector<std::string>& exclusions,
                              const FoldPlan& folds, const CvOptions& options = {},
                              std::uint64_t model_seed = 0);

/// Writes per-point records (feature, rank, scaled_value, shap_value,
/// sample_id) for the top_m ranked features, one block per feature in rank
/// order, plus a static beeswarm SVG with fixed jitter and color constants.
/// An empty svg_path skips the image. The data file is the contract; the
/// image is best-effort.
void export_beeswarm(const AttributionMatrix& attr, const Matrix& x_scaled,
                     const std::string& csv_path, const std::string& svg_path,
                     std::size_t top_m = 15);

}  // namespace sppb
