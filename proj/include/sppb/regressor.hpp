#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sppb/dense.hpp"
#include "sppb/matrix.hpp"
#include "sppb/tree.hpp"

namespace sppb {

enum class Family { linear, forest, boosted, dense };

std::string to_string(Family family);
Family family_from_string(const std::string& name);

inline constexpr int kUnlimitedDepth = -1;

struct RegressorSpec {
  Family family = Family::boosted;
  int trees = 100;
  int max_depth = 2;  // kUnlimitedDepth grows until nothing improves
  double min_samples_leaf = 1.0;
  double learning_rate = 0.3;
  double l2_leaf_penalty = 1.0;
  std::size_t features_per_split = 0;  // forest only; 0 applies the p/3 rule
  bool bootstrap = true;               // forest only; off is a test hook
  std::vector<std::size_t> layer_sizes = {8, 16, 8};
  int epochs = 200;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError on violated invariants
  std::string parameter_summary() const;
};

struct TrainedRegressor {
  Family family = Family::linear;
  RegressorSpec spec;
  std::size_t n_features = 0;

  // linear
  std::vector<double> coefficients;
  double intercept = 0.0;

  // tree families; boosted trees carry learning-rate-scaled leaf values
  std::vector<RegressionTree> trees;
  double base_score = 0.0;
  // Forest predictions are means of per-leaf means, so they stay inside the
  // training target hull in exact arithmetic; the stored hull corrects the
  // odd one-ulp rounding escape.
  double target_lo = 0.0;
  double target_hi = 0.0;
  std::vector<double> train_loss;  // boosted, training MSE after each round

  // dense
  DenseNet net;
};

TrainedRegressor fit_linear(const Matrix& x, std::span<const double> y);
TrainedRegressor fit_forest(const Matrix& x, std::span<const double> y,
                            const RegressorSpec& spec);
TrainedRegressor fit_boosted(const Matrix& x, std::span<const double> y,
                             const RegressorSpec& spec);
TrainedRegressor fit_dense(const Matrix& x, std::span<const double> y,
                           const RegressorSpec& spec);

/// Dispatches on spec.family.
TrainedRegressor fit_regressor(const Matrix& x, std::span<const double> y,
                               const RegressorSpec& spec);

std::vector<double> predict(const TrainedRegressor& model, const Matrix& x);

/// Versioned JSON model format; round-trips losslessly for predict.
std::string regressor_to_json(const TrainedRegressor& model);
TrainedRegressor regressor_from_json(const std::string& text);
void save_regressor(const TrainedRegressor& model, const std::string& path);
TrainedRegressor load_regressor(const std::string& path);

}  // namespace sppb
