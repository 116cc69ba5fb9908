#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sppb/dataset.hpp"
#include "sppb/regressor.hpp"

namespace sppb {

/// Both throw DataError on empty input, length mismatch, or non-finite
/// entries.
double mae(std::span<const double> y_true, std::span<const double> y_pred);
double mse(std::span<const double> y_true, std::span<const double> y_pred);

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> assignments;  // per sample, fold index < k
};

/// Seeded uniform shuffle, then a contiguous partition; the first n % k
/// folds hold one extra sample. Deterministic in (n, k, seed).
FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed);

enum class FitScope { fold, global };

struct CvOptions {
  std::size_t k_neighbors = 5;
  FitScope fit_scope = FitScope::fold;
};

struct CvReport {
  RegressorSpec spec;
  std::vector<double> fold_mae;
  std::vector<double> fold_mse;
  std::vector<double> fold_seconds;
  // Digest of each fold's serialized model; lets tests assert that held-out
  // rows never leak into training artifacts.
  std::vector<std::uint64_t> fold_model_digest;
  double mean_mae = 0.0;
  double mean_mse = 0.0;
  bool failed = false;
  std::string error;
};

/// Per fold: preprocessing fitted per options.fit_scope, model fitted on the
/// training rows with seed mixed from (spec.seed, fold), metrics on the
/// held-out rows. Fit errors surface as FitError annotated with the fold.
CvReport cross_validate(const SupervisedDataset& dataset,
                        const RegressorSpec& spec, const FoldPlan& folds,
                        const CvOptions& options);

struct ParamGrid {
  std::vector<int> trees;
  std::vector<int> max_depths;  // kUnlimitedDepth for unbounded
  std::vector<std::vector<std::size_t>> layer_sizes;
};

/// The published search space per family: tree ensembles scan
/// {10,50,100,200,300} trees x depths {2,8,16,32,64,unlimited}; the dense
/// family scans {2,3,4,5} uniform layers of {8,16,32,64,128} neurons;
/// linear has a single cell.
ParamGrid default_grid(Family family);

/// Full Cartesian product of the grid axes applicable to base.family,
/// holding every other field of base fixed. Enumeration order: trees outer,
/// depths inner; layer lists in given order.
std::vector<RegressorSpec> expand_grid(const RegressorSpec& base,
                                       const ParamGrid& grid);

/// Evaluates every spec under one shared fold plan and ranks by mean MAE
/// ascending with ties broken by fewer trees, then shallower depth
/// (unlimited deepest), then smaller total neuron count. A failed cell is
/// recorded as failed and ranked after every successful cell.
std::vector<CvReport> grid_search(const SupervisedDataset& dataset,
                                  const std::vector<RegressorSpec>& specs,
                                  const FoldPlan& folds,
                                  const CvOptions& options);

/// One structured record per cell, ranked order, timings included.
std::string cv_reports_to_json(const std::vector<CvReport>& reports);

/// Flat delimited table (model, mean MAE, mean MSE, parameters). Contains
/// no timings, so identical runs emit identical bytes.
std::string summary_table(const std::vector<CvReport>& reports);

}  // namespace sppb
