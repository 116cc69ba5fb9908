#include "sppb/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "csv_util.hpp"
#include "spec_json.hpp"
#include "sppb/errors.hpp"
#include "sppb/hash.hpp"
#include "sppb/parallel.hpp"
#include "sppb/preprocess.hpp"
#include "sppb/version.hpp"

namespace sppb {

namespace {

void check_metric_input(std::span<const double> y_true,
                        std::span<const double> y_pred) {
  if (y_true.empty()) throw DataError("metric input is empty");
  if (y_true.size() != y_pred.size()) {
    throw DataError("metric inputs have different lengths");
  }
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (!std::isfinite(y_true[i]) || !std::isfinite(y_pred[i])) {
      throw DataError("metric input contains non-finite values");
    }
  }
}

}  // namespace

double mae(std::span<const double> y_true, std::span<const double> y_pred) {
  check_metric_input(y_true, y_pred);
  double total = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    total += std::fabs(y_pred[i] - y_true[i]);
  }
  return total / static_cast<double>(y_true.size());
}

double mse(std::span<const double> y_true, std::span<const double> y_pred) {
  check_metric_input(y_true, y_pred);
  double total = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double diff = y_pred[i] - y_true[i];
    total += diff * diff;
  }
  return total / static_cast<double>(y_true.size());
}

FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ConfigError("fold count must be positive");
  if (n < k) {
    throw DataError("cannot split " + std::to_string(n) + " samples into " +
                    std::to_string(k) + " folds");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(perm);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(n, 0);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t pos = 0;
  for (std::size_t fold = 0; fold < k; ++fold) {
    const std::size_t size = base + (fold < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) {
      plan.assignments[perm[pos + i]] = fold;
    }
    pos += size;
  }
  return plan;
}

CvReport cross_validate(const SupervisedDataset& dataset,
                        const RegressorSpec& spec, const FoldPlan& folds,
                        const CvOptions& options) {
  if (dataset.size() == 0) throw DataError("cannot cross-validate an empty dataset");
  if (folds.assignments.size() != dataset.size()) {
    throw ConfigError("fold plan does not cover the dataset");
  }
  spec.validate();

  const std::size_t k = folds.k;
  CvReport report;
  report.spec = spec;
  report.fold_mae.assign(k, 0.0);
  report.fold_mse.assign(k, 0.0);
  report.fold_seconds.assign(k, 0.0);
  report.fold_model_digest.assign(k, 0);

  // Global scope fits preprocessing once on every row; fold scope refits
  // inside each fold on its training rows only.
  Matrix global_x;
  if (options.fit_scope == FitScope::global) {
    const PreprocessModel prep = fit_preprocess(dataset.X, options.k_neighbors);
    global_x = apply_preprocess(prep, dataset.X);
  }
  const Matrix& source = options.fit_scope == FitScope::global ? global_x
                                                               : dataset.X;

  std::vector<std::string> fold_error(k);
  parallel_for(k, [&](std::size_t fold) {
    const auto started = std::chrono::steady_clock::now();
    try {
      std::vector<std::size_t> train_idx;
      std::vector<std::size_t> test_idx;
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (folds.assignments[i] == fold) {
          test_idx.push_back(i);
        } else {
          train_idx.push_back(i);
        }
      }

      Matrix x_train;
      Matrix x_test;
      if (options.fit_scope == FitScope::fold) {
        const Matrix raw_train = source.select_rows(train_idx);
        const PreprocessModel prep =
            fit_preprocess(raw_train, options.k_neighbors);
        x_train = apply_preprocess(prep, raw_train);
        x_test = apply_preprocess(prep, source.select_rows(test_idx));
      } else {
        x_train = source.select_rows(train_idx);
        x_test = source.select_rows(test_idx);
      }

      std::vector<double> y_train(train_idx.size());
      for (std::size_t i = 0; i < train_idx.size(); ++i) {
        y_train[i] = static_cast<double>(dataset.y[train_idx[i]]);
      }
      std::vector<double> y_test(test_idx.size());
      for (std::size_t i = 0; i < test_idx.size(); ++i) {
        y_test[i] = static_cast<double>(dataset.y[test_idx[i]]);
      }

      RegressorSpec fold_spec = spec;
      fold_spec.seed = mix_seed(spec.seed, fold);
      const TrainedRegressor model = fit_regressor(x_train, y_train, fold_spec);
      const std::vector<double> pred = predict(model, x_test);
      report.fold_mae[fold] = mae(y_test, pred);
      report.fold_mse[fold] = mse(y_test, pred);
      report.fold_model_digest[fold] = fnv1a64(regressor_to_json(model));
    } catch (const std::exception& e) {
      fold_error[fold] = e.what();
    }
    const std::chrono::duration<double> elapsed =
        std::chrono::steady_clock::now() - started;
    report.fold_seconds[fold] = elapsed.count();
  });

  for (std::size_t fold = 0; fold < k; ++fold) {
    if (!fold_error[fold].empty()) {
      throw FitError("fold " + std::to_string(fold) + ": " + fold_error[fold]);
    }
  }

  for (std::size_t fold = 0; fold < k; ++fold) {
    report.mean_mae += report.fold_mae[fold];
    report.mean_mse += report.fold_mse[fold];
  }
  report.mean_mae /= static_cast<double>(k);
  report.mean_mse /= static_cast<double>(k);
  return report;
}

ParamGrid default_grid(Family family) {
  ParamGrid grid;
  switch (family) {
    case Family::linear:
      break;
    case Family::forest:
    case Family::boosted:
      grid.trees = {10, 50, 100, 200, 300};
      grid.max_depths = {2, 8, 16, 32, 64, kUnlimitedDepth};
      break;
    case Family::dense:
      for (const std::size_t layers : {2, 3, 4, 5}) {
        for (const std::size_t width : {8, 16, 32, 64, 128}) {
          grid.layer_sizes.push_back(
              std::vector<std::size_t>(layers, width));
        }
      }
      break;
  }
  return grid;
}

std::vector<RegressorSpec> expand_grid(const RegressorSpec& base,
                                       const ParamGrid& grid) {
  std::vector<RegressorSpec> specs;
  switch (base.family) {
    case Family::linear: {
      specs.push_back(base);
      break;
    }
    case Family::forest:
    case Family::boosted: {
      if (grid.trees.empty() || grid.max_depths.empty()) {
        throw ConfigError("tree-family grid needs trees and depth axes");
      }
      for (const int trees : grid.trees) {
        for (const int depth : grid.max_depths) {
          RegressorSpec spec = base;
          spec.trees = trees;
          spec.max_depth = depth;
          specs.push_back(std::move(spec));
        }
      }
      break;
    }
    case Family::dense: {
      if (grid.layer_sizes.empty()) {
        throw ConfigError("dense grid needs a layer-size axis");
      }
      for (const std::vector<std::size_t>& sizes : grid.layer_sizes) {
        RegressorSpec spec = base;
        spec.layer_sizes = sizes;
        specs.push_back(std::move(spec));
      }
      break;
    }
  }
  return specs;
}

namespace {

long long depth_rank(const RegressorSpec& spec) {
  if (spec.family != Family::forest && spec.family != Family::boosted) return 0;
  return spec.max_depth == kUnlimitedDepth
             ? std::numeric_limits<long long>::max()
             : spec.max_depth;
}

long long neuron_count(const RegressorSpec& spec) {
  if (spec.family != Family::dense) return 0;
  long long total = 0;
  for (const std::size_t width : spec.layer_sizes) {
    total += static_cast<long long>(width);
  }
  return total;
}

}  // namespace

std::vector<CvReport> grid_search(const SupervisedDataset& dataset,
                                  const std::vector<RegressorSpec>& specs,
                                  const FoldPlan& folds,
                                  const CvOptions& options) {
  if (specs.empty()) throw ConfigError("grid search needs at least one spec");

  // With global scope, preprocess once up front. Re-fitting on the already
  // preprocessed matrix inside each cell is an exact identity, so the cells
  // stay cheap without a second code path.
  SupervisedDataset prepared;
  const SupervisedDataset* source = &dataset;
  if (options.fit_scope == FitScope::global && dataset.size() > 0) {
    prepared = dataset;
    const PreprocessModel prep = fit_preprocess(prepared.X, options.k_neighbors);
    prepared.X = apply_preprocess(prep, prepared.X);
    source = &prepared;
  }

  std::vector<CvReport> reports;
  reports.reserve(specs.size());
  for (const RegressorSpec& spec : specs) {
    try {
      reports.push_back(cross_validate(*source, spec, folds, options));
    } catch (const std::exception& e) {
      CvReport failed;
      failed.spec = spec;
      failed.failed = true;
      failed.error = e.what();
      reports.push_back(std::move(failed));
    }
  }

  std::stable_sort(reports.begin(), reports.end(),
                   [](const CvReport& a, const CvReport& b) {
                     if (a.failed != b.failed) return !a.failed;
                     if (a.failed) return false;
                     if (a.mean_mae != b.mean_mae) return a.mean_mae < b.mean_mae;
                     if (a.spec.trees != b.spec.trees) {
                       return a.spec.trees < b.spec.trees;
                     }
                     if (depth_rank(a.spec) != depth_rank(b.spec)) {
                       return depth_rank(a.spec) < depth_rank(b.spec);
                     }
                     return neuron_count(a.spec) < neuron_count(b.spec);
                   });
  return reports;
}

std::string cv_reports_to_json(const std::vector<CvReport>& reports) {
  nlohmann::ordered_json doc;
  doc["format_version"] = 1;
  doc["tool_version"] = kToolVersion;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const CvReport& report : reports) {
    nlohmann::ordered_json cell;
    cell["spec"] = detail::spec_to_json(report.spec);
    cell["failed"] = report.failed;
    if (report.failed) {
      cell["error"] = report.error;
    } else {
      cell["fold_mae"] = report.fold_mae;
      cell["fold_mse"] = report.fold_mse;
      cell["fold_seconds"] = report.fold_seconds;
      cell["fold_model_digest"] = report.fold_model_digest;
      cell["mean_mae"] = report.mean_mae;
      cell["mean_mse"] = report.mean_mse;
    }
    cells.push_back(std::move(cell));
  }
  doc["cells"] = std::move(cells);
  return doc.dump(2);
}

std::string summary_table(const std::vector<CvReport>& reports) {
  std::string out = "model,mean_mae,mean_mse,parameters\n";
  for (const CvReport& report : reports) {
    out += to_string(report.spec.family);
    out += ',';
    if (report.failed) {
      out += "failed,failed,";
    } else {
      out += csv::format_double(report.mean_mae);
      out += ',';
      out += csv::format_double(report.mean_mse);
      out += ',';
    }
    out += '"';
    out += report.spec.parameter_summary();
    out += '"';
    out += '\n';
  }
  return out;
}

}  // namespace sppb
