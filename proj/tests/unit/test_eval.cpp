#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "sppb/errors.hpp"
#include "sppb/eval.hpp"
#include "sppb/parallel.hpp"
#include "sppb/rng.hpp"

using namespace sppb;

namespace {

SupervisedDataset toy_dataset(std::size_t n, std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  SupervisedDataset ds;
  ds.X.rows = n;
  ds.X.cols = p;
  ds.X.values.resize(n * p);
  for (double& v : ds.X.values) {
    v = static_cast<double>(rng.uniform_int(0, 4));
  }
  ds.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double target = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      target += static_cast<double>(j + 1) * ds.X.at(i, j);
    }
    ds.y[i] = static_cast<int>(target);
  }
  for (std::size_t j = 0; j < p; ++j) {
    ds.feature_names.push_back("f" + std::to_string(j));
  }
  return ds;
}

}  // namespace

TEST_CASE("error metrics compute the stated values") {
  const std::vector<double> truth = {1.0, 3.0};
  const std::vector<double> zeros = {0.0, 0.0};
  CHECK(mae(truth, zeros) == 2.0);
  CHECK(mse(truth, zeros) == 5.0);
  CHECK(mae(truth, truth) == 0.0);
  CHECK(mse(truth, truth) == 0.0);
}

TEST_CASE("error metrics reject malformed input") {
  const std::vector<double> empty;
  const std::vector<double> one = {1.0};
  const std::vector<double> two = {1.0, 2.0};
  const std::vector<double> bad = {std::nan("")};
  CHECK_THROWS_AS(mae(empty, empty), DataError);
  CHECK_THROWS_AS(mse(one, two), DataError);
  CHECK_THROWS_AS(mae(one, bad), DataError);
  CHECK_THROWS_AS(mse(bad, one), DataError);
}

TEST_CASE("constant mean predictor yields the population variance") {
  Rng rng(3);
  std::vector<double> y(100);
  for (double& v : y) v = rng.uniform(0.0, 12.0);
  double mean = 0.0;
  for (const double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  const std::vector<double> pred(y.size(), mean);

  double variance = 0.0;
  for (const double v : y) variance += (v - mean) * (v - mean);
  variance /= static_cast<double>(y.size());
  CHECK(mse(y, pred) == variance);
  CHECK(mae(y, pred) * mae(y, pred) <= mse(y, pred));
}

TEST_CASE("fold plans partition the data into near-equal folds") {
  SUBCASE("even split") {
    const FoldPlan plan = make_folds(100, 10, 7);
    std::vector<std::size_t> counts(10, 0);
    for (const std::size_t f : plan.assignments) {
      REQUIRE(f < 10);
      ++counts[f];
    }
    for (const std::size_t c : counts) CHECK(c == 10);
  }
  SUBCASE("remainder spreads over the first folds") {
    const FoldPlan plan = make_folds(105, 10, 7);
    std::vector<std::size_t> counts(10, 0);
    for (const std::size_t f : plan.assignments) ++counts[f];
    for (std::size_t f = 0; f < 5; ++f) CHECK(counts[f] == 11);
    for (std::size_t f = 5; f < 10; ++f) CHECK(counts[f] == 10);
  }
  SUBCASE("deterministic and seed-sensitive") {
    const FoldPlan a = make_folds(64, 8, 1);
    const FoldPlan b = make_folds(64, 8, 1);
    const FoldPlan c = make_folds(64, 8, 2);
    CHECK(a.assignments == b.assignments);
    CHECK(a.assignments != c.assignments);
  }
  SUBCASE("rejects more folds than samples") {
    CHECK_THROWS_AS(make_folds(5, 10, 0), DataError);
    CHECK_THROWS_AS(make_folds(5, 0, 0), ConfigError);
  }
}

TEST_CASE("cross-validation recovers a noiseless linear target") {
  const SupervisedDataset ds = toy_dataset(60, 3, 11);
  const FoldPlan folds = make_folds(ds.size(), 5, 3);
  RegressorSpec spec;
  spec.family = Family::linear;
  CvOptions options;
  options.fit_scope = FitScope::global;
  const CvReport report = cross_validate(ds, spec, folds, options);
  CHECK_FALSE(report.failed);
  CHECK(report.mean_mae < 1e-6);
  REQUIRE(report.fold_mae.size() == 5);
  REQUIRE(report.fold_seconds.size() == 5);
}

TEST_CASE("tree families drive a constant target to zero error") {
  SupervisedDataset ds = toy_dataset(40, 2, 13);
  std::fill(ds.y.begin(), ds.y.end(), 7);
  const FoldPlan folds = make_folds(ds.size(), 4, 5);
  CvOptions options;

  RegressorSpec forest;
  forest.family = Family::forest;
  forest.trees = 5;
  forest.max_depth = 3;
  CHECK(cross_validate(ds, forest, folds, options).mean_mae == 0.0);

  RegressorSpec boosted;
  boosted.family = Family::boosted;
  boosted.trees = 5;
  boosted.max_depth = 2;
  CHECK(cross_validate(ds, boosted, folds, options).mean_mae == 0.0);
}

TEST_CASE("report means equal the arithmetic fold means") {
  const SupervisedDataset ds = toy_dataset(50, 3, 17);
  const FoldPlan folds = make_folds(ds.size(), 5, 1);
  RegressorSpec spec;
  spec.family = Family::boosted;
  spec.trees = 10;
  spec.max_depth = 2;
  const CvReport report = cross_validate(ds, spec, folds, CvOptions{});

  double mean_mae = 0.0;
  double mean_mse = 0.0;
  for (std::size_t f = 0; f < folds.k; ++f) {
    mean_mae += report.fold_mae[f];
    mean_mse += report.fold_mse[f];
    CHECK(report.fold_mae[f] * report.fold_mae[f] <=
          report.fold_mse[f] * (1.0 + 1e-12));
  }
  CHECK(report.mean_mae == mean_mae / static_cast<double>(folds.k));
  CHECK(report.mean_mse == mean_mse / static_cast<double>(folds.k));
}

TEST_CASE("held-out rows never shape their own fold's model") {
  const SupervisedDataset clean = toy_dataset(48, 3, 19);
  const FoldPlan folds = make_folds(clean.size(), 4, 9);
  RegressorSpec spec;
  spec.family = Family::boosted;
  spec.trees = 8;
  spec.max_depth = 2;
  spec.seed = 21;
  CvOptions options;
  options.fit_scope = FitScope::fold;
  const CvReport base = cross_validate(clean, spec, folds, options);

  SupervisedDataset poisoned = clean;
  for (std::size_t i = 0; i < poisoned.size(); ++i) {
    if (folds.assignments[i] == 0) {
      for (std::size_t j = 0; j < poisoned.X.cols; ++j) {
        poisoned.X.at(i, j) = 999.0;
      }
      poisoned.y[i] = 12;
    }
  }
  const CvReport after = cross_validate(poisoned, spec, folds, options);

  // Fold 0 trains without its own rows: same model bits. Other folds see
  // the poisoned rows in training and must change.
  CHECK(after.fold_model_digest[0] == base.fold_model_digest[0]);
  CHECK(after.fold_mae[0] != base.fold_mae[0]);
  bool any_changed = false;
  for (std::size_t f = 1; f < folds.k; ++f) {
    any_changed |= after.fold_model_digest[f] != base.fold_model_digest[f];
  }
  CHECK(any_changed);
}

TEST_CASE("fit failures carry the fold index") {
  SupervisedDataset ds = toy_dataset(20, 2, 23);
  const FoldPlan folds = make_folds(ds.size(), 4, 2);
  RegressorSpec bad;
  bad.family = Family::dense;
  bad.layer_sizes = {};
  CHECK_THROWS_AS(cross_validate(ds, bad, folds, CvOptions{}), ConfigError);

  // A spec that validates but cannot fit: poison one training cell so the
  // fit sees a missing value after fold-scope preprocessing is bypassed.
  RegressorSpec dense;
  dense.family = Family::dense;
  dense.layer_sizes = {3};
  dense.epochs = 1;
  dense.batch_size = 4;
  SupervisedDataset gap = ds;
  gap.X.at(0, 0) = kMissing;
  CvOptions global;
  global.fit_scope = FitScope::fold;
  // Imputation fills the gap, so this must still succeed.
  CHECK_NOTHROW(cross_validate(gap, dense, folds, global));

  // A column observed only in fold 0's held-out rows leaves fold 0 with
  // nothing to impute from; the error must name the fold.
  SupervisedDataset holed = toy_dataset(12, 2, 43);
  const FoldPlan three = make_folds(12, 3, 1);
  for (std::size_t i = 0; i < holed.size(); ++i) {
    if (three.assignments[i] != 0) holed.X.at(i, 1) = kMissing;
  }
  RegressorSpec boosted;
  boosted.family = Family::boosted;
  boosted.trees = 2;
  boosted.max_depth = 2;
  CHECK_THROWS_WITH_AS(cross_validate(holed, boosted, three, CvOptions{}),
                       doctest::Contains("fold 0"), FitError);
}

TEST_CASE("published grids enumerate the documented cells") {
  RegressorSpec forest_base;
  forest_base.family = Family::forest;
  const std::vector<RegressorSpec> forest_cells =
      expand_grid(forest_base, default_grid(Family::forest));
  CHECK(forest_cells.size() == 30);
  CHECK(forest_cells.front().trees == 10);
  CHECK(forest_cells.front().max_depth == 2);
  CHECK(forest_cells.back().trees == 300);
  CHECK(forest_cells.back().max_depth == kUnlimitedDepth);

  RegressorSpec boosted_base;
  boosted_base.family = Family::boosted;
  CHECK(expand_grid(boosted_base, default_grid(Family::boosted)).size() == 30);

  RegressorSpec dense_base;
  dense_base.family = Family::dense;
  const std::vector<RegressorSpec> dense_cells =
      expand_grid(dense_base, default_grid(Family::dense));
  CHECK(dense_cells.size() == 20);
  CHECK(dense_cells.front().layer_sizes == std::vector<std::size_t>{8, 8});
  CHECK(dense_cells.back().layer_sizes ==
        std::vector<std::size_t>(5, 128));

  RegressorSpec linear_base;
  linear_base.family = Family::linear;
  CHECK(expand_grid(linear_base, default_grid(Family::linear)).size() == 1);
}

TEST_CASE("single-cell grid equals plain cross-validation") {
  const SupervisedDataset ds = toy_dataset(40, 2, 29);
  const FoldPlan folds = make_folds(ds.size(), 4, 4);
  RegressorSpec spec;
  spec.family = Family::boosted;
  spec.trees = 6;
  spec.max_depth = 2;
  const CvOptions options;

  const CvReport direct = cross_validate(ds, spec, folds, options);
  const std::vector<CvReport> ranked =
      grid_search(ds, {spec}, folds, options);
  REQUIRE(ranked.size() == 1);
  CHECK_FALSE(ranked[0].failed);
  CHECK(ranked[0].fold_mae == direct.fold_mae);
  CHECK(ranked[0].fold_mse == direct.fold_mse);
  CHECK(ranked[0].fold_model_digest == direct.fold_model_digest);
  CHECK(ranked[0].mean_mae == direct.mean_mae);
  CHECK(ranked[0].mean_mse == direct.mean_mse);
}

TEST_CASE("failed cells are recorded and ranked last") {
  const SupervisedDataset ds = toy_dataset(30, 2, 31);
  const FoldPlan folds = make_folds(ds.size(), 3, 6);
  RegressorSpec good;
  good.family = Family::boosted;
  good.trees = 4;
  good.max_depth = 2;
  RegressorSpec bad;
  bad.family = Family::dense;
  bad.layer_sizes = {};

  const std::vector<CvReport> ranked =
      grid_search(ds, {bad, good}, folds, CvOptions{});
  REQUIRE(ranked.size() == 2);
  CHECK_FALSE(ranked[0].failed);
  CHECK(ranked[1].failed);
  CHECK_FALSE(ranked[1].error.empty());
}

TEST_CASE("ranking ties break by trees then depth") {
  SupervisedDataset ds = toy_dataset(30, 2, 37);
  std::fill(ds.y.begin(), ds.y.end(), 5);  // all cells tie at zero error
  const FoldPlan folds = make_folds(ds.size(), 3, 8);

  const auto forest_spec = [](int trees, int depth) {
    RegressorSpec spec;
    spec.family = Family::forest;
    spec.trees = trees;
    spec.max_depth = depth;
    return spec;
  };
  const std::vector<RegressorSpec> specs = {
      forest_spec(20, 2), forest_spec(10, kUnlimitedDepth), forest_spec(10, 2)};
  const std::vector<CvReport> ranked = grid_search(ds, specs, folds, CvOptions{});
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0].spec.trees == 10);
  CHECK(ranked[0].spec.max_depth == 2);
  CHECK(ranked[1].spec.trees == 10);
  CHECK(ranked[1].spec.max_depth == kUnlimitedDepth);
  CHECK(ranked[2].spec.trees == 20);
}

TEST_CASE("summary tables are bitwise stable across runs and threads") {
  const SupervisedDataset ds = toy_dataset(45, 3, 41);
  const FoldPlan folds = make_folds(ds.size(), 5, 12);
  RegressorSpec base;
  base.family = Family::boosted;
  ParamGrid grid;
  grid.trees = {4, 8};
  grid.max_depths = {2, kUnlimitedDepth};
  const std::vector<RegressorSpec> specs = expand_grid(base, grid);

  set_max_threads(1);
  const std::string serial = summary_table(grid_search(ds, specs, folds, CvOptions{}));
  const std::string again = summary_table(grid_search(ds, specs, folds, CvOptions{}));
  set_max_threads(3);
  const std::string threaded =
      summary_table(grid_search(ds, specs, folds, CvOptions{}));
  set_max_threads(1);

  CHECK(serial == again);
  CHECK(serial == threaded);
  CHECK(serial.find("model,mean_mae,mean_mse,parameters\n") == 0);
  CHECK(serial.find("trees=4, depth=none") != std::string::npos);

  const std::string json_report =
      cv_reports_to_json(grid_search(ds, specs, folds, CvOptions{}));
  CHECK(json_report.find("\"mean_mae\"") != std::string::npos);
  CHECK(json_report.find("\"fold_seconds\"") != std::string::npos);
}
