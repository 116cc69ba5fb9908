#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "sppb/errors.hpp"
#include "sppb/matrix.hpp"
#include "sppb/regressor.hpp"
#include "sppb/rng.hpp"

using namespace sppb;

namespace {

Matrix make_matrix(std::size_t rows, std::size_t cols,
                   std::vector<double> values) {
  Matrix m;
  m.rows = rows;
  m.cols = cols;
  m.values = std::move(values);
  return m;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m;
  m.rows = rows;
  m.cols = cols;
  m.values.resize(rows * cols);
  for (double& v : m.values) v = rng.uniform();
  return m;
}

}  // namespace

TEST_CASE("linear fit recovers an exact linear relation") {
  const std::size_t n = 12;
  Matrix x = make_matrix(n, 1, {});
  x.values.resize(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x.values[i] = 0.25 * static_cast<double>(i);
    y[i] = 2.0 * x.values[i] + 1.0;
  }
  const TrainedRegressor model = fit_linear(x, y);
  CHECK(model.coefficients.size() == 1);
  CHECK(model.coefficients[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(model.intercept == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("linear fit of a constant target is flat") {
  Rng rng(11);
  const Matrix x = random_matrix(20, 3, rng);
  const std::vector<double> y(20, 4.5);
  const TrainedRegressor model = fit_linear(x, y);
  for (const double c : model.coefficients) {
    CHECK(std::fabs(c) < 1e-7);
  }
  CHECK(model.intercept == doctest::Approx(4.5).epsilon(1e-8));
}

TEST_CASE("duplicated feature column does not break the linear solve") {
  Rng rng(13);
  const std::size_t n = 30;
  Matrix single = random_matrix(n, 1, rng);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = 3.0 * single.values[i] - 1.0 + 0.01 * rng.normal();
  }
  Matrix doubled = make_matrix(n, 2, {});
  doubled.values.resize(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    doubled.values[i * 2] = single.values[i];
    doubled.values[i * 2 + 1] = single.values[i];
  }
  const TrainedRegressor a = fit_linear(single, y);
  const TrainedRegressor b = fit_linear(doubled, y);
  const std::vector<double> pred_a = predict(a, single);
  const std::vector<double> pred_b = predict(b, doubled);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(pred_a[i] == doctest::Approx(pred_b[i]).epsilon(1e-6));
  }
}

TEST_CASE("degenerate forest equals the plain tree") {
  Rng rng(21);
  const Matrix x = random_matrix(40, 3, rng);
  std::vector<double> y(40);
  for (double& v : y) v = rng.uniform(0.0, 12.0);

  RegressorSpec spec;
  spec.family = Family::forest;
  spec.trees = 1;
  spec.max_depth = kUnlimitedDepth;
  spec.bootstrap = false;
  spec.features_per_split = 3;  // all features, no sampling
  spec.seed = 5;
  const TrainedRegressor forest = fit_forest(x, y, spec);
  const RegressionTree reference = fit_tree(x, y);

  REQUIRE(forest.trees.size() == 1);
  const RegressionTree& grown = forest.trees[0];
  REQUIRE(grown.nodes.size() == reference.nodes.size());
  for (std::size_t i = 0; i < grown.nodes.size(); ++i) {
    CHECK(grown.nodes[i].feature == reference.nodes[i].feature);
    CHECK(grown.nodes[i].threshold == reference.nodes[i].threshold);
    CHECK(grown.nodes[i].value == reference.nodes[i].value);
    CHECK(grown.nodes[i].cover == reference.nodes[i].cover);
    CHECK(grown.nodes[i].left == reference.nodes[i].left);
    CHECK(grown.nodes[i].right == reference.nodes[i].right);
  }
}

TEST_CASE("forest accepts the large reference configuration") {
  Rng rng(22);
  const Matrix x = random_matrix(50, 4, rng);
  std::vector<double> y(50);
  for (double& v : y) v = rng.uniform(0.0, 12.0);

  RegressorSpec spec;
  spec.family = Family::forest;
  spec.trees = 300;
  spec.max_depth = 16;
  spec.seed = 9;
  const TrainedRegressor model = fit_forest(x, y, spec);
  CHECK(model.trees.size() == 300);
  for (const RegressionTree& tree : model.trees) {
    CHECK(tree.depth() <= 16);
  }
}

TEST_CASE("forest predictions stay inside the training target hull") {
  Rng rng(23);
  const Matrix x = random_matrix(60, 4, rng);
  std::vector<double> y(60);
  for (std::size_t i = 0; i < y.size(); ++i) {
    // Deliberately awkward decimals: means of such values round in both
    // directions.
    y[i] = 0.1 * static_cast<double>(rng.uniform_int(1, 117));
  }
  const double lo = *std::min_element(y.begin(), y.end());
  const double hi = *std::max_element(y.begin(), y.end());

  RegressorSpec spec;
  spec.family = Family::forest;
  spec.trees = 40;
  spec.max_depth = kUnlimitedDepth;
  spec.seed = 3;
  const TrainedRegressor model = fit_forest(x, y, spec);

  const Matrix probe = random_matrix(200, 4, rng);
  for (const double value : predict(model, probe)) {
    CHECK(value >= lo);
    CHECK(value <= hi);
  }
  for (const double value : predict(model, x)) {
    CHECK(value >= lo);
    CHECK(value <= hi);
  }
}

TEST_CASE("forest prediction is the mean of its trees") {
  Rng rng(25);
  const Matrix x = random_matrix(30, 3, rng);
  std::vector<double> y(30);
  for (double& v : y) v = rng.uniform(0.0, 12.0);

  RegressorSpec spec;
  spec.family = Family::forest;
  spec.trees = 7;
  spec.max_depth = 4;
  spec.seed = 1;
  const TrainedRegressor model = fit_forest(x, y, spec);

  const Matrix probe = random_matrix(20, 3, rng);
  const std::vector<double> pred = predict(model, probe);
  for (std::size_t i = 0; i < probe.rows; ++i) {
    double total = 0.0;
    for (const RegressionTree& tree : model.trees) {
      total += tree.predict_row(probe.row(i));
    }
    double mean = total / static_cast<double>(model.trees.size());
    mean = std::min(std::max(mean, model.target_lo), model.target_hi);
    CHECK(pred[i] == mean);
  }
}

TEST_CASE("boosted with zero trees predicts the target mean") {
  const Matrix x = make_matrix(4, 1, {0, 1, 2, 3});
  const std::vector<double> y = {1.0, 2.0, 3.0, 6.0};
  RegressorSpec spec;
  spec.family = Family::boosted;
  spec.trees = 0;
  const TrainedRegressor model = fit_boosted(x, y, spec);
  CHECK(model.base_score == 3.0);
  for (const double value : predict(model, x)) {
    CHECK(value == 3.0);
  }
}

TEST_CASE("one full-strength boosted tree interpolates distinct samples") {
  // Dyadic-friendly targets make base + (y - base) reproduce y exactly.
  const Matrix x = make_matrix(8, 1, {0, 1, 2, 3, 4, 5, 6, 7});
  const std::vector<double> y = {0, 1, 2, 3, 4, 5, 6, 7};
  RegressorSpec spec;
  spec.family = Family::boosted;
  spec.trees = 1;
  spec.max_depth = kUnlimitedDepth;
  spec.learning_rate = 1.0;
  spec.l2_leaf_penalty = 0.0;
  const TrainedRegressor model = fit_boosted(x, y, spec);
  const std::vector<double> pred = predict(model, x);
  for (std::size_t i = 0; i < y.size(); ++i) {
    CHECK(pred[i] == y[i]);
  }
  REQUIRE(model.train_loss.size() == 1);
  CHECK(model.train_loss[0] == 0.0);
}

TEST_CASE("boosted training loss never increases") {
  Rng rng(31);
  const Matrix x = random_matrix(200, 5, rng);
  std::vector<double> y(200);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = 4.0 * x.at(i, 0) + 2.0 * x.at(i, 1) * x.at(i, 2) + rng.normal();
  }
  RegressorSpec spec;
  spec.family = Family::boosted;
  spec.trees = 50;
  spec.max_depth = 3;
  spec.learning_rate = 0.3;
  spec.l2_leaf_penalty = 1.0;
  const TrainedRegressor model = fit_boosted(x, y, spec);
  REQUIRE(model.train_loss.size() == 50);
  for (std::size_t i = 1; i < model.train_loss.size(); ++i) {
    CHECK(model.train_loss[i] <= model.train_loss[i - 1] * (1.0 + 1e-12) + 1e-12);
  }
  CHECK(model.train_loss.back() < model.train_loss.front());
}

TEST_CASE("boosted accepts the best reference configuration") {
  Rng rng(32);
  const Matrix x = random_matrix(80, 4, rng);
  std::vector<double> y(80);
  for (double& v : y) v = rng.uniform(0.0, 12.0);
  RegressorSpec spec;
  spec.family = Family::boosted;
  spec.trees = 100;
  spec.max_depth = 2;
  const TrainedRegressor model = fit_boosted(x, y, spec);
  CHECK(model.trees.size() == 100);
  for (const RegressionTree& tree : model.trees) {
    CHECK(tree.depth() <= 2);
  }
}

TEST_CASE("fits are reproducible and predictions bitwise stable") {
  Rng rng(41);
  const Matrix x = random_matrix(50, 4, rng);
  std::vector<double> y(50);
  for (double& v : y) v = rng.uniform(0.0, 12.0);
  const Matrix probe = random_matrix(25, 4, rng);

  RegressorSpec spec;
  spec.family = Family::forest;
  spec.trees = 12;
  spec.max_depth = 6;
  spec.seed = 77;
  const TrainedRegressor a = fit_forest(x, y, spec);
  const TrainedRegressor b = fit_forest(x, y, spec);
  CHECK(regressor_to_json(a) == regressor_to_json(b));
  const std::vector<double> first = predict(a, probe);
  const std::vector<double> second = predict(a, probe);
  CHECK(first == second);

  spec.seed = 78;
  const TrainedRegressor c = fit_forest(x, y, spec);
  CHECK(regressor_to_json(a) != regressor_to_json(c));
}

TEST_CASE("spec validation rejects out-of-range parameters") {
  RegressorSpec spec;
  spec.family = Family::boosted;
  spec.learning_rate = 0.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.learning_rate = 1.5;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.learning_rate = 0.3;
  spec.trees = -1;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.trees = 10;
  spec.max_depth = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.max_depth = kUnlimitedDepth;
  CHECK_NOTHROW(spec.validate());

  RegressorSpec forest;
  forest.family = Family::forest;
  forest.trees = 0;
  CHECK_THROWS_AS(forest.validate(), ConfigError);

  RegressorSpec dense;
  dense.family = Family::dense;
  dense.layer_sizes = {};
  CHECK_THROWS_AS(dense.validate(), ConfigError);
  dense.layer_sizes = {8, 0};
  CHECK_THROWS_AS(dense.validate(), ConfigError);
  dense.layer_sizes = {8};
  dense.batch_size = 1;
  CHECK_THROWS_AS(dense.validate(), ConfigError);
}

TEST_CASE("family names round-trip and unknown names are rejected") {
  for (const Family family :
       {Family::linear, Family::forest, Family::boosted, Family::dense}) {
    CHECK(family_from_string(to_string(family)) == family);
  }
  CHECK_THROWS_AS(family_from_string("tabnet"), ConfigError);
}

TEST_CASE("parameter summaries are compact and deterministic") {
  RegressorSpec spec;
  spec.family = Family::boosted;
  spec.trees = 100;
  spec.max_depth = 2;
  CHECK(spec.parameter_summary() == "trees=100, depth=2");
  spec.max_depth = kUnlimitedDepth;
  CHECK(spec.parameter_summary() == "trees=100, depth=none");
  spec.family = Family::dense;
  spec.layer_sizes = {8, 16, 8};
  CHECK(spec.parameter_summary() == "layers=8 16 8");
  spec.family = Family::linear;
  CHECK(spec.parameter_summary() == "-");
}

TEST_CASE("model files round-trip losslessly for prediction") {
  Rng rng(51);
  const Matrix x = random_matrix(40, 3, rng);
  std::vector<double> y(40);
  for (double& v : y) v = rng.uniform(0.0, 12.0);
  const Matrix probe = random_matrix(15, 3, rng);

  const auto roundtrip_exact = [&](const TrainedRegressor& model) {
    const std::string text = regressor_to_json(model);
    const TrainedRegressor restored = regressor_from_json(text);
    CHECK(predict(model, probe) == predict(restored, probe));
    CHECK(regressor_to_json(restored) == text);
  };

  roundtrip_exact(fit_linear(x, y));

  RegressorSpec forest;
  forest.family = Family::forest;
  forest.trees = 5;
  forest.max_depth = 4;
  forest.seed = 2;
  roundtrip_exact(fit_forest(x, y, forest));

  RegressorSpec boosted;
  boosted.family = Family::boosted;
  boosted.trees = 8;
  boosted.max_depth = 2;
  roundtrip_exact(fit_boosted(x, y, boosted));

  RegressorSpec dense;
  dense.family = Family::dense;
  dense.layer_sizes = {4, 3};
  dense.epochs = 2;
  dense.batch_size = 8;
  dense.seed = 4;
  roundtrip_exact(fit_dense(x, y, dense));

  // File round trip through the save/load pair.
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "sppb_model_roundtrip.json";
  const TrainedRegressor model = fit_boosted(x, y, boosted);
  save_regressor(model, path.string());
  const TrainedRegressor loaded = load_regressor(path.string());
  CHECK(predict(model, probe) == predict(loaded, probe));
  std::remove(path.string().c_str());

  CHECK_THROWS_AS(load_regressor("/nonexistent/model.json"), DataError);
  CHECK_THROWS_AS(regressor_from_json("{not json"), DataError);
  CHECK_THROWS_AS(regressor_from_json("{\"format_version\": 9}"), DataError);
}

TEST_CASE("fit dispatch honours the family and rejects mismatches") {
  Rng rng(61);
  const Matrix x = random_matrix(30, 3, rng);
  std::vector<double> y(30);
  for (double& v : y) v = rng.uniform(0.0, 12.0);

  RegressorSpec spec;
  spec.family = Family::linear;
  const TrainedRegressor model = fit_regressor(x, y, spec);
  CHECK(model.family == Family::linear);
  CHECK(model.n_features == 3);

  RegressorSpec wrong;
  wrong.family = Family::forest;
  CHECK_THROWS_AS(fit_boosted(x, y, wrong), ConfigError);

  Matrix with_gap = x;
  with_gap.values[4] = kMissing;
  RegressorSpec boosted;
  boosted.family = Family::boosted;
  boosted.trees = 2;
  CHECK_THROWS_AS(fit_boosted(with_gap, y, boosted), DataError);

  const Matrix narrow = random_matrix(5, 2, rng);
  CHECK_THROWS_AS(predict(model, narrow), DataError);
}
