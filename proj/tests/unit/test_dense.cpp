#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "sppb/dense.hpp"
#include "sppb/errors.hpp"
#include "sppb/matrix.hpp"
#include "sppb/regressor.hpp"
#include "sppb/rng.hpp"

using namespace sppb;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m;
  m.rows = rows;
  m.cols = cols;
  m.values.resize(rows * cols);
  for (double& v : m.values) v = rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(2024);
  DenseNet net = init_dense_net(6, {8, 16, 8}, rng);
  const Matrix x = random_matrix(5, 6, rng);
  std::vector<double> y(5);
  for (double& v : y) v = rng.uniform(-2.0, 2.0);

  const DenseGradient analytic = dense_loss_gradient(net, x, y);
  std::vector<double> params = dense_parameters(net);
  REQUIRE(analytic.grad.size() == params.size());

  DenseNet probe = net;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double h = 1e-5 * std::max(1.0, std::fabs(params[i]));
    const double saved = params[i];

    params[i] = saved + h;
    set_dense_parameters(probe, params);
    const double up = dense_loss_gradient(probe, x, y).loss;

    params[i] = saved - h;
    set_dense_parameters(probe, params);
    const double down = dense_loss_gradient(probe, x, y).loss;

    params[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double scale =
        std::max({std::fabs(numeric), std::fabs(analytic.grad[i]), 1e-6});
    worst = std::max(worst, std::fabs(numeric - analytic.grad[i]) / scale);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("gradient covers batch-norm parameters with nonzero signal") {
  Rng rng(7);
  DenseNet net = init_dense_net(3, {4}, rng);
  const Matrix x = random_matrix(6, 3, rng);
  std::vector<double> y(6);
  for (double& v : y) v = rng.uniform(-1.0, 1.0);
  const DenseGradient g = dense_loss_gradient(net, x, y);

  // Parameter layout: weight (12), bias (4), gamma (4), beta (4), out.
  double gamma_mass = 0.0;
  double beta_mass = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    gamma_mass += std::fabs(g.grad[16 + i]);
    beta_mass += std::fabs(g.grad[20 + i]);
  }
  CHECK(gamma_mass > 0.0);
  CHECK(beta_mass > 0.0);

  // Bias gradients vanish: batch normalization removes the batch mean, so
  // a bias shift cannot change the loss.
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::fabs(g.grad[12 + i]) < 1e-12);
  }
}

TEST_CASE("parameter vector round-trips through the network") {
  Rng rng(8);
  DenseNet net = init_dense_net(4, {5, 3}, rng);
  const std::vector<double> params = dense_parameters(net);
  DenseNet other = init_dense_net(4, {5, 3}, rng);
  set_dense_parameters(other, params);
  CHECK(dense_parameters(other) == params);

  std::vector<double> wrong(params.size() + 1, 0.0);
  CHECK_THROWS_AS(set_dense_parameters(net, wrong), ConfigError);
}

TEST_CASE("zero-epoch fit is deterministic under a fixed seed") {
  Rng rng(9);
  const Matrix x = random_matrix(30, 4, rng);
  std::vector<double> y(30);
  for (double& v : y) v = rng.uniform(0.0, 12.0);

  RegressorSpec spec;
  spec.family = Family::dense;
  spec.layer_sizes = {6, 4};
  spec.epochs = 0;
  spec.seed = 123;
  const TrainedRegressor a = fit_dense(x, y, spec);
  const TrainedRegressor b = fit_dense(x, y, spec);
  CHECK(predict(a, x) == predict(b, x));

  spec.seed = 124;
  const TrainedRegressor c = fit_dense(x, y, spec);
  CHECK(predict(a, x) != predict(c, x));
}

TEST_CASE("training reduces the loss on a learnable target") {
  Rng rng(10);
  const std::size_t n = 200;
  const Matrix x = random_matrix(n, 4, rng);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = 2.0 * x.at(i, 0) - 1.5 * x.at(i, 1) + x.at(i, 2) * x.at(i, 3);
  }

  RegressorSpec spec;
  spec.family = Family::dense;
  spec.layer_sizes = {8, 8};
  spec.epochs = 0;
  spec.batch_size = 32;
  spec.seed = 55;
  const TrainedRegressor before = fit_dense(x, y, spec);
  spec.epochs = 60;
  const TrainedRegressor after = fit_dense(x, y, spec);

  const auto mse_of = [&](const TrainedRegressor& model) {
    const std::vector<double> pred = predict(model, x);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += (pred[i] - y[i]) * (pred[i] - y[i]);
    }
    return total / static_cast<double>(n);
  };
  CHECK(mse_of(after) < 0.5 * mse_of(before));
}

TEST_CASE("training is reproducible and seed-sensitive") {
  Rng rng(12);
  const Matrix x = random_matrix(64, 3, rng);
  std::vector<double> y(64);
  for (double& v : y) v = rng.uniform(0.0, 5.0);

  RegressorSpec spec;
  spec.family = Family::dense;
  spec.layer_sizes = {5};
  spec.epochs = 3;
  spec.batch_size = 16;
  spec.seed = 31;
  const TrainedRegressor a = fit_dense(x, y, spec);
  const TrainedRegressor b = fit_dense(x, y, spec);
  CHECK(regressor_to_json(a) == regressor_to_json(b));
}

TEST_CASE("divergence is reported with the failing epoch") {
  Rng rng(14);
  const Matrix x = random_matrix(40, 3, rng);
  std::vector<double> y(40);
  for (double& v : y) v = rng.uniform(0.0, 5.0);

  Rng init_rng(1);
  DenseNet net = init_dense_net(3, {4}, init_rng);
  DenseTrainOptions options;
  options.epochs = 5;
  options.batch_size = 8;
  options.step_size = 1e160;  // pushes squared residuals past DBL_MAX
  options.seed = 2;
  CHECK_THROWS_WITH_AS(train_dense_net(net, x, y, options),
                       doctest::Contains("epoch"), FitError);
}

TEST_CASE("batch constraints are enforced") {
  Rng rng(15);
  DenseNet net = init_dense_net(3, {4}, rng);
  const Matrix single = random_matrix(1, 3, rng);
  const std::vector<double> y1 = {1.0};
  CHECK_THROWS_AS(dense_loss_gradient(net, single, y1), DataError);

  const Matrix wrong_width = random_matrix(4, 2, rng);
  const std::vector<double> y4(4, 1.0);
  CHECK_THROWS_AS(dense_loss_gradient(net, wrong_width, y4), DataError);
  CHECK_THROWS_AS(dense_predict(net, wrong_width), DataError);
}
