#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sppb/matrix.hpp"
#include "sppb/rng.hpp"

namespace sppb {

/// One hidden block: affine map, batch normalization, rectified linear.
struct DenseLayerParams {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // row-major, in x out
  std::vector<double> bias;
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
};

struct DenseNet {
  std::size_t input_dim = 0;
  std::vector<DenseLayerParams> hidden;
  std::vector<double> out_weight;
  double out_bias = 0.0;

  bool initialized() const { return input_dim > 0; }
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// He-initialized network: hidden weights ~ N(0, 2/fan_in), output weights
/// ~ N(0, 1/fan_in), biases zero, gamma 1, beta 0, running stats (0, 1).
DenseNet init_dense_net(std::size_t input_dim,
                        const std::vector<std::size_t>& layer_sizes, Rng& rng);

/// Learnable parameters in a fixed order (per hidden layer: weight, bias,
/// gamma, beta; then output weight, output bias). Running statistics are
/// not parameters and are excluded.
std::vector<double> dense_parameters(const DenseNet& net);
void set_dense_parameters(DenseNet& net, std::span<const double> params);

struct DenseGradient {
  double loss = 0.0;
  std::vector<double> grad;  // dense_parameters order
};

/// Mean-squared-error loss and its analytic gradient on one batch, with
/// batch normalization using the batch's own statistics. Running statistics
/// are left untouched; the batch must hold at least two rows.
DenseGradient dense_loss_gradient(const DenseNet& net, const Matrix& x,
                                  std::span<const double> y);

/// Inference pass normalizing with the stored running statistics.
std::vector<double> dense_predict(const DenseNet& net, const Matrix& x);

struct DenseTrainOptions {
  int epochs = 200;
  std::size_t batch_size = 64;
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
};

/// Mini-batch training with adaptive moment estimation. Rows are
/// reshuffled every epoch; a trailing batch of fewer than two rows is
/// dropped because batch statistics need at least two. Throws FitError
/// naming the epoch if the loss stops being finite.
void train_dense_net(DenseNet& net, const Matrix& x, std::span<const double> y,
                     const DenseTrainOptions& options);

}  // namespace sppb
