#include "sppb/dense.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "sppb/errors.hpp"

namespace sppb {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;

ConstMap map_matrix(const Matrix& x) {
  return ConstMap(x.values.data(), static_cast<Eigen::Index>(x.rows),
                  static_cast<Eigen::Index>(x.cols));
}

ConstMap map_weight(const DenseLayerParams& layer) {
  return ConstMap(layer.weight.data(), static_cast<Eigen::Index>(layer.in),
                  static_cast<Eigen::Index>(layer.out));
}

std::size_t parameter_count(const DenseNet& net) {
  std::size_t count = 0;
  for (const DenseLayerParams& layer : net.hidden) {
    count += layer.weight.size() + layer.bias.size() + layer.gamma.size() +
             layer.beta.size();
  }
  return count + net.out_weight.size() + 1;
}

struct LayerCache {
  RowMat input;    // activations entering the layer
  RowMat xhat;     // batch-normalized pre-activation
  RowMat pre_act;  // gamma * xhat + beta, the rectifier input
  std::vector<double> inv_std;
};

/// Training-mode pass over one batch. Batch statistics normalize the
/// activations; when running != nullptr the layer's running statistics
/// absorb them with the configured momentum (unbiased variance). The
/// gradient, when requested, covers every learnable parameter.
double batch_pass(const DenseNet& net, const Matrix& x,
                  std::span<const double> y, std::vector<double>* grad,
                  DenseNet* running) {
  const std::size_t m = x.rows;
  if (m < 2) {
    throw DataError("batch normalization needs at least two rows per batch");
  }
  if (x.cols != net.input_dim) {
    throw DataError("feature count does not match the network input width");
  }

  const std::size_t n_layers = net.hidden.size();
  std::vector<LayerCache> caches(n_layers);
  RowMat activ = map_matrix(x);

  for (std::size_t l = 0; l < n_layers; ++l) {
    const DenseLayerParams& layer = net.hidden[l];
    LayerCache& cache = caches[l];
    cache.input = activ;

    RowMat z = cache.input * map_weight(layer);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < layer.out; ++k) {
        z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) +=
            layer.bias[k];
      }
    }

    cache.inv_std.resize(layer.out);
    cache.xhat.resize(z.rows(), z.cols());
    cache.pre_act.resize(z.rows(), z.cols());
    for (std::size_t k = 0; k < layer.out; ++k) {
      const Eigen::Index kc = static_cast<Eigen::Index>(k);
      double mean = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        mean += z(static_cast<Eigen::Index>(i), kc);
      }
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double centered = z(static_cast<Eigen::Index>(i), kc) - mean;
        var += centered * centered;
      }
      var /= static_cast<double>(m);
      const double inv_std = 1.0 / std::sqrt(var + kBatchNormEps);
      cache.inv_std[k] = inv_std;
      for (std::size_t i = 0; i < m; ++i) {
        const Eigen::Index ic = static_cast<Eigen::Index>(i);
        const double xhat = (z(ic, kc) - mean) * inv_std;
        cache.xhat(ic, kc) = xhat;
        cache.pre_act(ic, kc) = layer.gamma[k] * xhat + layer.beta[k];
      }
      if (running != nullptr) {
        DenseLayerParams& mut = running->hidden[l];
        const double unbiased =
            var * static_cast<double>(m) / static_cast<double>(m - 1);
        mut.running_mean[k] = (1.0 - kBatchNormMomentum) * mut.running_mean[k] +
                              kBatchNormMomentum * mean;
        mut.running_var[k] = (1.0 - kBatchNormMomentum) * mut.running_var[k] +
                             kBatchNormMomentum * unbiased;
      }
    }
    activ = cache.pre_act.cwiseMax(0.0);
  }

  std::vector<double> pred(m, 0.0);
  std::vector<double> resid(m, 0.0);
  double loss = 0.0;
  const std::size_t last_width = net.out_weight.size();
  for (std::size_t i = 0; i < m; ++i) {
    double value = net.out_bias;
    for (std::size_t k = 0; k < last_width; ++k) {
      value += activ(static_cast<Eigen::Index>(i),
                     static_cast<Eigen::Index>(k)) *
               net.out_weight[k];
    }
    pred[i] = value;
    resid[i] = value - y[i];
    loss += resid[i] * resid[i];
  }
  loss /= static_cast<double>(m);
  if (grad == nullptr) return loss;

  grad->assign(parameter_count(net), 0.0);
  // Gradient slices follow the dense_parameters layout.
  std::vector<std::size_t> offsets(n_layers);
  {
    std::size_t off = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
      offsets[l] = off;
      const DenseLayerParams& layer = net.hidden[l];
      off += layer.weight.size() + layer.bias.size() + layer.gamma.size() +
             layer.beta.size();
    }
  }
  const std::size_t out_weight_off = parameter_count(net) - last_width - 1;

  RowMat d_activ(static_cast<Eigen::Index>(m),
                 static_cast<Eigen::Index>(last_width));
  for (std::size_t i = 0; i < m; ++i) {
    const double d_pred = 2.0 * resid[i] / static_cast<double>(m);
    (*grad)[parameter_count(net) - 1] += d_pred;
    for (std::size_t k = 0; k < last_width; ++k) {
      const Eigen::Index ic = static_cast<Eigen::Index>(i);
      const Eigen::Index kc = static_cast<Eigen::Index>(k);
      (*grad)[out_weight_off + k] += d_pred * activ(ic, kc);
      d_activ(ic, kc) = d_pred * net.out_weight[k];
    }
  }

  for (std::size_t li = n_layers; li-- > 0;) {
    const DenseLayerParams& layer = net.hidden[li];
    const LayerCache& cache = caches[li];
    const std::size_t width = layer.out;

    // Rectifier mask, then the batch-statistics chain rule.
    RowMat d_pre = d_activ;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < width; ++k) {
        const Eigen::Index ic = static_cast<Eigen::Index>(i);
        const Eigen::Index kc = static_cast<Eigen::Index>(k);
        if (!(cache.pre_act(ic, kc) > 0.0)) d_pre(ic, kc) = 0.0;
      }
    }

    const std::size_t weight_off = offsets[li];
    const std::size_t bias_off = weight_off + layer.weight.size();
    const std::size_t gamma_off = bias_off + layer.bias.size();
    const std::size_t beta_off = gamma_off + layer.gamma.size();

    RowMat d_z(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(width));
    for (std::size_t k = 0; k < width; ++k) {
      const Eigen::Index kc = static_cast<Eigen::Index>(k);
      double d_gamma = 0.0;
      double d_beta = 0.0;
      double mean_dxhat = 0.0;
      double mean_dxhat_xhat = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const Eigen::Index ic = static_cast<Eigen::Index>(i);
        const double dy = d_pre(ic, kc);
        const double xh = cache.xhat(ic, kc);
        d_gamma += dy * xh;
        d_beta += dy;
        const double dxhat = dy * layer.gamma[k];
        mean_dxhat += dxhat;
        mean_dxhat_xhat += dxhat * xh;
      }
      (*grad)[gamma_off + k] = d_gamma;
      (*grad)[beta_off + k] = d_beta;
      mean_dxhat /= static_cast<double>(m);
      mean_dxhat_xhat /= static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) {
        const Eigen::Index ic = static_cast<Eigen::Index>(i);
        const double dxhat = d_pre(ic, kc) * layer.gamma[k];
        d_z(ic, kc) = cache.inv_std[k] *
                      (dxhat - mean_dxhat - cache.xhat(ic, kc) * mean_dxhat_xhat);
      }
    }

    RowMat d_weight = cache.input.transpose() * d_z;
    for (std::size_t r = 0; r < layer.in; ++r) {
      for (std::size_t k = 0; k < width; ++k) {
        (*grad)[weight_off + r * width + k] =
            d_weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
      }
    }
    for (std::size_t k = 0; k < width; ++k) {
      double d_bias = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        d_bias += d_z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      }
      (*grad)[bias_off + k] = d_bias;
    }
    if (li > 0) d_activ = d_z * map_weight(layer).transpose();
  }

  return loss;
}

}  // namespace

DenseNet init_dense_net(std::size_t input_dim,
                        const std::vector<std::size_t>& layer_sizes, Rng& rng) {
  if (input_dim == 0) throw ConfigError("dense network input width must be positive");
  if (layer_sizes.empty()) {
    throw ConfigError("dense network needs at least one hidden layer");
  }
  DenseNet net;
  net.input_dim = input_dim;
  std::size_t in = input_dim;
  for (const std::size_t width : layer_sizes) {
    if (width == 0) throw ConfigError("dense layer sizes must be positive");
    DenseLayerParams layer;
    layer.in = in;
    layer.out = width;
    layer.weight.resize(in * width);
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    for (double& w : layer.weight) w = rng.normal() * scale;
    layer.bias.assign(width, 0.0);
    layer.gamma.assign(width, 1.0);
    layer.beta.assign(width, 0.0);
    layer.running_mean.assign(width, 0.0);
    layer.running_var.assign(width, 1.0);
    net.hidden.push_back(std::move(layer));
    in = width;
  }
  net.out_weight.resize(in);
  const double scale = std::sqrt(1.0 / static_cast<double>(in));
  for (double& w : net.out_weight) w = rng.normal() * scale;
  net.out_bias = 0.0;
  return net;
}

std::vector<double> dense_parameters(const DenseNet& net) {
  std::vector<double> params;
  params.reserve(parameter_count(net));
  for (const DenseLayerParams& layer : net.hidden) {
    params.insert(params.end(), layer.weight.begin(), layer.weight.end());
    params.insert(params.end(), layer.bias.begin(), layer.bias.end());
    params.insert(params.end(), layer.gamma.begin(), layer.gamma.end());
    params.insert(params.end(), layer.beta.begin(), layer.beta.end());
  }
  params.insert(params.end(), net.out_weight.begin(), net.out_weight.end());
  params.push_back(net.out_bias);
  return params;
}

void set_dense_parameters(DenseNet& net, std::span<const double> params) {
  if (params.size() != parameter_count(net)) {
    throw ConfigError("parameter vector does not match the network layout");
  }
  std::size_t off = 0;
  const auto take = [&](std::vector<double>& dst) {
    std::copy(params.begin() + static_cast<std::ptrdiff_t>(off),
              params.begin() + static_cast<std::ptrdiff_t>(off + dst.size()),
              dst.begin());
    off += dst.size();
  };
  for (DenseLayerParams& layer : net.hidden) {
    take(layer.weight);
    take(layer.bias);
    take(layer.gamma);
    take(layer.beta);
  }
  take(net.out_weight);
  net.out_bias = params[off];
}

DenseGradient dense_loss_gradient(const DenseNet& net, const Matrix& x,
                                  std::span<const double> y) {
  if (y.size() != x.rows) {
    throw DataError("target length does not match the batch");
  }
  DenseGradient result;
  result.loss = batch_pass(net, x, y, &result.grad, nullptr);
  return result;
}

std::vector<double> dense_predict(const DenseNet& net, const Matrix& x) {
  if (x.cols != net.input_dim) {
    throw DataError("feature count does not match the network input width");
  }
  const std::size_t m = x.rows;
  RowMat activ = map_matrix(x);
  for (const DenseLayerParams& layer : net.hidden) {
    RowMat z = activ * map_weight(layer);
    activ.resize(z.rows(), z.cols());
    for (std::size_t k = 0; k < layer.out; ++k) {
      const double inv_std =
          1.0 / std::sqrt(layer.running_var[k] + kBatchNormEps);
      const Eigen::Index kc = static_cast<Eigen::Index>(k);
      for (std::size_t i = 0; i < m; ++i) {
        const Eigen::Index ic = static_cast<Eigen::Index>(i);
        const double zc = z(ic, kc) + layer.bias[k];
        const double xhat = (zc - layer.running_mean[k]) * inv_std;
        const double pre = layer.gamma[k] * xhat + layer.beta[k];
        activ(ic, kc) = pre > 0.0 ? pre : 0.0;
      }
    }
  }
  std::vector<double> pred(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double value = net.out_bias;
    for (std::size_t k = 0; k < net.out_weight.size(); ++k) {
      value += activ(static_cast<Eigen::Index>(i),
                     static_cast<Eigen::Index>(k)) *
               net.out_weight[k];
    }
    pred[i] = value;
  }
  return pred;
}

void train_dense_net(DenseNet& net, const Matrix& x, std::span<const double> y,
                     const DenseTrainOptions& options) {
  if (!net.initialized()) throw ConfigError("network must be initialized before training");
  if (y.size() != x.rows) {
    throw DataError("target length does not match the training matrix");
  }
  if (options.batch_size < 2) {
    throw ConfigError("batch size must be at least 2 for batch normalization");
  }
  if (options.epochs < 0) throw ConfigError("epoch count must not be negative");

  const std::size_t n = x.rows;
  std::vector<std::size_t> index(n);
  std::iota(index.begin(), index.end(), std::size_t{0});
  Rng shuffle_rng(mix_seed(options.seed, 2));

  std::vector<double> params = dense_parameters(net);
  std::vector<double> moment1(params.size(), 0.0);
  std::vector<double> moment2(params.size(), 0.0);
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;
  std::vector<double> grad;
  Matrix batch;
  std::vector<double> batch_y;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    shuffle_rng.shuffle(index);
    for (std::size_t start = 0; start < n; start += options.batch_size) {
      const std::size_t count = std::min(options.batch_size, n - start);
      if (count < 2) break;  // trailing singleton, batch stats undefined

      batch.rows = count;
      batch.cols = x.cols;
      batch.values.resize(count * x.cols);
      batch_y.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = index[start + i];
        std::copy(x.values.begin() + static_cast<std::ptrdiff_t>(src * x.cols),
                  x.values.begin() +
                      static_cast<std::ptrdiff_t>((src + 1) * x.cols),
                  batch.values.begin() + static_cast<std::ptrdiff_t>(i * x.cols));
        batch_y[i] = y[src];
      }

      const double loss = batch_pass(net, batch, batch_y, &grad, &net);
      if (!std::isfinite(loss)) {
        throw FitError("dense training diverged at epoch " +
                       std::to_string(epoch + 1));
      }

      beta1_pow *= options.beta1;
      beta2_pow *= options.beta2;
      for (std::size_t j = 0; j < params.size(); ++j) {
        moment1[j] = options.beta1 * moment1[j] + (1.0 - options.beta1) * grad[j];
        moment2[j] =
            options.beta2 * moment2[j] + (1.0 - options.beta2) * grad[j] * grad[j];
        const double m_hat = moment1[j] / (1.0 - beta1_pow);
        const double v_hat = moment2[j] / (1.0 - beta2_pow);
        params[j] -= options.step_size * m_hat / (std::sqrt(v_hat) + options.adam_eps);
      }
      set_dense_parameters(net, params);
    }
  }
}

}  // namespace sppb
