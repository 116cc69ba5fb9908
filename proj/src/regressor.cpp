#include "sppb/regressor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "spec_json.hpp"
#include "sppb/errors.hpp"
#include "sppb/parallel.hpp"
#include "sppb/version.hpp"

namespace sppb {

namespace {

using json = nlohmann::ordered_json;

void check_training_input(const Matrix& x, std::span<const double> y) {
  if (x.rows == 0) throw DataError("cannot fit a model on zero rows");
  if (y.size() != x.rows) {
    throw DataError("target length does not match the training matrix");
  }
  if (x.has_missing()) {
    throw DataError("training matrix contains missing values; impute first");
  }
  for (const double value : y) {
    if (!std::isfinite(value)) throw DataError("target contains non-finite values");
  }
}

void check_family(const RegressorSpec& spec, Family expected) {
  if (spec.family != expected) {
    throw ConfigError("spec family does not match the requested fit");
  }
  spec.validate();
}

double training_mse(std::span<const double> pred, std::span<const double> y) {
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = pred[i] - y[i];
    total += diff * diff;
  }
  return total / static_cast<double>(pred.size());
}

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::linear: return "linear";
    case Family::forest: return "forest";
    case Family::boosted: return "boosted";
    case Family::dense: return "dense";
  }
  throw ConfigError("unknown regressor family");
}

Family family_from_string(const std::string& name) {
  if (name == "linear") return Family::linear;
  if (name == "forest") return Family::forest;
  if (name == "boosted") return Family::boosted;
  if (name == "dense") return Family::dense;
  throw ConfigError("unknown regressor family '" + name + "'");
}

void RegressorSpec::validate() const {
  if (trees < 0) throw ConfigError("tree count must not be negative");
  if (family == Family::forest && trees < 1) {
    throw ConfigError("a forest needs at least one tree");
  }
  if (max_depth != kUnlimitedDepth && max_depth < 1) {
    throw ConfigError("max depth must be positive or unlimited");
  }
  if (min_samples_leaf < 1.0) {
    throw ConfigError("min samples per leaf must be at least 1");
  }
  if (!(learning_rate > 0.0) || learning_rate > 1.0) {
    throw ConfigError("learning rate must lie in (0, 1]");
  }
  if (l2_leaf_penalty < 0.0) {
    throw ConfigError("leaf penalty must not be negative");
  }
  if (family == Family::dense) {
    if (layer_sizes.empty()) {
      throw ConfigError("dense family needs a non-empty layer list");
    }
    for (const std::size_t width : layer_sizes) {
      if (width == 0) throw ConfigError("dense layer sizes must be positive");
    }
    if (epochs < 0) throw ConfigError("epoch count must not be negative");
    if (batch_size < 2) {
      throw ConfigError("batch size must be at least 2 for batch normalization");
    }
  }
}

std::string RegressorSpec::parameter_summary() const {
  std::ostringstream out;
  switch (family) {
    case Family::linear:
      out << "-";
      break;
    case Family::forest:
    case Family::boosted:
      out << "trees=" << trees << ", depth=";
      if (max_depth == kUnlimitedDepth) {
        out << "none";
      } else {
        out << max_depth;
      }
      break;
    case Family::dense:
      out << "layers=";
      for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
        if (i > 0) out << " ";
        out << layer_sizes[i];
      }
      break;
  }
  return out.str();
}

TrainedRegressor fit_linear(const Matrix& x, std::span<const double> y) {
  check_training_input(x, y);
  const std::size_t n = x.rows;
  const std::size_t p = x.cols;

  Eigen::MatrixXd design(n, p + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          x.at(i, j);
    }
    design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = 1.0;
  }
  Eigen::VectorXd target(n);
  for (std::size_t i = 0; i < n; ++i) {
    target(static_cast<Eigen::Index>(i)) = y[i];
  }

  // Tiny ridge keeps rank-deficient systems (duplicated columns) solvable.
  Eigen::MatrixXd normal = design.transpose() * design;
  normal.diagonal().array() += 1e-10;
  const Eigen::VectorXd rhs = design.transpose() * target;
  const Eigen::VectorXd beta = normal.ldlt().solve(rhs);

  TrainedRegressor model;
  model.family = Family::linear;
  model.spec.family = Family::linear;
  model.n_features = p;
  model.coefficients.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    model.coefficients[j] = beta(static_cast<Eigen::Index>(j));
  }
  model.intercept = beta(static_cast<Eigen::Index>(p));
  return model;
}

TrainedRegressor fit_forest(const Matrix& x, std::span<const double> y,
                            const RegressorSpec& spec) {
  check_family(spec, Family::forest);
  check_training_input(x, y);
  const std::size_t n = x.rows;
  const std::size_t p = x.cols;

  TreeGrowParams params;
  params.max_depth = spec.max_depth;
  params.min_samples_leaf = spec.min_samples_leaf;
  params.l2_leaf_penalty = 0.0;
  params.features_per_split =
      spec.features_per_split > 0 ? spec.features_per_split
                                  : std::max<std::size_t>(1, p / 3);

  const FeatureOrder order(x);
  TrainedRegressor model;
  model.family = Family::forest;
  model.spec = spec;
  model.n_features = p;
  model.trees.resize(static_cast<std::size_t>(spec.trees));
  model.target_lo = *std::min_element(y.begin(), y.end());
  model.target_hi = *std::max_element(y.begin(), y.end());

  parallel_for(model.trees.size(), [&](std::size_t t) {
    Rng rng(mix_seed(spec.seed, t));
    std::vector<double> weight(n, 1.0);
    if (spec.bootstrap) {
      std::fill(weight.begin(), weight.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        weight[rng.below(n)] += 1.0;
      }
    }
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = -weight[i] * y[i];
    model.trees[t] = grow_tree(x, g, weight, order, params, &rng);
  });
  return model;
}

TrainedRegressor fit_boosted(const Matrix& x, std::span<const double> y,
                             const RegressorSpec& spec) {
  check_family(spec, Family::boosted);
  check_training_input(x, y);
  const std::size_t n = x.rows;

  double base = 0.0;
  for (const double value : y) base += value;
  base /= static_cast<double>(n);

  TrainedRegressor model;
  model.family = Family::boosted;
  model.spec = spec;
  model.n_features = x.cols;
  model.base_score = base;
  model.trees.reserve(static_cast<std::size_t>(spec.trees));
  model.train_loss.reserve(static_cast<std::size_t>(spec.trees));

  if (spec.trees == 0) return model;

  TreeGrowParams params;
  params.max_depth = spec.max_depth;
  params.min_samples_leaf = spec.min_samples_leaf;
  params.l2_leaf_penalty = spec.l2_leaf_penalty;
  params.require_positive_gain = true;

  const FeatureOrder order(x);
  std::vector<double> pred(n, base);
  std::vector<double> g(n);
  std::vector<double> h(n, 1.0);
  for (int round = 0; round < spec.trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) g[i] = pred[i] - y[i];
    RegressionTree tree = grow_tree(x, g, h, order, params);
    for (TreeNode& node : tree.nodes) node.value *= spec.learning_rate;
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] += tree.predict_row(x.row(i));
    }
    model.trees.push_back(std::move(tree));
    model.train_loss.push_back(training_mse(pred, y));
  }
  return model;
}

TrainedRegressor fit_dense(const Matrix& x, std::span<const double> y,
                           const RegressorSpec& spec) {
  check_family(spec, Family::dense);
  check_training_input(x, y);

  Rng init_rng(mix_seed(spec.seed, 1));
  TrainedRegressor model;
  model.family = Family::dense;
  model.spec = spec;
  model.n_features = x.cols;
  model.net = init_dense_net(x.cols, spec.layer_sizes, init_rng);

  DenseTrainOptions options;
  options.epochs = spec.epochs;
  options.batch_size = spec.batch_size;
  options.seed = spec.seed;
  train_dense_net(model.net, x, y, options);
  return model;
}

TrainedRegressor fit_regressor(const Matrix& x, std::span<const double> y,
                               const RegressorSpec& spec) {
  switch (spec.family) {
    case Family::linear: {
      spec.validate();
      TrainedRegressor model = fit_linear(x, y);
      model.spec = spec;
      return model;
    }
    case Family::forest: return fit_forest(x, y, spec);
    case Family::boosted: return fit_boosted(x, y, spec);
    case Family::dense: return fit_dense(x, y, spec);
  }
  throw ConfigError("unknown regressor family");
}

std::vector<double> predict(const TrainedRegressor& model, const Matrix& x) {
  if (x.cols != model.n_features) {
    throw DataError("feature count does not match the trained model");
  }
  std::vector<double> out(x.rows, 0.0);
  switch (model.family) {
    case Family::linear: {
      for (std::size_t i = 0; i < x.rows; ++i) {
        double value = model.intercept;
        const std::span<const double> row = x.row(i);
        for (std::size_t j = 0; j < x.cols; ++j) {
          value += model.coefficients[j] * row[j];
        }
        out[i] = value;
      }
      break;
    }
    case Family::forest: {
      const double divisor = static_cast<double>(model.trees.size());
      for (std::size_t i = 0; i < x.rows; ++i) {
        const std::span<const double> row = x.row(i);
        double total = 0.0;
        for (const RegressionTree& tree : model.trees) {
          total += tree.predict_row(row);
        }
        double mean = total / divisor;
        // Rounding can push a mean of means an ulp past the hull; the exact
        // result always lies inside it.
        mean = std::min(std::max(mean, model.target_lo), model.target_hi);
        out[i] = mean;
      }
      break;
    }
    case Family::boosted: {
      for (std::size_t i = 0; i < x.rows; ++i) {
        const std::span<const double> row = x.row(i);
        double value = model.base_score;
        for (const RegressionTree& tree : model.trees) {
          value += tree.predict_row(row);
        }
        out[i] = value;
      }
      break;
    }
    case Family::dense: {
      out = dense_predict(model.net, x);
      break;
    }
  }
  return out;
}

namespace detail {

json spec_to_json(const RegressorSpec& spec) {
  json j;
  j["family"] = to_string(spec.family);
  j["trees"] = spec.trees;
  if (spec.max_depth == kUnlimitedDepth) {
    j["max_depth"] = nullptr;
  } else {
    j["max_depth"] = spec.max_depth;
  }
  j["min_samples_leaf"] = spec.min_samples_leaf;
  j["learning_rate"] = spec.learning_rate;
  j["l2_leaf_penalty"] = spec.l2_leaf_penalty;
  j["features_per_split"] = spec.features_per_split;
  j["bootstrap"] = spec.bootstrap;
  j["layer_sizes"] = spec.layer_sizes;
  j["epochs"] = spec.epochs;
  j["batch_size"] = spec.batch_size;
  j["seed"] = spec.seed;
  return j;
}

RegressorSpec spec_from_json(const json& j) {
  RegressorSpec spec;
  spec.family = family_from_string(j.at("family").get<std::string>());
  spec.trees = j.at("trees").get<int>();
  spec.max_depth = j.at("max_depth").is_null() ? kUnlimitedDepth
                                               : j.at("max_depth").get<int>();
  spec.min_samples_leaf = j.at("min_samples_leaf").get<double>();
  spec.learning_rate = j.at("learning_rate").get<double>();
  spec.l2_leaf_penalty = j.at("l2_leaf_penalty").get<double>();
  spec.features_per_split = j.at("features_per_split").get<std::size_t>();
  spec.bootstrap = j.at("bootstrap").get<bool>();
  spec.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
  spec.epochs = j.at("epochs").get<int>();
  spec.batch_size = j.at("batch_size").get<std::size_t>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

}  // namespace detail

namespace {

using detail::spec_from_json;
using detail::spec_to_json;

json tree_node_to_json(const RegressionTree& tree, int id) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
  json j;
  if (!node.is_leaf()) {
    j["feature"] = node.feature;
    j["threshold"] = node.threshold;
  }
  j["value"] = node.value;
  j["cover"] = node.cover;
  if (!node.is_leaf()) {
    j["left"] = tree_node_to_json(tree, node.left);
    j["right"] = tree_node_to_json(tree, node.right);
  }
  return j;
}

int tree_node_from_json(const json& j, RegressionTree& tree) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  TreeNode node;
  node.value = j.at("value").get<double>();
  node.cover = j.at("cover").get<double>();
  if (j.contains("feature")) {
    node.feature = j.at("feature").get<int>();
    node.threshold = j.at("threshold").get<double>();
    node.left = tree_node_from_json(j.at("left"), tree);
    node.right = tree_node_from_json(j.at("right"), tree);
  }
  tree.nodes[static_cast<std::size_t>(id)] = node;
  return id;
}

}  // namespace

std::string regressor_to_json(const TrainedRegressor& model) {
  json j;
  j["format_version"] = 1;
  j["tool_version"] = kToolVersion;
  j["family"] = to_string(model.family);
  j["n_features"] = model.n_features;
  j["spec"] = spec_to_json(model.spec);
  switch (model.family) {
    case Family::linear: {
      j["linear"] = {{"coefficients", model.coefficients},
                     {"intercept", model.intercept}};
      break;
    }
    case Family::forest: {
      j["target_lo"] = model.target_lo;
      j["target_hi"] = model.target_hi;
      json trees = json::array();
      for (const RegressionTree& tree : model.trees) {
        trees.push_back(tree_node_to_json(tree, 0));
      }
      j["trees"] = std::move(trees);
      break;
    }
    case Family::boosted: {
      j["base_score"] = model.base_score;
      j["train_loss"] = model.train_loss;
      json trees = json::array();
      for (const RegressionTree& tree : model.trees) {
        trees.push_back(tree_node_to_json(tree, 0));
      }
      j["trees"] = std::move(trees);
      break;
    }
    case Family::dense: {
      json hidden = json::array();
      for (const DenseLayerParams& layer : model.net.hidden) {
        hidden.push_back({{"in", layer.in},
                          {"out", layer.out},
                          {"weight", layer.weight},
                          {"bias", layer.bias},
                          {"gamma", layer.gamma},
                          {"beta", layer.beta},
                          {"running_mean", layer.running_mean},
                          {"running_var", layer.running_var}});
      }
      j["dense"] = {{"input_dim", model.net.input_dim},
                    {"hidden", std::move(hidden)},
                    {"out_weight", model.net.out_weight},
                    {"out_bias", model.net.out_bias}};
      break;
    }
  }
  return j.dump(2);
}

TrainedRegressor regressor_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("cannot parse model file: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw DataError("unsupported model format version");
    }
    TrainedRegressor model;
    model.family = family_from_string(j.at("family").get<std::string>());
    model.n_features = j.at("n_features").get<std::size_t>();
    model.spec = spec_from_json(j.at("spec"));
    switch (model.family) {
      case Family::linear: {
        const json& lin = j.at("linear");
        model.coefficients = lin.at("coefficients").get<std::vector<double>>();
        model.intercept = lin.at("intercept").get<double>();
        break;
      }
      case Family::forest: {
        model.target_lo = j.at("target_lo").get<double>();
        model.target_hi = j.at("target_hi").get<double>();
        for (const json& entry : j.at("trees")) {
          RegressionTree tree;
          tree_node_from_json(entry, tree);
          model.trees.push_back(std::move(tree));
        }
        break;
      }
      case Family::boosted: {
        model.base_score = j.at("base_score").get<double>();
        model.train_loss = j.at("train_loss").get<std::vector<double>>();
        for (const json& entry : j.at("trees")) {
          RegressionTree tree;
          tree_node_from_json(entry, tree);
          model.trees.push_back(std::move(tree));
        }
        break;
      }
      case Family::dense: {
        const json& dense = j.at("dense");
        model.net.input_dim = dense.at("input_dim").get<std::size_t>();
        for (const json& entry : dense.at("hidden")) {
          DenseLayerParams layer;
          layer.in = entry.at("in").get<std::size_t>();
          layer.out = entry.at("out").get<std::size_t>();
          layer.weight = entry.at("weight").get<std::vector<double>>();
          layer.bias = entry.at("bias").get<std::vector<double>>();
          layer.gamma = entry.at("gamma").get<std::vector<double>>();
          layer.beta = entry.at("beta").get<std::vector<double>>();
          layer.running_mean =
              entry.at("running_mean").get<std::vector<double>>();
          layer.running_var = entry.at("running_var").get<std::vector<double>>();
          model.net.hidden.push_back(std::move(layer));
        }
        model.net.out_weight = dense.at("out_weight").get<std::vector<double>>();
        model.net.out_bias = dense.at("out_bias").get<double>();
        break;
      }
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_regressor(const TrainedRegressor& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open model file for writing: " + path);
  out << regressor_to_json(model) << "\n";
  if (!out) throw DataError("failed writing model file: " + path);
}

TrainedRegressor load_regressor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return regressor_from_json(buffer.str());
}

}  // namespace sppb
