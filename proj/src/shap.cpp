#include "sppb/shap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "csv_util.hpp"
#include "sppb/errors.hpp"
#include "sppb/parallel.hpp"

namespace sppb {

namespace {

// One entry of the unique feature path maintained by the exact tree
// attribution recursion. zero_fraction is the share of training cover that
// flows through when the feature is absent from the coalition, one_fraction
// is 1 while the input follows the path and 0 once it leaves it, pweight
// holds the permutation-weight polynomial coefficients.
struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

void extend_path(PathElement* path, int depth, double zero_fraction,
                 double one_fraction, int feature) {
  path[depth].feature = feature;
  path[depth].zero_fraction = zero_fraction;
  path[depth].one_fraction = one_fraction;
  path[depth].pweight = depth == 0 ? 1.0 : 0.0;
  for (int i = depth - 1; i >= 0; --i) {
    path[i + 1].pweight +=
        one_fraction * path[i].pweight * (i + 1.0) / (depth + 1.0);
    path[i].pweight = zero_fraction * path[i].pweight * (depth - i) / (depth + 1.0);
  }
}

void unwind_path(PathElement* path, int depth, int index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next_one_portion = path[depth].pweight;
  for (int i = depth - 1; i >= 0; --i) {
    if (one_fraction != 0.0) {
      const double tmp = path[i].pweight;
      path[i].pweight =
          next_one_portion * (depth + 1.0) / ((i + 1.0) * one_fraction);
      next_one_portion =
          tmp - path[i].pweight * zero_fraction * (depth - i) / (depth + 1.0);
    } else {
      path[i].pweight =
          path[i].pweight * (depth + 1.0) / (zero_fraction * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

// Total weight the path would carry after removing element `index`, without
// mutating the path.
double unwound_path_sum(const PathElement* path, int depth, int index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next_one_portion = path[depth].pweight;
  double total = 0.0;
  if (one_fraction != 0.0) {
    for (int i = depth - 1; i >= 0; --i) {
      const double tmp = next_one_portion / ((i + 1.0) * one_fraction);
      total += tmp;
      next_one_portion = path[i].pweight - tmp * zero_fraction * (depth - i);
    }
  } else {
    for (int i = depth - 1; i >= 0; --i) {
      total += path[i].pweight / (zero_fraction * (depth - i));
    }
  }
  return total * (depth + 1.0);
}

void shap_recurse(const RegressionTree& tree, std::span<const double> x,
                  double scale, double* phi, int node_index, int depth,
                  PathElement* parent_path, double parent_zero_fraction,
                  double parent_one_fraction, int parent_feature) {
  PathElement* path = parent_path + depth + 1;
  std::copy(parent_path, parent_path + depth, path);
  extend_path(path, depth, parent_zero_fraction, parent_one_fraction,
              parent_feature);

  const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  if (node.is_leaf()) {
    for (int i = 1; i <= depth; ++i) {
      const double w = unwound_path_sum(path, depth, i);
      phi[path[i].feature] +=
          scale * w * (path[i].one_fraction - path[i].zero_fraction) * node.value;
    }
    return;
  }

  const bool go_left =
      x[static_cast<std::size_t>(node.feature)] <= node.threshold;
  const int hot = go_left ? node.left : node.right;
  const int cold = go_left ? node.right : node.left;
  const double hot_fraction =
      tree.nodes[static_cast<std::size_t>(hot)].cover / node.cover;
  const double cold_fraction =
      tree.nodes[static_cast<std::size_t>(cold)].cover / node.cover;

  // A feature met twice on one path keeps a single path entry: fold the
  // earlier fractions into this split and drop the old element.
  double incoming_zero = 1.0;
  double incoming_one = 1.0;
  int found = -1;
  for (int i = 0; i <= depth; ++i) {
    if (path[i].feature == node.feature) {
      found = i;
      break;
    }
  }
  if (found >= 0) {
    incoming_zero = path[found].zero_fraction;
    incoming_one = path[found].one_fraction;
    unwind_path(path, depth, found);
    --depth;
  }

  shap_recurse(tree, x, scale, phi, hot, depth + 1, path,
               hot_fraction * incoming_zero, incoming_one, node.feature);
  shap_recurse(tree, x, scale, phi, cold, depth + 1, path,
               cold_fraction * incoming_zero, 0.0, node.feature);
}

// Cover-weighted mean leaf value; the conditional expectation with no
// features known.
double expected_leaf_value(const RegressionTree& tree, int node_index) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  if (node.is_leaf()) return node.value;
  const double left_share =
      tree.nodes[static_cast<std::size_t>(node.left)].cover / node.cover;
  const double right_share =
      tree.nodes[static_cast<std::size_t>(node.right)].cover / node.cover;
  return left_share * expected_leaf_value(tree, node.left) +
         right_share * expected_leaf_value(tree, node.right);
}

double masked_tree_expect(const RegressionTree& tree, int node_index,
                          std::span<const double> x, std::uint32_t mask) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  if (node.is_leaf()) return node.value;
  if ((mask >> node.feature) & 1u) {
    const int next = x[static_cast<std::size_t>(node.feature)] <= node.threshold
                         ? node.left
                         : node.right;
    return masked_tree_expect(tree, next, x, mask);
  }
  const double left_share =
      tree.nodes[static_cast<std::size_t>(node.left)].cover / node.cover;
  const double right_share =
      tree.nodes[static_cast<std::size_t>(node.right)].cover / node.cover;
  return left_share * masked_tree_expect(tree, node.left, x, mask) +
         right_share * masked_tree_expect(tree, node.right, x, mask);
}

double masked_model_value(const TrainedRegressor& model,
                          std::span<const double> x, std::uint32_t mask) {
  double total = model.family == Family::boosted ? model.base_score : 0.0;
  const double scale = model.family == Family::forest
                           ? 1.0 / static_cast<double>(model.trees.size())
                           : 1.0;
  for (const RegressionTree& tree : model.trees) {
    total += scale * masked_tree_expect(tree, 0, x, mask);
  }
  return total;
}

void check_tree_family(const TrainedRegressor& model) {
  if (model.family != Family::forest && model.family != Family::boosted) {
    throw ConfigError("tree attribution supports the forest and boosted families, got " +
                      to_string(model.family));
  }
}

void check_attribution_matrix(const TrainedRegressor& model, const Matrix& x) {
  if (x.cols != model.n_features) {
    throw DataError("attribution input has " + std::to_string(x.cols) +
                    " columns; the model expects " +
                    std::to_string(model.n_features));
  }
  if (x.has_missing()) {
    throw DataError("attribution input contains missing cells");
  }
}

std::vector<std::string> resolve_names(std::vector<std::string> names,
                                       std::size_t p) {
  if (names.empty()) {
    names.reserve(p);
    for (std::size_t j = 0; j < p; ++j) names.push_back("f" + std::to_string(j));
    return names;
  }
  if (names.size() != p) {
    throw ConfigError("got " + std::to_string(names.size()) +
                      " feature names for " + std::to_string(p) + " columns");
  }
  return names;
}

}  // namespace

AttributionMatrix tree_shap(const TrainedRegressor& model, const Matrix& x,
                            std::vector<std::string> feature_names) {
  check_tree_family(model);
  check_attribution_matrix(model, x);

  AttributionMatrix attr;
  attr.feature_names = resolve_names(std::move(feature_names), x.cols);
  attr.values = Matrix(x.rows, x.cols, 0.0);

  const double scale = model.family == Family::forest
                           ? 1.0 / static_cast<double>(model.trees.size())
                           : 1.0;
  double base = model.family == Family::boosted ? model.base_score : 0.0;
  int max_depth = 0;
  for (const RegressionTree& tree : model.trees) {
    base += scale * expected_leaf_value(tree, 0);
    max_depth = std::max(max_depth, tree.depth());
  }
  attr.base_value = base;

  const std::size_t path_len =
      static_cast<std::size_t>((max_depth + 2) * (max_depth + 3) / 2);
  parallel_for(x.rows, [&](std::size_t r) {
    std::vector<PathElement> path(path_len);
    const std::span<const double> row = x.row(r);
    double* phi = attr.values.row(r).data();
    for (const RegressionTree& tree : model.trees) {
      shap_recurse(tree, row, scale, phi, 0, 0, path.data(), 1.0, 1.0, -1);
    }
  });
  return attr;
}

std::vector<double> brute_force_shap(const TrainedRegressor& model,
                                     std::span<const double> x) {
  check_tree_family(model);
  const std::size_t p = model.n_features;
  if (p > 20) {
    throw ConfigError("exhaustive attribution handles at most 20 features, got " +
                      std::to_string(p));
  }
  if (x.size() != p) {
    throw DataError("attribution input has " + std::to_string(x.size()) +
                    " values; the model expects " + std::to_string(p));
  }
  for (double v : x) {
    if (is_missing(v)) throw DataError("attribution input contains missing cells");
  }

  const std::uint32_t subsets = std::uint32_t{1} << p;
  std::vector<double> value(subsets);
  for (std::uint32_t mask = 0; mask < subsets; ++mask) {
    value[mask] = masked_model_value(model, x, mask);
  }

  // weight for a coalition of size s: s! (p-s-1)! / p! = 1 / (p * C(p-1, s))
  std::vector<double> weight(p);
  for (std::size_t s = 0; s < p; ++s) {
    double binom = 1.0;
    for (std::size_t i = 1; i <= s; ++i) {
      binom *= static_cast<double>(p - 1 - s + i) / static_cast<double>(i);
    }
    weight[s] = 1.0 / (static_cast<double>(p) * binom);
  }

  std::vector<double> phi(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    const std::uint32_t bit = std::uint32_t{1} << j;
    for (std::uint32_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      phi[j] += weight[static_cast<std::size_t>(std::popcount(mask))] *
                (value[mask | bit] - value[mask]);
    }
  }
  return phi;
}

AttributionMatrix linear_attributions(const TrainedRegressor& model,
                                      const Matrix& x,
                                      std::vector<std::string> feature_names) {
  if (model.family != Family::linear) {
    throw ConfigError("closed-form attribution requires the linear family, got " +
                      to_string(model.family));
  }
  check_attribution_matrix(model, x);
  if (x.rows == 0) {
    throw DataError("attribution requires at least one sample");
  }

  std::vector<double> mean(x.cols, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t j = 0; j < x.cols; ++j) mean[j] += x.at(r, j);
  }
  for (double& m : mean) m /= static_cast<double>(x.rows);

  AttributionMatrix attr;
  attr.feature_names = resolve_names(std::move(feature_names), x.cols);
  attr.values = Matrix(x.rows, x.cols, 0.0);
  attr.base_value = model.intercept;
  for (std::size_t j = 0; j < x.cols; ++j) {
    attr.base_value += model.coefficients[j] * mean[j];
  }
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t j = 0; j < x.cols; ++j) {
      attr.values.at(r, j) = model.coefficients[j] * (x.at(r, j) - mean[j]);
    }
  }
  return attr;
}

FeatureRanking rank_features(const AttributionMatrix& attr) {
  if (attr.values.rows == 0) {
    throw DataError("feature ranking requires at least one attributed sample");
  }
  if (attr.feature_names.size() != attr.values.cols) {
    throw ConfigError("attribution carries " +
                      std::to_string(attr.feature_names.size()) +
                      " names for " + std::to_string(attr.values.cols) +
                      " columns");
  }
  FeatureRanking ranking;
  ranking.entries.resize(attr.values.cols);
  for (std::size_t j = 0; j < attr.values.cols; ++j) {
    double total = 0.0;
    for (std::size_t r = 0; r < attr.values.rows; ++r) {
      total += std::abs(attr.values.at(r, j));
    }
    ranking.entries[j].name = attr.feature_names[j];
    ranking.entries[j].importance = total / static_cast<double>(attr.values.rows);
  }
  std::sort(ranking.entries.begin(), ranking.entries.end(),
            [](const RankedFeature& a, const RankedFeature& b) {
              if (a.importance != b.importance) return a.importance > b.importance;
              return a.name < b.name;
            });
  return ranking;
}

std::vector<std::string> default_shap_exclusions() {
  return {"balance_score",
          "gait_score",
          "chair_score",
          "balance_sbs_time",
          "balance_semi_tandem_time",
          "balance_full_tandem_time",
          "gait_time",
          "chair_stand_time"};
}

std::vector<std::string> select_top_k(const FeatureRanking& ranking,
                                      std::size_t k,
                                      const std::vector<std::string>& exclusions) {
  const std::unordered_set<std::string> drop(exclusions.begin(),
                                             exclusions.end());
  std::vector<std::string> kept;
  kept.reserve(ranking.entries.size());
  for (const RankedFeature& entry : ranking.entries) {
    if (!drop.contains(entry.name)) kept.push_back(entry.name);
  }
  if (k > kept.size()) {
    throw ConfigError("top-k selection of " + std::to_string(k) +
                      " exceeds the " + std::to_string(kept.size()) +
                      " features left after exclusion");
  }
  kept.resize(k);
  return kept;
}

CvReport simplify_and_retrain(const SupervisedDataset& dataset,
                              const FeatureRanking& ranking, std::size_t k,
                              const std::vector<std::string>& exclusions,
                              const FoldPlan& folds, const CvOptions& options,
                              std::uint64_t model_seed) {
  const std::vector<std::string> selected = select_top_k(ranking, k, exclusions);
  const std::unordered_set<std::string> keep(selected.begin(), selected.end());

  // Columns stay in dataset order so a full selection reproduces the
  // original matrix bit for bit.
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < dataset.feature_names.size(); ++j) {
    if (keep.contains(dataset.feature_names[j])) cols.push_back(j);
  }
  if (cols.size() != selected.size()) {
    throw DataError("ranking selected " + std::to_string(selected.size()) +
                    " features but only " + std::to_string(cols.size()) +
                    " exist in the dataset");
  }

  SupervisedDataset reduced;
  reduced.schema = dataset.schema;
  reduced.X = dataset.X.select_cols(cols);
  reduced.y = dataset.y;
  reduced.provenance = dataset.provenance;
  reduced.feature_names.reserve(cols.size());
  for (std::size_t j : cols) reduced.feature_names.push_back(dataset.feature_names[j]);

  RegressorSpec spec;
  spec.family = Family::boosted;
  spec.trees = 100;
  spec.max_depth = 2;
  spec.seed = model_seed;
  return cross_validate(reduced, spec, folds, options);
}

namespace {

// Fixed beeswarm rendering constants; the delimited data file is the
// contract and the image derives from it deterministically.
constexpr double kStripHeight = 40.0;
constexpr double kJitterSpan = 26.0;
constexpr double kGoldenFraction = 0.61803398874989485;
constexpr double kPointRadius = 2.4;
constexpr double kLeftMargin = 210.0;
constexpr double kPlotWidth = 620.0;
constexpr double kRightMargin = 40.0;
constexpr double kTopMargin = 34.0;
constexpr double kBottomMargin = 46.0;
constexpr int kLowColor[3] = {31, 119, 255};
constexpr int kHighColor[3] = {255, 13, 87};

double jitter_offset(std::size_t sample) {
  const double frac =
      std::fmod(static_cast<double>(sample + 1) * kGoldenFraction, 1.0);
  return (frac - 0.5) * kJitterSpan;
}

std::string color_for(double t) {
  t = std::clamp(t, 0.0, 1.0);
  char buf[24];
  std::snprintf(buf, sizeof buf, "rgb(%d,%d,%d)",
                static_cast<int>(std::lround(kLowColor[0] + t * (kHighColor[0] - kLowColor[0]))),
                static_cast<int>(std::lround(kLowColor[1] + t * (kHighColor[1] - kLowColor[1]))),
                static_cast<int>(std::lround(kLowColor[2] + t * (kHighColor[2] - kLowColor[2]))));
  return buf;
}

std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void write_beeswarm_svg(const AttributionMatrix& attr, const Matrix& x_scaled,
                        const FeatureRanking& ranking, std::size_t top_m,
                        const std::unordered_map<std::string, std::size_t>& column_of,
                        const std::string& svg_path) {
  const std::size_t n = attr.values.rows;

  double lo = 0.0;
  double hi = 0.0;
  for (std::size_t r = 0; r < top_m; ++r) {
    const std::size_t j = column_of.at(ranking.entries[r].name);
    for (std::size_t s = 0; s < n; ++s) {
      lo = std::min(lo, attr.values.at(s, j));
      hi = std::max(hi, attr.values.at(s, j));
    }
  }
  double pad = (hi - lo) * 0.05;
  if (pad == 0.0) pad = 1.0;
  lo -= pad;
  hi += pad;

  const double width = kLeftMargin + kPlotWidth + kRightMargin;
  const double height =
      kTopMargin + kStripHeight * static_cast<double>(top_m) + kBottomMargin;
  const auto x_of = [&](double v) {
    return kLeftMargin + (v - lo) / (hi - lo) * kPlotWidth;
  };

  std::ofstream out(svg_path);
  if (!out) throw DataError("cannot write file: " + svg_path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_num(width)
      << "\" height=\"" << svg_num(height) << "\" viewBox=\"0 0 "
      << svg_num(width) << " " << svg_num(height) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << svg_num(kLeftMargin + kPlotWidth / 2.0) << "\" y=\""
      << svg_num(height - 12.0)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\""
      << " fill=\"#333\">attribution to the prediction</text>\n";

  const double plot_bottom = kTopMargin + kStripHeight * static_cast<double>(top_m);
  out << "<line x1=\"" << svg_num(x_of(0.0)) << "\" y1=\"" << svg_num(kTopMargin)
      << "\" x2=\"" << svg_num(x_of(0.0)) << "\" y2=\"" << svg_num(plot_bottom)
      << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  out << "<text x=\"" << svg_num(x_of(0.0)) << "\" y=\""
      << svg_num(plot_bottom + 18.0)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\""
      << " fill=\"#666\">0</text>\n";

  for (std::size_t r = 0; r < top_m; ++r) {
    const std::string& name = ranking.entries[r].name;
    const std::size_t j = column_of.at(name);
    const double strip_top = kTopMargin + kStripHeight * static_cast<double>(r);
    const double mid = strip_top + kStripHeight / 2.0;
    out << "<line x1=\"" << svg_num(kLeftMargin) << "\" y1=\"" << svg_num(mid)
        << "\" x2=\"" << svg_num(kLeftMargin + kPlotWidth) << "\" y2=\""
        << svg_num(mid) << "\" stroke=\"#eee\"/>\n";
    out << "<text x=\"" << svg_num(kLeftMargin - 10.0) << "\" y=\""
        << svg_num(mid + 4.0)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\""
        << " fill=\"#222\">" << name << "</text>\n";
    for (std::size_t s = 0; s < n; ++s) {
      out << "<circle cx=\"" << svg_num(x_of(attr.values.at(s, j))) << "\" cy=\""
          << svg_num(mid + jitter_offset(s)) << "\" r=\"" << svg_num(kPointRadius)
          << "\" fill=\"" << color_for(x_scaled.at(s, j))
          << "\" fill-opacity=\"0.8\"/>\n";
    }
  }
  out << "</svg>\n";
  out.close();
  if (!out) throw DataError("write failed: " + svg_path);
}

}  // namespace

void export_beeswarm(const AttributionMatrix& attr, const Matrix& x_scaled,
                     const std::string& csv_path, const std::string& svg_path,
                     std::size_t top_m) {
  if (x_scaled.rows != attr.values.rows || x_scaled.cols != attr.values.cols) {
    throw DataError("scaled matrix is " + std::to_string(x_scaled.rows) + "x" +
                    std::to_string(x_scaled.cols) + "; attribution is " +
                    std::to_string(attr.values.rows) + "x" +
                    std::to_string(attr.values.cols));
  }
  if (top_m > attr.values.cols) {
    throw ConfigError("beeswarm requested the top " + std::to_string(top_m) +
                      " of " + std::to_string(attr.values.cols) + " features");
  }
  const FeatureRanking ranking = rank_features(attr);

  std::unordered_map<std::string, std::size_t> column_of;
  for (std::size_t j = 0; j < attr.feature_names.size(); ++j) {
    column_of[attr.feature_names[j]] = j;
  }

  csv::Writer writer(csv_path);
  writer.row({"feature", "rank", "scaled_value", "shap_value", "sample_id"}, ',');
  for (std::size_t r = 0; r < top_m; ++r) {
    const std::string& name = ranking.entries[r].name;
    const std::size_t j = column_of.at(name);
    for (std::size_t s = 0; s < attr.values.rows; ++s) {
      writer.row({name, std::to_string(r + 1),
                  csv::format_double(x_scaled.at(s, j)),
                  csv::format_double(attr.values.at(s, j)), std::to_string(s)},
                 ',');
    }
  }
  writer.close();

  if (!svg_path.empty()) {
    write_beeswarm_svg(attr, x_scaled, ranking, top_m, column_of, svg_path);
  }
}

}  // namespace sppb
