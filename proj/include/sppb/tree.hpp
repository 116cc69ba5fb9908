#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sppb/matrix.hpp"
#include "sppb/rng.hpp"

namespace sppb {

/// One node of a binary regression tree. Internal nodes test
/// x[feature] <= threshold (true goes left); leaves have feature == -1.
/// cover is the training weight that reached the node (plain sample count
/// for unweighted fits) and is required by the attribution code.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  double cover = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root; breadth-first order

  double predict_row(std::span<const double> x) const;
  int depth() const;
  std::size_t leaf_count() const;
};

/// Per-feature row orders, each sorted by (value, row index). Computed once
/// per training matrix and shared by every tree grown on it.
struct FeatureOrder {
  explicit FeatureOrder(const Matrix& x);

  std::vector<std::vector<std::uint32_t>> order;
};

struct TreeGrowParams {
  int max_depth = -1;  // -1 grows until no admissible split remains
  double min_samples_leaf = 1.0;
  double l2_leaf_penalty = 0.0;
  std::size_t features_per_split = 0;  // 0 means all features
  // Newton-style fits stop when the best split no longer improves the
  // penalized objective; plain variance fits also accept zero-gain splits
  // of impure nodes.
  bool require_positive_gain = false;
};

/// Grows a tree on per-row gradient/curvature pairs. A leaf over rows S
/// takes the value -sum_S(g) / (sum_S(h) + l2); a split is scored by the
/// decrease in -G^2/(H + l2) summed over the children. Rows with h == 0
/// are ignored, which is how bootstrap resamples are encoded. Thresholds
/// fall halfway between adjacent distinct values; equal-gain candidates
/// resolve to the lowest feature index, then the lowest threshold. rng is
/// consulted only when features_per_split is narrower than the matrix.
RegressionTree grow_tree(const Matrix& x, std::span<const double> g,
                         std::span<const double> h, const FeatureOrder& order,
                         const TreeGrowParams& params, Rng* rng = nullptr);

/// Least-squares regression tree: leaves predict the mean target of their
/// rows and splits greedily minimize the summed squared error. Impure nodes
/// keep splitting even when the best split leaves the error unchanged.
RegressionTree fit_tree(const Matrix& x, std::span<const double> y,
                        int max_depth = -1, double min_samples_leaf = 1.0);

}  // namespace sppb
