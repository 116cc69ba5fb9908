#include "sppb/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "sppb/errors.hpp"

namespace sppb {

double RegressionTree::predict_row(std::span<const double> x) const {
  int id = 0;
  while (!nodes[static_cast<std::size_t>(id)].is_leaf()) {
    const TreeNode& node = nodes[static_cast<std::size_t>(id)];
    id = x[static_cast<std::size_t>(node.feature)] <= node.threshold
             ? node.left
             : node.right;
  }
  return nodes[static_cast<std::size_t>(id)].value;
}

int RegressionTree::depth() const {
  std::vector<int> depth_of(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const TreeNode& node = nodes[id];
    deepest = std::max(deepest, depth_of[id]);
    if (!node.is_leaf()) {
      depth_of[static_cast<std::size_t>(node.left)] = depth_of[id] + 1;
      depth_of[static_cast<std::size_t>(node.right)] = depth_of[id] + 1;
    }
  }
  return deepest;
}

std::size_t RegressionTree::leaf_count() const {
  std::size_t count = 0;
  for (const TreeNode& node : nodes) {
    if (node.is_leaf()) ++count;
  }
  return count;
}

FeatureOrder::FeatureOrder(const Matrix& x) {
  order.resize(x.cols);
  for (std::size_t j = 0; j < x.cols; ++j) {
    std::vector<std::uint32_t>& rows = order[j];
    rows.resize(x.rows);
    std::iota(rows.begin(), rows.end(), 0U);
    std::sort(rows.begin(), rows.end(),
              [&](std::uint32_t a, std::uint32_t b) {
                const double va = x.at(a, j);
                const double vb = x.at(b, j);
                if (va != vb) return va < vb;
                return a < b;
              });
  }
}

namespace {

struct NodeStats {
  double sum_g = 0.0;
  double sum_h = 0.0;
  bool pure = true;
  int depth = 0;
};

struct ScanState {
  std::size_t stamp = static_cast<std::size_t>(-1);
  double left_g = 0.0;
  double left_h = 0.0;
  double prev_value = 0.0;
  bool has_prev = false;
};

struct BestSplit {
  double gain = -std::numeric_limits<double>::infinity();
  int feature = -1;
  double threshold = 0.0;
  double left_g = 0.0;
  double left_h = 0.0;
  bool found = false;
};

double leaf_weight(double sum_g, double sum_h, double l2) {
  return -sum_g / (sum_h + l2);
}

double split_score(double sum_g, double sum_h, double l2) {
  return sum_g * sum_g / (sum_h + l2);
}

}  // namespace

RegressionTree grow_tree(const Matrix& x, std::span<const double> g,
                         std::span<const double> h, const FeatureOrder& order,
                         const TreeGrowParams& params, Rng* rng) {
  const std::size_t n = x.rows;
  const std::size_t p = x.cols;
  if (g.size() != n || h.size() != n) {
    throw DataError("gradient vectors do not match the training matrix");
  }

  std::size_t sample_width = params.features_per_split;
  if (sample_width == 0 || sample_width > p) sample_width = p;
  const bool sampling = sample_width < p;
  if (sampling && rng == nullptr) {
    throw ConfigError("feature subsampling requires a random stream");
  }

  RegressionTree tree;
  std::vector<NodeStats> stats;
  std::vector<int> row_node(n, -1);

  // Root pass: accumulate in ascending row order, track purity. Purity
  // compares the per-row optimum g/h exactly; equal targets with unit
  // curvature therefore count as pure.
  {
    NodeStats root;
    double first_value = 0.0;
    bool seen = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (h[i] == 0.0) continue;
      row_node[i] = 0;
      root.sum_g += g[i];
      root.sum_h += h[i];
      const double v = g[i] / h[i];
      if (!seen) {
        first_value = v;
        seen = true;
      } else if (v != first_value) {
        root.pure = false;
      }
    }
    if (!seen) throw DataError("cannot grow a tree without active rows");
    TreeNode root_node;
    root_node.value = leaf_weight(root.sum_g, root.sum_h, params.l2_leaf_penalty);
    root_node.cover = root.sum_h;
    tree.nodes.push_back(root_node);
    stats.push_back(root);
  }

  std::vector<int> level = {0};
  std::vector<std::uint32_t> feature_pool(p);
  while (!level.empty()) {
    // Pick the nodes worth scanning at this depth.
    std::vector<int> open;
    for (const int id : level) {
      const NodeStats& st = stats[static_cast<std::size_t>(id)];
      if (st.pure) continue;
      if (params.max_depth >= 0 && st.depth >= params.max_depth) continue;
      if (st.sum_h < 2.0 * params.min_samples_leaf) continue;
      open.push_back(id);
    }
    if (open.empty()) break;

    std::vector<int> slot_of(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < open.size(); ++s) {
      slot_of[static_cast<std::size_t>(open[s])] = static_cast<int>(s);
    }

    // Per-node feature subsets, drawn in node order so the stream of rng
    // consumption is reproducible.
    std::vector<std::uint8_t> allowed;
    if (sampling) {
      allowed.assign(open.size() * p, 0);
      for (std::size_t s = 0; s < open.size(); ++s) {
        std::iota(feature_pool.begin(), feature_pool.end(), 0U);
        for (std::size_t i = 0; i < sample_width; ++i) {
          const std::size_t j = i + static_cast<std::size_t>(rng->below(
                                        static_cast<std::uint64_t>(p - i)));
          std::swap(feature_pool[i], feature_pool[j]);
          allowed[s * p + feature_pool[i]] = 1;
        }
      }
    }

    std::vector<ScanState> scan(open.size());
    std::vector<BestSplit> best(open.size());

    for (std::size_t j = 0; j < p; ++j) {
      const std::vector<std::uint32_t>& rows = order.order[j];
      for (const std::uint32_t r : rows) {
        const int id = row_node[r];
        if (id < 0) continue;
        const int slot_index = slot_of[static_cast<std::size_t>(id)];
        if (slot_index < 0) continue;
        const std::size_t s = static_cast<std::size_t>(slot_index);
        if (sampling && allowed[s * p + j] == 0) continue;

        ScanState& st = scan[s];
        if (st.stamp != j) {
          st = ScanState{};
          st.stamp = j;
        }
        const double value = x.at(r, j);
        if (st.has_prev && value > st.prev_value) {
          const NodeStats& ns = stats[static_cast<std::size_t>(id)];
          const double right_h = ns.sum_h - st.left_h;
          if (st.left_h >= params.min_samples_leaf &&
              right_h >= params.min_samples_leaf) {
            const double right_g = ns.sum_g - st.left_g;
            const double gain =
                split_score(st.left_g, st.left_h, params.l2_leaf_penalty) +
                split_score(right_g, right_h, params.l2_leaf_penalty) -
                split_score(ns.sum_g, ns.sum_h, params.l2_leaf_penalty);
            BestSplit& b = best[s];
            if (gain > b.gain || !b.found) {
              b.gain = gain;
              b.feature = static_cast<int>(j);
              b.threshold =
                  st.prev_value + (value - st.prev_value) / 2.0;
              b.left_g = st.left_g;
              b.left_h = st.left_h;
              b.found = true;
            }
          }
        }
        st.left_g += g[r];
        st.left_h += h[r];
        st.prev_value = value;
        st.has_prev = true;
      }
    }

    // Materialize the accepted splits, children appended in node order.
    std::vector<int> next_level;
    bool any = false;
    for (std::size_t s = 0; s < open.size(); ++s) {
      const BestSplit& b = best[s];
      if (!b.found) continue;
      if (params.require_positive_gain && !(b.gain > 0.0)) continue;
      const int id = open[s];
      const NodeStats& ns = stats[static_cast<std::size_t>(id)];

      TreeNode left;
      left.value = leaf_weight(b.left_g, b.left_h, params.l2_leaf_penalty);
      left.cover = b.left_h;
      TreeNode right;
      right.value = leaf_weight(ns.sum_g - b.left_g, ns.sum_h - b.left_h,
                                params.l2_leaf_penalty);
      right.cover = ns.sum_h - b.left_h;

      const int left_id = static_cast<int>(tree.nodes.size());
      const int right_id = left_id + 1;
      tree.nodes.push_back(left);
      tree.nodes.push_back(right);

      NodeStats child;
      child.depth = ns.depth + 1;
      stats.push_back(child);
      stats.push_back(child);

      TreeNode& parent = tree.nodes[static_cast<std::size_t>(id)];
      parent.feature = b.feature;
      parent.threshold = b.threshold;
      parent.left = left_id;
      parent.right = right_id;
      next_level.push_back(left_id);
      next_level.push_back(right_id);
      any = true;
    }
    if (!any) break;

    // Route rows to the new children and rebuild their sums in row order,
    // so node statistics never depend on the feature that split them.
    std::vector<double> first_value(stats.size(), 0.0);
    std::vector<std::uint8_t> seen(stats.size(), 0);
    for (const int id : next_level) {
      NodeStats& st = stats[static_cast<std::size_t>(id)];
      st.sum_g = 0.0;
      st.sum_h = 0.0;
      st.pure = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
      int id = row_node[i];
      if (id < 0) continue;
      const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
      if (node.is_leaf()) continue;
      id = x.at(i, static_cast<std::size_t>(node.feature)) <= node.threshold
               ? node.left
               : node.right;
      row_node[i] = id;
      NodeStats& st = stats[static_cast<std::size_t>(id)];
      st.sum_g += g[i];
      st.sum_h += h[i];
      const double v = g[i] / h[i];
      const std::size_t idx = static_cast<std::size_t>(id);
      if (!seen[idx]) {
        first_value[idx] = v;
        seen[idx] = 1;
      } else if (v != first_value[idx]) {
        st.pure = false;
      }
    }

    level = std::move(next_level);
  }

  return tree;
}

RegressionTree fit_tree(const Matrix& x, std::span<const double> y,
                        int max_depth, double min_samples_leaf) {
  if (x.rows == 0) throw DataError("cannot fit a tree on an empty dataset");
  if (y.size() != x.rows) {
    throw DataError("target length does not match the training matrix");
  }
  std::vector<double> g(x.rows);
  std::vector<double> h(x.rows, 1.0);
  for (std::size_t i = 0; i < x.rows; ++i) g[i] = -y[i];
  const FeatureOrder order(x);
  TreeGrowParams params;
  params.max_depth = max_depth;
  params.min_samples_leaf = min_samples_leaf;
  return grow_tree(x, g, h, order, params);
}

}  // namespace sppb
