#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "freqscope/error.hpp"
#include "freqscope/knn.hpp"
#include "freqscope/random.hpp"

namespace freqscope {

struct ForestParams {
  int n_trees = 100;
  int max_depth = 20;
  int min_leaf = 1;
  double feature_subsample = 0.0;  // fraction of features per split; 0 means sqrt(d)
  std::uint64_t seed = 0;

  void validate() const {
    if (n_trees < 1) throw InvalidArgument("n_trees must be >= 1");
    if (max_depth < 1) throw InvalidArgument("max_depth must be >= 1");
    if (min_leaf < 1) throw InvalidArgument("min_leaf must be >= 1");
    if (feature_subsample < 0.0 || feature_subsample > 1.0) {
      throw InvalidArgument("feature_subsample must be in [0, 1]");
    }
  }

  std::size_t features_per_split(std::size_t dim) const {
    const double f = feature_subsample > 0.0
                         ? feature_subsample * static_cast<double>(dim)
                         : std::sqrt(static_cast<double>(dim));
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(f)), 1, dim);
  }
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 0;  // leaf class index

  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  int predict(std::span<const double> x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].label;
  }

  bool operator==(const DecisionTree&) const = default;
};

struct ForestModel {
  ForestParams params;
  std::vector<std::string> classes;  // sorted; class index order = label order
  std::size_t dim = 0;
  std::vector<DecisionTree> trees;
};

namespace detail {

// CART with Gini impurity on one bootstrap sample.
class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
              std::size_t n_classes, const ForestParams& params, std::uint64_t seed)
      : x_(x), y_(y), n_classes_(n_classes), params_(params), rng_(seed) {}

  DecisionTree build() {
    const std::size_t n = x_.size();
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(n) - 1));
    features_.resize(x_.front().size());
    std::iota(features_.begin(), features_.end(), 0);
    tree_.nodes.clear();
    grow(sample, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = -1.0;
  };

  int majority(const std::vector<std::size_t>& idx) const {
    std::vector<std::size_t> counts(n_classes_, 0);
    for (auto i : idx) counts[static_cast<std::size_t>(y_[i])]++;
    // max_element keeps the first maximum: smallest label wins ties
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }

  int grow(std::vector<std::size_t>& idx, int depth) {
    const int node = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{});
    tree_.nodes.back().label = majority(idx);

    const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);
    if (depth >= params_.max_depth || idx.size() < 2 * min_leaf || pure(idx)) return node;

    const Split best = find_split(idx);
    if (best.feature < 0) return node;

    std::vector<std::size_t> left, right;
    for (auto i : idx) {
      (x_[i][static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(i);
    }
    std::vector<std::size_t>().swap(idx);
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    auto& n = tree_.nodes[static_cast<std::size_t>(node)];
    n.feature = best.feature;
    n.threshold = best.threshold;
    n.left = l;
    n.right = r;
    return node;
  }

  bool pure(const std::vector<std::size_t>& idx) const {
    for (auto i : idx) {
      if (y_[i] != y_[idx.front()]) return false;
    }
    return true;
  }

  // Examines features in random order until `m` non-constant ones were scored.
  Split find_split(const std::vector<std::size_t>& idx) {
    const std::size_t m = params_.features_per_split(features_.size());
    const std::size_t n = idx.size();
    const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);

    std::vector<std::size_t> total(n_classes_, 0);
    for (auto i : idx) total[static_cast<std::size_t>(y_[i])]++;
    double parent_sq = 0.0;
    for (auto c : total) parent_sq += static_cast<double>(c) * static_cast<double>(c);
    const double parent_score = parent_sq / static_cast<double>(n);

    Split best;
    std::size_t scored = 0;
    std::vector<std::pair<double, int>> column(n);
    std::vector<std::size_t> left_counts(n_classes_);
    for (std::size_t j = 0; j < features_.size() && scored < m; ++j) {
      const auto pick = j + static_cast<std::size_t>(
                                rng_.uniform_int(0, static_cast<std::int64_t>(features_.size() - j) - 1));
      std::swap(features_[j], features_[pick]);
      const std::size_t f = features_[j];

      for (std::size_t r = 0; r < n; ++r) column[r] = {x_[idx[r]][f], y_[idx[r]]};
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;
      ++scored;

      std::fill(left_counts.begin(), left_counts.end(), 0);
      double left_sq = 0.0;
      double right_sq = parent_sq;
      for (std::size_t r = 0; r + 1 < n; ++r) {
        const auto c = static_cast<std::size_t>(column[r].second);
        const double lc = static_cast<double>(left_counts[c]);
        const double rc = static_cast<double>(total[c] - left_counts[c]);
        left_sq += 2.0 * lc + 1.0;
        right_sq -= 2.0 * rc - 1.0;
        left_counts[c]++;
        const std::size_t nl = r + 1;
        if (column[r].first == column[r + 1].first) continue;
        if (nl < min_leaf || n - nl < min_leaf) continue;
        const double score = left_sq / static_cast<double>(nl) +
                             right_sq / static_cast<double>(n - nl);
        if (score > best.score) {
          best.score = score;
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (column[r].first + column[r + 1].first);
        }
      }
    }
    if (best.feature >= 0 && best.score <= parent_score + 1e-12) best.feature = -1;
    return best;
  }

  const std::vector<std::vector<double>>& x_;
  const std::vector<int>& y_;
  std::size_t n_classes_;
  const ForestParams& params_;
  Rng rng_;
  std::vector<std::size_t> features_;
  DecisionTree tree_;
};

}  // namespace detail

inline ForestModel forest_train(const std::vector<std::vector<double>>& x,
                                const std::vector<std::string>& labels,
                                const ForestParams& params) {
  params.validate();
  if (x.empty() || x.size() != labels.size()) {
    throw InvalidArgument("forest training needs one label per training vector");
  }
  ForestModel model;
  model.params = params;
  model.dim = x.front().size();
  for (auto& row : x) {
    if (row.size() != model.dim) throw InvalidArgument("training vector dimension mismatch");
  }
  model.classes = labels;
  std::sort(model.classes.begin(), model.classes.end());
  model.classes.erase(std::unique(model.classes.begin(), model.classes.end()),
                      model.classes.end());
  if (model.classes.size() < 2) throw InvalidArgument("forest training needs >= 2 classes");

  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y[i] = static_cast<int>(std::lower_bound(model.classes.begin(), model.classes.end(), labels[i]) -
                            model.classes.begin());
  }

  model.trees.resize(static_cast<std::size_t>(params.n_trees));
  // Each tree owns its seed, so the thread count never changes the result.
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t t = first; t < model.trees.size(); t += stride) {
      detail::TreeBuilder builder(x, y, model.classes.size(), params,
                                  mix_seed({params.seed, 0x7ee5u, t}));
      model.trees[t] = builder.build();
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), model.trees.size());
  if (workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
  }
  return model;
}

// Plurality vote over trees; ties and unvoted labels fall back to label order.
inline Ranking forest_predict(const ForestModel& model, std::span<const double> x,
                              std::size_t k_out) {
  if (model.trees.empty()) throw InvalidArgument("forest has no trees");
  if (x.size() != model.dim) throw InvalidArgument("query dimension mismatch");
  if (k_out < 1) throw InvalidArgument("k_out must be >= 1");
  std::vector<int> votes(model.classes.size(), 0);
  for (auto& tree : model.trees) votes[static_cast<std::size_t>(tree.predict(x))]++;
  std::vector<std::size_t> order(votes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return votes[a] > votes[b]; });
  Ranking out;
  for (std::size_t i = 0; i < order.size() && i < k_out; ++i) {
    out.push_back({model.classes[order[i]],
                   static_cast<double>(votes[order[i]]) / static_cast<double>(model.trees.size())});
  }
  return out;
}

}  // namespace freqscope
