#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "casebench/linalg.hpp"

namespace casebench {

inline constexpr double kDefaultForestThreshold = 0.47;

struct ForestOptions {
  int n_trees = 1000;
  std::uint64_t seed = 0;
  bool bootstrap = true;
  Index max_features = 0;  // 0: ceil(sqrt(n_features))
  int n_threads = 0;       // 0: hardware concurrency
};

struct TreeNode {
  Index feature = -1;  // -1 marks a leaf
  double threshold = 0;  // go left when value <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  double positive_fraction = 0;  // weighted share of positive samples reaching the node
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(const SpMat& x, Index row) const;
  /// Leaf majority, ties counted as positive.
  bool votes_positive(const SpMat& x, Index row) const { return leaf_for(x, row).positive_fraction >= 0.5; }
};

struct RandomForestModel {
  Index n_features = 0;
  double threshold = kDefaultForestThreshold;
  std::uint64_t seed = 0;
  std::vector<DecisionTree> trees;
  Eigen::VectorXd importance;  // normalized mean impurity decrease
};

/// Gini CART trees, each grown to purity on its own bootstrap sample (tree t
/// draws from the stream derive_seed(seed, t)). Each split evaluates
/// max_features uniformly drawn candidates, drawing more from the features
/// present in the node only when every candidate is constant there.
RandomForestModel rf_fit(const SpMat& x, std::span<const int> y, const ForestOptions& options = {});

/// Fraction of trees voting positive.
Eigen::VectorXd rf_score(const RandomForestModel& model, const SpMat& x);
/// score >= threshold is positive.
std::vector<int> rf_predict(const RandomForestModel& model, const SpMat& x, double threshold);
inline std::vector<int> rf_predict(const RandomForestModel& model, const SpMat& x) {
  return rf_predict(model, x, model.threshold);
}

/// Per-feature mean decrease in Gini impurity, normalized to sum to 1.
const Eigen::VectorXd& rf_feature_importance(const RandomForestModel& model);

/// Column indices of the k most important features; ties go to the lower index.
std::vector<Index> top_features(const Eigen::VectorXd& importance, Index k);

}  // namespace casebench
