#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "commentree/scene.hpp"

namespace commentree {

enum class TreeKind { Classification, Regression };

/// One node of a binary decision tree. Nodes are addressed by their index in
/// DecisionTree::nodes; `feature < 0` marks a leaf.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<std::int64_t, kNumEgoActions> class_counts{};  // training samples per class
  double leaf_value = 0.0;                                  // regression trees only

  bool is_leaf() const { return feature < 0; }
  std::int64_t total_count() const {
    std::int64_t total = 0;
    for (auto c : class_counts) total += c;
    return total;
  }
};

enum class Comparator { LE, GT };  // left branch = "feature <= threshold"

struct PathStep {
  int node_id = 0;
  int feature = 0;
  Comparator comparator = Comparator::LE;
  double threshold = 0.0;

  bool satisfied_by(const FeatureVector& v) const {
    double x = static_cast<double>(v[feature]);
    return comparator == Comparator::LE ? x <= threshold : x > threshold;
  }
};

struct DecisionPath {
  std::vector<PathStep> steps;  // root to leaf, in branch order
  int leaf_id = 0;
  EgoAction predicted = EgoAction::Stop;
};

class DecisionTree {
 public:
  std::vector<TreeNode> nodes;
  int root = 0;
  TreeKind kind = TreeKind::Classification;

  int leaf_for(const FeatureVector& v) const;
  EgoAction predict(const FeatureVector& v) const;
  std::array<double, kNumEgoActions> predict_proba(const FeatureVector& v) const;
  double predict_value(const FeatureVector& v) const;  // regression trees
  DecisionPath decision_path(const FeatureVector& v) const;

  /// Shannon entropy (log2) of the reached leaf's class frequencies.
  double leaf_entropy(const FeatureVector& v) const;

  std::size_t leaf_count() const;
  int depth_of(int node_id) const;
  std::vector<int> parents() const;  // parent id per node, -1 for the root

  /// Structural checks: reachability, child links, count consistency.
  /// Throws FormatError on violation.
  void validate() const;
};

std::array<double, kNumEgoActions> leaf_frequencies(const TreeNode& leaf);

struct TreeParams {
  int max_depth = 12;           // 0 = unlimited
  int min_samples_leaf = 1;
  int features_per_split = 0;   // 0 = consider all features
  std::uint64_t seed = 0;
};

struct ForestParams {
  int n_trees = 100;
  int max_depth = 12;
  int min_samples_leaf = 1;
  int features_per_split = 2;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

class RandomForest {
 public:
  std::vector<DecisionTree> trees;
  ForestParams params;
  TreeKind kind = TreeKind::Classification;

  int n_trees() const { return static_cast<int>(trees.size()); }
  EgoAction predict(const FeatureVector& v) const;  // majority vote, ties to lowest class
  std::array<double, kNumEgoActions> predict_proba(const FeatureVector& v) const;
};

/// CART induction with Gini impurity. Thresholds are midpoints between
/// adjacent observed values; ties prefer the lowest feature index, then the
/// lowest threshold. Throws EmptyDatasetError.
DecisionTree fit_tree(const Dataset& train, const TreeParams& params);

/// Bagged forest; tree t is grown with seed derived from (params.seed, t).
RandomForest fit_forest(const Dataset& train, const ForestParams& params);

/// Indices of the trees whose own prediction matches the forest's majority
/// prediction for v.
std::vector<int> obtain_mode_trees(const RandomForest& forest, const FeatureVector& v);

/// Among mode trees, picks the tree whose decision path carries the most
/// re-occurring features: each tree is scored by the summed global step
/// frequency of the distinct features on its path. Ties prefer the shorter
/// path, then the lower tree index. Returns an index into `mode_trees`'
/// domain, i.e. a tree index of the forest.
int obtain_tree_by_factoring_paths(const RandomForest& forest, std::span<const int> mode_trees,
                                   std::span<const DecisionPath> paths);

/// For regression forests: the tree whose prediction is closest to the median
/// of all tree predictions (ties to the lowest index). Throws NotRegressionError
/// when called on a classifier.
int obtain_median_tree(const RandomForest& forest, const FeatureVector& v);

/// Mode-tree + path-factoring reduction (median tree for regression forests);
/// returns the index of the explaining tree.
int reduce_to_explaining_tree(const RandomForest& forest, const FeatureVector& v);

struct CvCandidate {
  int max_depth = 12;
  int min_samples_leaf = 1;
};

struct CvResult {
  CvCandidate candidate;
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
};

struct CvReport {
  std::vector<CvResult> results;
  std::size_t best = 0;  // index of the winning candidate
};

/// K-fold cross-validation over (max_depth, min_samples_leaf) candidates.
/// Folds are assigned by a seeded shuffle; every row lands in exactly one fold.
CvReport cross_validate(const Dataset& train, const ForestParams& base,
                        std::span<const CvCandidate> candidates, int folds, std::uint64_t seed);

double accuracy_on(const RandomForest& forest, const Dataset& data);

}  // namespace commentree
