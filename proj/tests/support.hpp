#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "commentree/rng.hpp"
#include "commentree/scene.hpp"
#include "commentree/tree.hpp"

namespace commentree::test {

inline std::string source_dir() {
#ifdef COMMENTREE_SOURCE_DIR
  return COMMENTREE_SOURCE_DIR;
#else
  return ".";
#endif
}

inline std::string cli_path() {
#ifdef COMMENTREE_CLI_PATH
  return COMMENTREE_CLI_PATH;
#else
  return "commentree";
#endif
}

inline std::filesystem::path temp_file(const std::string& name) {
  static const auto base = std::filesystem::temp_directory_path() /
                           ("commentree-tests-" + std::to_string(::getpid()));
  std::filesystem::create_directories(base);
  return base / name;
}

inline FeatureVector fv(int ego, int incom, int outgo, int tl, int plan) {
  FeatureVector v;
  v[kEgoLane] = ego;
  v[kIncomLane] = incom;
  v[kOutgoLane] = outgo;
  v[kTl] = tl;
  v[kEgoPlan] = plan;
  return v;
}

inline TreeNode leaf(std::array<std::int64_t, kNumEgoActions> counts) {
  TreeNode node;
  node.class_counts = counts;
  return node;
}

inline TreeNode split(int feature, double threshold, int left, int right) {
  TreeNode node;
  node.feature = feature;
  node.threshold = threshold;
  node.left = left;
  node.right = right;
  return node;
}

/// Recomputes internal-node counts as the sum of their children, so
/// handcrafted trees satisfy the structural invariant.
inline void finalize_counts(DecisionTree& tree, int id = -1) {
  if (id < 0) id = tree.root;
  TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
  if (node.is_leaf()) return;
  finalize_counts(tree, node.left);
  finalize_counts(tree, node.right);
  for (int k = 0; k < kNumEgoActions; ++k) {
    node.class_counts[static_cast<std::size_t>(k)] =
        tree.nodes[static_cast<std::size_t>(node.left)].class_counts[static_cast<std::size_t>(k)] +
        tree.nodes[static_cast<std::size_t>(node.right)].class_counts[static_cast<std::size_t>(k)];
  }
}

inline DecisionTree make_tree(std::vector<TreeNode> nodes) {
  DecisionTree tree;
  tree.nodes = std::move(nodes);
  tree.root = 0;
  finalize_counts(tree);
  tree.validate();
  return tree;
}

inline RandomForest make_forest(std::vector<DecisionTree> trees) {
  RandomForest forest;
  forest.trees = std::move(trees);
  forest.params.n_trees = static_cast<int>(forest.trees.size());
  return forest;
}

/// Random dataset over the real feature domains, for property tests.
inline Dataset random_dataset(std::size_t rows, std::uint64_t seed) {
  const auto domains = feature_domains(Codebook::defaults());
  Rng rng(seed);
  Dataset dataset;
  dataset.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    DatasetRow row;
    for (int f = 0; f < kNumFeatures; ++f) {
      const auto& domain = domains[static_cast<std::size_t>(f)];
      row.features[f] = domain[rng.below(domain.size())];
    }
    row.label = static_cast<EgoAction>(rng.below(kNumEgoActions));
    dataset.push_back(row);
  }
  return dataset;
}

inline FeatureVector random_input(Rng& rng) {
  static const auto domains = feature_domains(Codebook::defaults());
  FeatureVector v;
  for (int f = 0; f < kNumFeatures; ++f) {
    const auto& domain = domains[static_cast<std::size_t>(f)];
    v[f] = domain[rng.below(domain.size())];
  }
  return v;
}

}  // namespace commentree::test
