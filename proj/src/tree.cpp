#include "commentree/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "commentree/errors.hpp"
#include "commentree/rng.hpp"

namespace commentree {

namespace {

int argmax_class(const std::array<std::int64_t, kNumEgoActions>& counts) {
  int best = 0;
  for (int k = 1; k < kNumEgoActions; ++k) {
    if (counts[static_cast<std::size_t>(k)] > counts[static_cast<std::size_t>(best)]) best = k;
  }
  return best;
}

}  // namespace

std::array<double, kNumEgoActions> leaf_frequencies(const TreeNode& leaf) {
  std::array<double, kNumEgoActions> freq{};
  const auto total = leaf.total_count();
  if (total == 0) {
    freq.fill(1.0 / kNumEgoActions);
    return freq;
  }
  for (int k = 0; k < kNumEgoActions; ++k) {
    freq[static_cast<std::size_t>(k)] =
        static_cast<double>(leaf.class_counts[static_cast<std::size_t>(k)]) / static_cast<double>(total);
  }
  return freq;
}

int DecisionTree::leaf_for(const FeatureVector& v) const {
  int id = root;
  while (!nodes[static_cast<std::size_t>(id)].is_leaf()) {
    const TreeNode& node = nodes[static_cast<std::size_t>(id)];
    id = static_cast<double>(v[node.feature]) <= node.threshold ? node.left : node.right;
  }
  return id;
}

EgoAction DecisionTree::predict(const FeatureVector& v) const {
  const TreeNode& leaf = nodes[static_cast<std::size_t>(leaf_for(v))];
  return static_cast<EgoAction>(argmax_class(leaf.class_counts));
}

std::array<double, kNumEgoActions> DecisionTree::predict_proba(const FeatureVector& v) const {
  return leaf_frequencies(nodes[static_cast<std::size_t>(leaf_for(v))]);
}

double DecisionTree::predict_value(const FeatureVector& v) const {
  return nodes[static_cast<std::size_t>(leaf_for(v))].leaf_value;
}

DecisionPath DecisionTree::decision_path(const FeatureVector& v) const {
  DecisionPath path;
  int id = root;
  while (!nodes[static_cast<std::size_t>(id)].is_leaf()) {
    const TreeNode& node = nodes[static_cast<std::size_t>(id)];
    const bool goes_left = static_cast<double>(v[node.feature]) <= node.threshold;
    path.steps.push_back(
        {id, node.feature, goes_left ? Comparator::LE : Comparator::GT, node.threshold});
    id = goes_left ? node.left : node.right;
  }
  path.leaf_id = id;
  path.predicted = static_cast<EgoAction>(argmax_class(nodes[static_cast<std::size_t>(id)].class_counts));
  return path;
}

double DecisionTree::leaf_entropy(const FeatureVector& v) const {
  const TreeNode& leaf = nodes[static_cast<std::size_t>(leaf_for(v))];
  if (leaf.total_count() == 0) return 0.0;
  auto freq = leaf_frequencies(leaf);
  double entropy = 0.0;
  for (double p : freq) {
    if (p > 0.0) entropy -= p * std::log2(p);
  }
  return entropy;
}

std::size_t DecisionTree::leaf_count() const {
  std::size_t count = 0;
  for (const auto& node : nodes) {
    if (node.is_leaf()) ++count;
  }
  return count;
}

std::vector<int> DecisionTree::parents() const {
  std::vector<int> parent(nodes.size(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].is_leaf()) {
      parent[static_cast<std::size_t>(nodes[i].left)] = static_cast<int>(i);
      parent[static_cast<std::size_t>(nodes[i].right)] = static_cast<int>(i);
    }
  }
  return parent;
}

int DecisionTree::depth_of(int node_id) const {
  auto parent = parents();
  int depth = 0;
  while (parent[static_cast<std::size_t>(node_id)] >= 0) {
    node_id = parent[static_cast<std::size_t>(node_id)];
    ++depth;
  }
  return depth;
}

void DecisionTree::validate() const {
  if (nodes.empty()) throw FormatError("tree has no nodes");
  if (root < 0 || root >= static_cast<int>(nodes.size())) throw FormatError("root id out of range");
  std::vector<bool> seen(nodes.size(), false);
  std::vector<int> stack = {root};
  std::size_t reached = 0;
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    if (id < 0 || id >= static_cast<int>(nodes.size())) throw FormatError("child id out of range");
    if (seen[static_cast<std::size_t>(id)]) throw FormatError("node reachable twice (cycle or shared child)");
    seen[static_cast<std::size_t>(id)] = true;
    ++reached;
    const TreeNode& node = nodes[static_cast<std::size_t>(id)];
    if (node.is_leaf()) {
      if (node.left >= 0 || node.right >= 0) throw FormatError("leaf with children");
      continue;
    }
    if (node.feature >= kNumFeatures) throw FormatError("feature index out of range");
    if (node.left < 0 || node.right < 0) throw FormatError("internal node missing a child");
    if (kind == TreeKind::Classification) {
      const auto& l = nodes[static_cast<std::size_t>(node.left)].class_counts;
      const auto& r = nodes[static_cast<std::size_t>(node.right)].class_counts;
      for (int k = 0; k < kNumEgoActions; ++k) {
        if (node.class_counts[static_cast<std::size_t>(k)] !=
            l[static_cast<std::size_t>(k)] + r[static_cast<std::size_t>(k)]) {
          throw FormatError("internal class counts do not equal the sum of the children");
        }
      }
    }
    stack.push_back(node.left);
    stack.push_back(node.right);
  }
  if (reached != nodes.size()) throw FormatError("unreachable nodes present");
}

// ---------------------------------------------------------------------------
// CART induction

namespace {

constexpr int kMaxCodeSpace = 64;  // feature codes must stay below this

struct SplitChoice {
  bool found = false;
  int feature = 0;
  double threshold = 0.0;
  double gini = std::numeric_limits<double>::infinity();
};

double gini_of(const std::array<std::int64_t, kNumEgoActions>& counts, std::int64_t total) {
  if (total == 0) return 0.0;
  double gini = 1.0;
  for (auto c : counts) {
    double p = static_cast<double>(c) / static_cast<double>(total);
    gini -= p * p;
  }
  return gini;
}

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const TreeParams& params)
      : data_(data), params_(params), rng_(params.seed) {}

  DecisionTree build() {
    std::vector<std::size_t> rows(data_.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return build_from(std::move(rows));
  }

  DecisionTree build_from(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    tree_.root = 0;
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> rows, int depth) {
    std::array<std::int64_t, kNumEgoActions> counts{};
    for (auto r : rows) counts[static_cast<std::size_t>(static_cast<int>(data_[r].label))] += 1;
    const auto total = static_cast<std::int64_t>(rows.size());

    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[static_cast<std::size_t>(id)].class_counts = counts;

    const double node_gini = gini_of(counts, total);
    const bool depth_ok = params_.max_depth <= 0 || depth < params_.max_depth;
    if (node_gini <= 0.0 || !depth_ok ||
        total < 2 * static_cast<std::int64_t>(params_.min_samples_leaf)) {
      return id;
    }

    SplitChoice split = best_split(rows, counts, total, node_gini);
    if (!split.found) return id;

    std::vector<std::size_t> left_rows, right_rows;
    left_rows.reserve(rows.size());
    for (auto r : rows) {
      if (static_cast<double>(data_[r].features[split.feature]) <= split.threshold) {
        left_rows.push_back(r);
      } else {
        right_rows.push_back(r);
      }
    }
    rows.clear();
    rows.shrink_to_fit();

    const int left_id = grow(std::move(left_rows), depth + 1);
    const int right_id = grow(std::move(right_rows), depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left_id;
    node.right = right_id;
    return id;
  }

  SplitChoice best_split(const std::vector<std::size_t>& rows,
                         const std::array<std::int64_t, kNumEgoActions>& counts, std::int64_t total,
                         double node_gini) {
    std::array<bool, kNumFeatures> considered{};
    if (params_.features_per_split <= 0 || params_.features_per_split >= kNumFeatures) {
      considered.fill(true);
    } else {
      std::array<int, kNumFeatures> pool = {0, 1, 2, 3, 4};
      for (int k = 0; k < params_.features_per_split; ++k) {
        int j = k + static_cast<int>(rng_.below(static_cast<std::uint64_t>(kNumFeatures - k)));
        std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
        considered[static_cast<std::size_t>(pool[static_cast<std::size_t>(k)])] = true;
      }
    }

    SplitChoice best;
    std::array<std::array<std::int64_t, kNumEgoActions>, kMaxCodeSpace> hist;
    for (int f = 0; f < kNumFeatures; ++f) {
      if (!considered[static_cast<std::size_t>(f)]) continue;
      for (auto& bucket : hist) bucket.fill(0);
      int max_value = 0;
      for (auto r : rows) {
        const int value = data_[r].features[f];
        if (value < 0 || value >= kMaxCodeSpace) {
          throw Error("feature code " + std::to_string(value) + " outside supported range [0, " +
                      std::to_string(kMaxCodeSpace) + ")");
        }
        hist[static_cast<std::size_t>(value)][static_cast<std::size_t>(
            static_cast<int>(data_[r].label))] += 1;
        max_value = std::max(max_value, value);
      }

      std::array<std::int64_t, kNumEgoActions> left{};
      std::int64_t left_total = 0;
      int prev_value = -1;
      for (int value = 0; value <= max_value; ++value) {
        const auto& bucket = hist[static_cast<std::size_t>(value)];
        std::int64_t bucket_total = 0;
        for (auto c : bucket) bucket_total += c;
        if (bucket_total == 0) continue;
        if (prev_value >= 0) {
          // Candidate split between prev_value and value.
          const std::int64_t right_total = total - left_total;
          if (left_total >= params_.min_samples_leaf && right_total >= params_.min_samples_leaf) {
            std::array<std::int64_t, kNumEgoActions> right{};
            for (int k = 0; k < kNumEgoActions; ++k) {
              right[static_cast<std::size_t>(k)] =
                  counts[static_cast<std::size_t>(k)] - left[static_cast<std::size_t>(k)];
            }
            const double weighted =
                (static_cast<double>(left_total) * gini_of(left, left_total) +
                 static_cast<double>(right_total) * gini_of(right, right_total)) /
                static_cast<double>(total);
            if (weighted < best.gini - 1e-12 && weighted < node_gini - 1e-12) {
              best.found = true;
              best.feature = f;
              best.threshold = (static_cast<double>(prev_value) + static_cast<double>(value)) / 2.0;
              best.gini = weighted;
            }
          }
        }
        for (int k = 0; k < kNumEgoActions; ++k) {
          left[static_cast<std::size_t>(k)] += bucket[static_cast<std::size_t>(k)];
        }
        left_total += bucket_total;
        prev_value = value;
      }
    }
    return best;
  }

  const Dataset& data_;
  TreeParams params_;
  Rng rng_;
  DecisionTree tree_;
};

}  // namespace

DecisionTree fit_tree(const Dataset& train, const TreeParams& params) {
  if (train.empty()) throw EmptyDatasetError("cannot fit a tree on an empty dataset");
  TreeBuilder builder(train, params);
  DecisionTree tree = builder.build();
  tree.kind = TreeKind::Classification;
  return tree;
}

RandomForest fit_forest(const Dataset& train, const ForestParams& params) {
  if (train.empty()) throw EmptyDatasetError("cannot fit a forest on an empty dataset");
  if (params.n_trees < 1) throw InvalidConfigError("n_trees must be at least 1");

  RandomForest forest;
  forest.params = params;
  forest.kind = TreeKind::Classification;
  forest.trees.reserve(static_cast<std::size_t>(params.n_trees));
  for (int t = 0; t < params.n_trees; ++t) {
    TreeParams tree_params;
    tree_params.max_depth = params.max_depth;
    tree_params.min_samples_leaf = params.min_samples_leaf;
    tree_params.features_per_split = params.features_per_split;
    tree_params.seed = derive_seed(params.seed, static_cast<std::uint64_t>(t));

    TreeBuilder builder(train, tree_params);
    DecisionTree tree;
    if (params.bootstrap) {
      Rng boot(derive_seed(tree_params.seed, 0x0b00f));
      std::vector<std::size_t> rows(train.size());
      for (auto& r : rows) r = boot.below(train.size());
      tree = builder.build_from(std::move(rows));
    } else {
      tree = builder.build();
    }
    tree.kind = TreeKind::Classification;
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

EgoAction RandomForest::predict(const FeatureVector& v) const {
  std::array<int, kNumEgoActions> votes{};
  for (const auto& tree : trees) {
    votes[static_cast<std::size_t>(static_cast<int>(tree.predict(v)))] += 1;
  }
  int best = 0;
  for (int k = 1; k < kNumEgoActions; ++k) {
    if (votes[static_cast<std::size_t>(k)] > votes[static_cast<std::size_t>(best)]) best = k;
  }
  return static_cast<EgoAction>(best);
}

std::array<double, kNumEgoActions> RandomForest::predict_proba(const FeatureVector& v) const {
  std::array<double, kNumEgoActions> proba{};
  for (const auto& tree : trees) {
    auto freq = tree.predict_proba(v);
    for (int k = 0; k < kNumEgoActions; ++k) {
      proba[static_cast<std::size_t>(k)] += freq[static_cast<std::size_t>(k)];
    }
  }
  for (auto& p : proba) p /= static_cast<double>(trees.size());
  return proba;
}

std::vector<int> obtain_mode_trees(const RandomForest& forest, const FeatureVector& v) {
  const EgoAction majority = forest.predict(v);
  std::vector<int> mode;
  for (int t = 0; t < forest.n_trees(); ++t) {
    if (forest.trees[static_cast<std::size_t>(t)].predict(v) == majority) mode.push_back(t);
  }
  return mode;
}

int obtain_tree_by_factoring_paths(const RandomForest& forest, std::span<const int> mode_trees,
                                   std::span<const DecisionPath> paths) {
  if (mode_trees.empty()) throw Error("mode tree set is empty");
  (void)forest;

  // Global frequency of each feature over every step of every path.
  std::array<int, kNumFeatures> frequency{};
  for (const auto& path : paths) {
    for (const auto& step : path.steps) frequency[static_cast<std::size_t>(step.feature)] += 1;
  }

  int best = -1;
  int best_score = -1;
  std::size_t best_length = 0;
  for (std::size_t i = 0; i < mode_trees.size(); ++i) {
    std::array<bool, kNumFeatures> on_path{};
    for (const auto& step : paths[i].steps) on_path[static_cast<std::size_t>(step.feature)] = true;
    int score = 0;
    for (int f = 0; f < kNumFeatures; ++f) {
      if (on_path[static_cast<std::size_t>(f)]) score += frequency[static_cast<std::size_t>(f)];
    }
    const std::size_t length = paths[i].steps.size();
    if (score > best_score || (score == best_score && length < best_length)) {
      best = mode_trees[i];
      best_score = score;
      best_length = length;
    }
  }
  return best;
}

int obtain_median_tree(const RandomForest& forest, const FeatureVector& v) {
  if (forest.kind != TreeKind::Regression) {
    throw NotRegressionError("median-tree reduction applies to regression forests only");
  }
  std::vector<double> predictions;
  predictions.reserve(forest.trees.size());
  for (const auto& tree : forest.trees) predictions.push_back(tree.predict_value(v));

  std::vector<double> sorted = predictions;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 == 1 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;

  int best = 0;
  double best_distance = std::abs(predictions[0] - median);
  for (std::size_t i = 1; i < predictions.size(); ++i) {
    double distance = std::abs(predictions[i] - median);
    if (distance < best_distance) {
      best = static_cast<int>(i);
      best_distance = distance;
    }
  }
  return best;
}

int reduce_to_explaining_tree(const RandomForest& forest, const FeatureVector& v) {
  if (forest.kind == TreeKind::Regression) return obtain_median_tree(forest, v);
  auto mode = obtain_mode_trees(forest, v);
  std::vector<DecisionPath> paths;
  paths.reserve(mode.size());
  for (int t : mode) paths.push_back(forest.trees[static_cast<std::size_t>(t)].decision_path(v));
  return obtain_tree_by_factoring_paths(forest, mode, paths);
}

double accuracy_on(const RandomForest& forest, const Dataset& data) {
  if (data.empty()) throw EmptyDatasetError("cannot score an empty dataset");
  std::size_t hits = 0;
  for (const auto& row : data) {
    if (forest.predict(row.features) == row.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

CvReport cross_validate(const Dataset& train, const ForestParams& base,
                        std::span<const CvCandidate> candidates, int folds, std::uint64_t seed) {
  if (train.empty()) throw EmptyDatasetError("cannot cross-validate an empty dataset");
  if (folds < 2) throw InvalidConfigError("cross-validation needs at least 2 folds");
  if (candidates.empty()) throw InvalidConfigError("no candidates to evaluate");

  const std::size_t n = train.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0xcf01d));
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j = rng.below(i + 1);
    std::swap(order[i], order[j]);
  }
  std::vector<int> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) fold_of[order[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));

  CvReport report;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    CvResult result;
    result.candidate = candidates[c];
    for (int f = 0; f < folds; ++f) {
      Dataset fit_part, held_part;
      for (std::size_t i = 0; i < n; ++i) {
        (fold_of[i] == f ? held_part : fit_part).push_back(train[i]);
      }
      if (fit_part.empty() || held_part.empty()) {
        throw InvalidConfigError("fold count exceeds dataset size");
      }
      ForestParams params = base;
      params.max_depth = candidates[c].max_depth;
      params.min_samples_leaf = candidates[c].min_samples_leaf;
      params.seed = derive_seed(seed, c * static_cast<std::size_t>(folds) + static_cast<std::size_t>(f));
      RandomForest forest = fit_forest(fit_part, params);
      result.fold_accuracy.push_back(accuracy_on(forest, held_part));
    }
    double sum = 0.0;
    for (double a : result.fold_accuracy) sum += a;
    result.mean_accuracy = sum / static_cast<double>(result.fold_accuracy.size());
    report.results.push_back(std::move(result));
  }
  for (std::size_t c = 1; c < report.results.size(); ++c) {
    if (report.results[c].mean_accuracy > report.results[report.best].mean_accuracy) report.best = c;
  }
  return report;
}

}  // namespace commentree
