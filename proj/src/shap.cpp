#include "commentree/shap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>

#include "commentree/errors.hpp"
#include "commentree/rng.hpp"

namespace commentree {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ShapleyWeights {
  // positive[p][q]: weight of a feature that must come from v, given p such
  // features and q features that must come from the background row.
  // negative[p][q]: weight (to subtract) of a background-required feature.
  std::array<std::array<double, kNumFeatures + 1>, kNumFeatures + 1> positive{};
  std::array<std::array<double, kNumFeatures + 1>, kNumFeatures + 1> negative{};
};

const ShapleyWeights& shapley_weights() {
  static const ShapleyWeights weights = [] {
    std::array<double, kNumFeatures + 1> factorial{};
    factorial[0] = 1.0;
    for (int i = 1; i <= kNumFeatures; ++i) {
      factorial[static_cast<std::size_t>(i)] = factorial[static_cast<std::size_t>(i - 1)] * i;
    }
    auto choose = [&](int n, int k) {
      return factorial[static_cast<std::size_t>(n)] /
             (factorial[static_cast<std::size_t>(k)] * factorial[static_cast<std::size_t>(n - k)]);
    };
    ShapleyWeights w;
    const double n_fact = factorial[kNumFeatures];
    for (int p = 0; p <= kNumFeatures; ++p) {
      for (int q = 0; p + q <= kNumFeatures; ++q) {
        const int r = kNumFeatures - p - q;
        if (p >= 1) {
          double sum = 0.0;
          for (int k = 0; k <= r; ++k) {
            sum += choose(r, k) * factorial[static_cast<std::size_t>(p - 1 + k)] *
                   factorial[static_cast<std::size_t>(kNumFeatures - p - k)] / n_fact;
          }
          w.positive[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] = sum;
        }
        if (q >= 1) {
          double sum = 0.0;
          for (int k = 0; k <= r; ++k) {
            sum += choose(r, k) * factorial[static_cast<std::size_t>(p + k)] *
                   factorial[static_cast<std::size_t>(kNumFeatures - p - k - 1)] / n_fact;
          }
          w.negative[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] = sum;
        }
      }
    }
    return w;
  }();
  return weights;
}

FeatureVector hybrid_input(const FeatureVector& v, const FeatureVector& row, unsigned subset) {
  FeatureVector h = row;
  for (int i = 0; i < kNumFeatures; ++i) {
    if (subset & (1u << i)) h[i] = v[i];
  }
  return h;
}

template <typename Model>
double subset_value(const Model& model, const FeatureVector& v, unsigned subset, EgoAction target,
                    const Background& background) {
  if (background.empty()) throw EmptyBackgroundError("background sample is empty");
  const auto t = static_cast<std::size_t>(static_cast<int>(target));
  double sum = 0.0;
  for (const auto& row : background) {
    sum += model.predict_proba(hybrid_input(v, row, subset))[t];
  }
  return sum / static_cast<double>(background.size());
}

template <typename Model>
CIResult bruteforce_impl(const Model& model, const FeatureVector& v, EgoAction target,
                         const Background& background) {
  constexpr unsigned kAllSubsets = 1u << kNumFeatures;
  std::array<double, kAllSubsets> value{};
  for (unsigned subset = 0; subset < kAllSubsets; ++subset) {
    value[subset] = subset_value(model, v, subset, target, background);
  }

  std::array<double, kNumFeatures + 1> factorial{};
  factorial[0] = 1.0;
  for (int i = 1; i <= kNumFeatures; ++i) {
    factorial[static_cast<std::size_t>(i)] = factorial[static_cast<std::size_t>(i - 1)] * i;
  }

  CIResult result;
  result.target_class = target;
  result.base_value = value[0];
  for (int i = 0; i < kNumFeatures; ++i) {
    const unsigned bit = 1u << i;
    double phi = 0.0;
    for (unsigned subset = 0; subset < kAllSubsets; ++subset) {
      if (subset & bit) continue;
      const int s = std::popcount(subset);
      const double weight = factorial[static_cast<std::size_t>(s)] *
                            factorial[static_cast<std::size_t>(kNumFeatures - s - 1)] /
                            factorial[kNumFeatures];
      phi += weight * (value[subset | bit] - value[subset]);
    }
    result.per_feature[static_cast<std::size_t>(i)] = phi;
  }
  return result;
}

}  // namespace

Background make_background(const Dataset& dataset, std::size_t cap, std::uint64_t seed) {
  if (dataset.empty()) throw EmptyBackgroundError("cannot sample a background from an empty dataset");
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (dataset.size() > cap) {
    Rng rng(derive_seed(seed, 0xb61d));
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::size_t j = rng.below(i + 1);
      std::swap(order[i], order[j]);
    }
    order.resize(cap);
    std::sort(order.begin(), order.end());
  }
  Background background;
  background.reserve(order.size());
  for (auto i : order) background.push_back(dataset[i].features);
  return background;
}

double value_function(const RandomForest& forest, const FeatureVector& v, unsigned subset,
                      EgoAction target, const Background& background) {
  return subset_value(forest, v, subset, target, background);
}

double value_function(const DecisionTree& tree, const FeatureVector& v, unsigned subset,
                      EgoAction target, const Background& background) {
  return subset_value(tree, v, subset, target, background);
}

CIResult shap_bruteforce(const RandomForest& forest, const FeatureVector& v, EgoAction target,
                         const Background& background) {
  return bruteforce_impl(forest, v, target, background);
}

CIResult shap_bruteforce(const DecisionTree& tree, const FeatureVector& v, EgoAction target,
                         const Background& background) {
  return bruteforce_impl(tree, v, target, background);
}

// ---------------------------------------------------------------------------
// CiEngine

CiEngine::CiEngine(const RandomForest& forest, Background background, CiMethod method)
    : forest_(&forest), background_(std::move(background)), method_(method) {
  if (background_.empty()) throw EmptyBackgroundError("background sample is empty");

  leaves_.resize(forest.trees.size());
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const DecisionTree& tree = forest.trees[t];

    // Collect every leaf together with the merged interval of its path.
    struct Frame {
      int node;
      std::array<double, kNumFeatures> lower;
      std::array<double, kNumFeatures> upper;
      unsigned mask;
    };
    std::array<double, kNumFeatures> no_lower;
    std::array<double, kNumFeatures> no_upper;
    no_lower.fill(-kInf);
    no_upper.fill(kInf);
    std::vector<Frame> stack = {{tree.root, no_lower, no_upper, 0}};
    while (!stack.empty()) {
      Frame frame = std::move(stack.back());
      stack.pop_back();
      const TreeNode& node = tree.nodes[static_cast<std::size_t>(frame.node)];
      if (node.is_leaf()) {
        LeafInfo info;
        info.freq = leaf_frequencies(node);
        info.lower = frame.lower;
        info.upper = frame.upper;
        info.path_mask = frame.mask;

        std::map<unsigned, std::int64_t> pattern_counts;
        for (const auto& row : background_) {
          unsigned pattern = 0;
          for (int f = 0; f < kNumFeatures; ++f) {
            if (!(frame.mask & (1u << f))) continue;
            const double x = static_cast<double>(row[f]);
            if (x > frame.lower[static_cast<std::size_t>(f)] &&
                x <= frame.upper[static_cast<std::size_t>(f)]) {
              pattern |= 1u << f;
            }
          }
          pattern_counts[pattern] += 1;
        }
        const double denom = static_cast<double>(background_.size());
        for (const auto& [pattern, count] : pattern_counts) {
          info.background_patterns.emplace_back(pattern, static_cast<double>(count) / denom);
        }
        leaves_[t].push_back(std::move(info));
        continue;
      }
      Frame left = frame;
      left.node = node.left;
      left.mask |= 1u << node.feature;
      left.upper[static_cast<std::size_t>(node.feature)] =
          std::min(left.upper[static_cast<std::size_t>(node.feature)], node.threshold);
      Frame right = std::move(frame);
      right.node = node.right;
      right.mask |= 1u << node.feature;
      right.lower[static_cast<std::size_t>(node.feature)] =
          std::max(right.lower[static_cast<std::size_t>(node.feature)], node.threshold);
      // Push right first so leaves come out left-to-right.
      stack.push_back(std::move(right));
      stack.push_back(std::move(left));
    }
  }
}

CIResult CiEngine::run(const FeatureVector& v, EgoAction target) const {
  return method_ == CiMethod::TreePath ? run_treepath(v, target) : run_bruteforce(v, target);
}

CIResult CiEngine::run_bruteforce(const FeatureVector& v, EgoAction target) const {
  return bruteforce_impl(*forest_, v, target, background_);
}

CIResult CiEngine::run_treepath(const FeatureVector& v, EgoAction target) const {
  const ShapleyWeights& weights = shapley_weights();
  const auto target_idx = static_cast<std::size_t>(static_cast<int>(target));

  CIResult result;
  result.target_class = target;

  for (const auto& tree_leaves : leaves_) {
    std::array<double, kNumFeatures> phi{};
    double base = 0.0;
    for (const LeafInfo& leaf : tree_leaves) {
      const double w = leaf.freq[target_idx];
      if (w == 0.0) continue;

      unsigned v_pattern = 0;
      for (int f = 0; f < kNumFeatures; ++f) {
        if (!(leaf.path_mask & (1u << f))) continue;
        const double x = static_cast<double>(v[f]);
        if (x > leaf.lower[static_cast<std::size_t>(f)] &&
            x <= leaf.upper[static_cast<std::size_t>(f)]) {
          v_pattern |= 1u << f;
        }
      }

      for (const auto& [b_pattern, mass] : leaf.background_patterns) {
        // Features the hybrid must take from v vs. from the background row;
        // leaves failing both on some feature are unreachable for this row.
        const unsigned blocked = leaf.path_mask & ~v_pattern & ~b_pattern;
        if (blocked != 0) continue;
        const unsigned need_v = leaf.path_mask & v_pattern & ~b_pattern;
        const unsigned need_b = leaf.path_mask & b_pattern & ~v_pattern;
        const int p = std::popcount(need_v);
        const int q = std::popcount(need_b);

        const double contribution = w * mass;
        if (p == 0) base += contribution;
        if (p >= 1) {
          const double wp = weights.positive[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
          for (int f = 0; f < kNumFeatures; ++f) {
            if (need_v & (1u << f)) phi[static_cast<std::size_t>(f)] += contribution * wp;
          }
        }
        if (q >= 1) {
          const double wn = weights.negative[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
          for (int f = 0; f < kNumFeatures; ++f) {
            if (need_b & (1u << f)) phi[static_cast<std::size_t>(f)] -= contribution * wn;
          }
        }
      }
    }
    for (int f = 0; f < kNumFeatures; ++f) {
      result.per_feature[static_cast<std::size_t>(f)] += phi[static_cast<std::size_t>(f)];
    }
    result.base_value += base;
  }

  const double n_trees = static_cast<double>(leaves_.size());
  for (auto& phi : result.per_feature) phi /= n_trees;
  result.base_value /= n_trees;
  return result;
}

CIResult shap_treepath(const RandomForest& forest, const FeatureVector& v, EgoAction target,
                       const Background& background) {
  CiEngine engine(forest, background, CiMethod::TreePath);
  return engine.run(v, target);
}

CIResult shap_treepath(const DecisionTree& tree, const FeatureVector& v, EgoAction target,
                       const Background& background) {
  RandomForest forest;
  forest.kind = tree.kind;
  forest.trees.push_back(tree);
  forest.params.n_trees = 1;
  return shap_treepath(forest, v, target, background);
}

CIResult obtain_ci(const RandomForest& forest, const FeatureVector& v, const Background& background,
                   CiMethod method, std::optional<EgoAction> target) {
  EgoAction target_class;
  if (target) {
    target_class = *target;
  } else {
    auto proba = forest.predict_proba(v);
    int best = 0;
    for (int k = 1; k < kNumEgoActions; ++k) {
      if (proba[static_cast<std::size_t>(k)] > proba[static_cast<std::size_t>(best)]) best = k;
    }
    target_class = static_cast<EgoAction>(best);
  }
  return method == CiMethod::TreePath ? shap_treepath(forest, v, target_class, background)
                                      : shap_bruteforce(forest, v, target_class, background);
}

}  // namespace commentree
