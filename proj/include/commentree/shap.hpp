#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "commentree/scene.hpp"
#include "commentree/tree.hpp"

namespace commentree {

/// Per-feature contextual importance of one prediction. Signed values in
/// probability units of the target class; magnitude is importance, sign is
/// utility. Efficiency holds: sum(per_feature) + base_value equals the model's
/// probability for target_class on the explained input.
struct CIResult {
  std::array<double, kNumFeatures> per_feature{};
  double base_value = 0.0;
  EgoAction target_class = EgoAction::Stop;
};

enum class CiMethod { BruteForce, TreePath };

using Background = std::vector<FeatureVector>;

/// Deterministic background sample: up to `cap` rows of the dataset chosen by
/// a seeded shuffle, kept in original row order.
Background make_background(const Dataset& dataset, std::size_t cap, std::uint64_t seed);

/// Interventional value of a feature subset: mean over background rows of the
/// model's target-class probability on the hybrid input that takes subset
/// features from v and everything else from the background row. `subset` is a
/// bitmask over the five features.
double value_function(const RandomForest& forest, const FeatureVector& v, unsigned subset,
                      EgoAction target, const Background& background);
double value_function(const DecisionTree& tree, const FeatureVector& v, unsigned subset,
                      EgoAction target, const Background& background);

/// Exact Shapley attribution by enumeration of all 2^5 feature subsets with
/// binomial weighting.
CIResult shap_bruteforce(const RandomForest& forest, const FeatureVector& v, EgoAction target,
                         const Background& background);
CIResult shap_bruteforce(const DecisionTree& tree, const FeatureVector& v, EgoAction target,
                         const Background& background);

/// The same attribution computed per tree by leaf enumeration: each leaf's
/// path bounds classify features as required-from-v, required-from-background
/// or unconstrained, and closed-form Shapley weights are accumulated per
/// background row. Agrees with shap_bruteforce to within 1e-9.
CIResult shap_treepath(const RandomForest& forest, const FeatureVector& v, EgoAction target,
                       const Background& background);
CIResult shap_treepath(const DecisionTree& tree, const FeatureVector& v, EgoAction target,
                       const Background& background);

/// Attribution for the model's predicted class (argmax probability, ties to
/// the lowest class index), or for an explicit target when given.
CIResult obtain_ci(const RandomForest& forest, const FeatureVector& v, const Background& background,
                   CiMethod method = CiMethod::TreePath, std::optional<EgoAction> target = {});

/// Reusable attribution engine: precomputes per-leaf path bounds and the
/// background classification once per (model, background) so repeated
/// explanations stay cheap.
class CiEngine {
 public:
  CiEngine(const RandomForest& forest, Background background, CiMethod method = CiMethod::TreePath);

  CIResult run(const FeatureVector& v, EgoAction target) const;
  const Background& background() const { return background_; }
  CiMethod method() const { return method_; }

 private:
  struct LeafInfo {
    std::array<double, kNumEgoActions> freq{};
    // Merged path interval per feature; features off the path keep (-inf, inf).
    std::array<double, kNumFeatures> lower{};
    std::array<double, kNumFeatures> upper{};
    unsigned path_mask = 0;
    // Background mass per pass/fail pattern over the path features. Bit i of
    // the pattern is set when the row passes feature i's interval.
    std::vector<std::pair<unsigned, double>> background_patterns;
  };

  CIResult run_treepath(const FeatureVector& v, EgoAction target) const;
  CIResult run_bruteforce(const FeatureVector& v, EgoAction target) const;

  const RandomForest* forest_;
  Background background_;
  CiMethod method_;
  std::vector<std::vector<LeafInfo>> leaves_;  // per tree
};

}  // namespace commentree
