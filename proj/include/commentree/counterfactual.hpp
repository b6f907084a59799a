#pragma once

#include <bitset>
#include <optional>
#include <string>
#include <vector>

#include "commentree/factual.hpp"
#include "commentree/tree.hpp"

namespace commentree {

class Phrasebook;

/// Features that must not be altered while searching for counterfactuals.
struct ConstraintSet {
  std::bitset<kNumFeatures> immutable;

  bool contains(int feature) const { return immutable.test(static_cast<std::size_t>(feature)); }
  void add(int feature) { immutable.set(static_cast<std::size_t>(feature)); }

  static ConstraintSet from_names(const std::vector<std::string>& names);
};

/// Walks upward from the leaf v reaches and searches each ancestor's sibling
/// subtree for a leaf with a different prediction (or the desired one) whose
/// branch conditions below the ancestor — including the ancestor's own split —
/// touch no constrained feature. The first (deepest) ancestor with an
/// admissible leaf wins; among its candidates the shallowest leaf is chosen,
/// then the best-supported one, then the lowest node id.
/// Throws NoCounterfactualError when no admissible leaf exists.
int find_closest_cf_leaf(const DecisionTree& tree, const FeatureVector& v, EgoAction factual,
                         const ConstraintSet& constraints,
                         std::optional<EgoAction> desired = {});

inline int find_closest_cf_sibling(const DecisionTree& tree, const FeatureVector& v,
                                   EgoAction factual, const ConstraintSet& constraints) {
  return find_closest_cf_leaf(tree, v, factual, constraints);
}

struct LcaResult {
  int ancestor = 0;               // deepest common ancestor of the two leaves
  std::vector<PathStep> cf_steps; // ancestor down to the cf leaf; the first
                                  // step carries the factual-side comparator
                                  // and is meant to be negated by the caller
};

LcaResult lowest_common_ancestor(const DecisionTree& tree, int factual_leaf, int cf_leaf);

struct CounterfactualExplanation {
  EgoAction target_action = EgoAction::Stop;
  std::vector<Cause> conditions;
  int pivot_node = 0;  // the negated ancestor
  double entropy = 0.0;  // entropy of the factual leaf
  std::string text;
  int explaining_tree = 0;
};

/// Counterfactual for a single tree: pick the counterfactual leaf, negate the
/// branch condition at the lowest common ancestor, and merge the conditions
/// that pin the route to that leaf. Constrained features never appear in the
/// output (the input already satisfies the leaf's conditions on them).
/// Throws DesiredEqualsFactualError / NoCounterfactualError.
CounterfactualExplanation explain_counterfactual(const DecisionTree& tree, const FeatureVector& v,
                                                 EgoAction factual,
                                                 std::optional<EgoAction> desired,
                                                 const ConstraintSet& constraints,
                                                 const Phrasebook& phrasebook);

/// Forest version: the Algorithm-1 reduction picks the explaining tree first.
CounterfactualExplanation explain_counterfactual(const RandomForest& forest, const FeatureVector& v,
                                                 std::optional<EgoAction> desired,
                                                 const ConstraintSet& constraints,
                                                 const Phrasebook& phrasebook);

}  // namespace commentree
