#include "commentree/counterfactual.hpp"

#include <algorithm>

#include "commentree/decoder.hpp"
#include "commentree/errors.hpp"

namespace commentree {

ConstraintSet ConstraintSet::from_names(const std::vector<std::string>& names) {
  ConstraintSet constraints;
  for (const auto& name : names) {
    auto idx = feature_index(name);
    if (!idx) throw Error("unknown feature name '" + name + "'");
    constraints.add(*idx);
  }
  return constraints;
}

namespace {

struct Candidate {
  int leaf = -1;
  int depth = 0;
  std::int64_t support = 0;
};

bool better_candidate(const Candidate& a, const Candidate& b) {
  if (a.depth != b.depth) return a.depth < b.depth;
  if (a.support != b.support) return a.support > b.support;
  return a.leaf < b.leaf;
}

// Leaves of `subtree` matching the wanted prediction whose path from the
// subtree top stays off constrained features. Depths are measured from the
// root of the whole tree.
void collect_candidates(const DecisionTree& tree, int subtree, int depth, EgoAction factual,
                        std::optional<EgoAction> desired, const ConstraintSet& constraints,
                        std::vector<Candidate>& out) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(subtree)];
  if (node.is_leaf()) {
    const auto predicted = static_cast<EgoAction>(
        std::distance(node.class_counts.begin(),
                      std::max_element(node.class_counts.begin(), node.class_counts.end())));
    const bool wanted = desired ? predicted == *desired : predicted != factual;
    if (wanted) out.push_back({subtree, depth, node.total_count()});
    return;
  }
  if (constraints.contains(node.feature)) return;
  collect_candidates(tree, node.left, depth + 1, factual, desired, constraints, out);
  collect_candidates(tree, node.right, depth + 1, factual, desired, constraints, out);
}

std::vector<int> path_to_root(const DecisionTree& tree, int leaf) {
  auto parent = tree.parents();
  std::vector<int> path = {leaf};
  while (parent[static_cast<std::size_t>(path.back())] >= 0) {
    path.push_back(parent[static_cast<std::size_t>(path.back())]);
  }
  return path;  // leaf first, root last
}

}  // namespace

int find_closest_cf_leaf(const DecisionTree& tree, const FeatureVector& v, EgoAction factual,
                         const ConstraintSet& constraints, std::optional<EgoAction> desired) {
  if (tree.leaf_count() < 2) {
    throw NoCounterfactualError("the tree has a single leaf; no alternative outcome exists");
  }
  const int factual_leaf = tree.leaf_for(v);
  auto upward = path_to_root(tree, factual_leaf);

  // upward[i] is below upward[i+1]; examine each ancestor's other child.
  for (std::size_t i = 0; i + 1 < upward.size(); ++i) {
    const int ancestor = upward[i + 1];
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(ancestor)];
    if (constraints.contains(node.feature)) continue;
    const int sibling = node.left == upward[i] ? node.right : node.left;

    std::vector<Candidate> candidates;
    collect_candidates(tree, sibling, tree.depth_of(sibling), factual, desired, constraints,
                       candidates);
    if (candidates.empty()) continue;
    Candidate best = candidates.front();
    for (const auto& candidate : candidates) {
      if (better_candidate(candidate, best)) best = candidate;
    }
    return best.leaf;
  }
  throw NoCounterfactualError(
      desired ? "no admissible leaf predicts " + std::string(to_string(*desired)) +
                    " under the given constraints"
              : "every alternative outcome requires changing a constrained feature");
}

LcaResult lowest_common_ancestor(const DecisionTree& tree, int factual_leaf, int cf_leaf) {
  if (factual_leaf == cf_leaf) return {factual_leaf, {}};

  auto factual_up = path_to_root(tree, factual_leaf);
  auto cf_up = path_to_root(tree, cf_leaf);
  std::vector<bool> on_factual(tree.nodes.size(), false);
  for (int id : factual_up) on_factual[static_cast<std::size_t>(id)] = true;

  int ancestor = cf_leaf;
  for (int id : cf_up) {
    if (on_factual[static_cast<std::size_t>(id)]) {
      ancestor = id;
      break;
    }
  }

  // Downward chain ancestor -> cf leaf.
  std::vector<int> chain;
  for (int id : cf_up) {
    chain.push_back(id);
    if (id == ancestor) break;
  }
  std::reverse(chain.begin(), chain.end());

  LcaResult result;
  result.ancestor = ancestor;
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(chain[i])];
    bool toward_left = node.left == chain[i + 1];
    if (i == 0) toward_left = !toward_left;  // report the factual side at the ancestor
    result.cf_steps.push_back(
        {chain[i], node.feature, toward_left ? Comparator::LE : Comparator::GT, node.threshold});
  }
  return result;
}

namespace {

CounterfactualExplanation counterfactual_on_tree(const DecisionTree& tree, const FeatureVector& v,
                                                 EgoAction factual, std::optional<EgoAction> desired,
                                                 const ConstraintSet& constraints, int tree_index,
                                                 const Phrasebook& phrasebook) {
  if (desired && *desired == factual) {
    throw DesiredEqualsFactualError("desired action equals the predicted action (" +
                                    std::string(to_string(factual)) + ")");
  }
  const int factual_leaf = tree.leaf_for(v);
  const int cf_leaf = find_closest_cf_leaf(tree, v, factual, constraints, desired);
  LcaResult lca = lowest_common_ancestor(tree, factual_leaf, cf_leaf);

  // Negate the branch condition at the ancestor, turning the factual-side
  // step into the one that routes toward the counterfactual leaf.
  lca.cf_steps.front().comparator =
      lca.cf_steps.front().comparator == Comparator::LE ? Comparator::GT : Comparator::LE;

  // Conditions that pin the route: the shared prefix above the ancestor plus
  // the counterfactual branch. Constrained features are dropped afterwards —
  // v already satisfies the leaf's conditions on them, so no change is asked.
  std::vector<PathStep> full_steps;
  for (const auto& step : tree.decision_path(v).steps) {
    if (step.node_id == lca.ancestor) break;
    full_steps.push_back(step);
  }
  full_steps.insert(full_steps.end(), lca.cf_steps.begin(), lca.cf_steps.end());

  CounterfactualExplanation explanation;
  explanation.explaining_tree = tree_index;
  explanation.pivot_node = lca.ancestor;
  explanation.target_action = static_cast<EgoAction>(std::distance(
      tree.nodes[static_cast<std::size_t>(cf_leaf)].class_counts.begin(),
      std::max_element(tree.nodes[static_cast<std::size_t>(cf_leaf)].class_counts.begin(),
                       tree.nodes[static_cast<std::size_t>(cf_leaf)].class_counts.end())));
  for (auto& cause : merge_inequalities(full_steps)) {
    if (!constraints.contains(cause.feature)) explanation.conditions.push_back(std::move(cause));
  }
  explanation.entropy = tree.leaf_entropy(v);
  explanation.text = phrasebook.decode_counterfactual(explanation.target_action, explanation.conditions);
  return explanation;
}

}  // namespace

CounterfactualExplanation explain_counterfactual(const DecisionTree& tree, const FeatureVector& v,
                                                 EgoAction factual, std::optional<EgoAction> desired,
                                                 const ConstraintSet& constraints,
                                                 const Phrasebook& phrasebook) {
  return counterfactual_on_tree(tree, v, factual, desired, constraints, 0, phrasebook);
}

CounterfactualExplanation explain_counterfactual(const RandomForest& forest, const FeatureVector& v,
                                                 std::optional<EgoAction> desired,
                                                 const ConstraintSet& constraints,
                                                 const Phrasebook& phrasebook) {
  const EgoAction factual = forest.predict(v);
  const int tree_index = reduce_to_explaining_tree(forest, v);
  return counterfactual_on_tree(forest.trees[static_cast<std::size_t>(tree_index)], v, factual,
                                desired, constraints, tree_index, phrasebook);
}

}  // namespace commentree
