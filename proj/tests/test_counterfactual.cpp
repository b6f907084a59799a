#include <doctest.h>

#include <algorithm>

#include "commentree/decoder.hpp"
#include "commentree/explainer.hpp"
#include "commentree/synthetic.hpp"
#include "support.hpp"

using namespace commentree;
using namespace commentree::test;

namespace {

Dataset oracle_dataset(std::size_t size, std::uint64_t seed) {
  SyntheticConfig config;
  config.size = size;
  auto frames = generate_synthetic(config, seed);
  const Codebook& cb = Codebook::defaults();
  Dataset dataset;
  for (const auto& frame : frames) {
    dataset.push_back({encode_frame(frame, cb), frame.ego_action, frame.ground_truth_explanation});
  }
  return dataset;
}

// Every grid completion that satisfies `conditions`, with constrained
// features pinned to v, must land on a leaf predicting `target`.
void check_validity(const DecisionTree& tree, const FeatureVector& v,
                    const std::vector<Cause>& conditions, const ConstraintSet& constraints,
                    EgoAction target) {
  static const auto domains = feature_domains(Codebook::defaults());
  std::vector<std::vector<int>> allowed(kNumFeatures);
  for (int f = 0; f < kNumFeatures; ++f) {
    if (constraints.contains(f)) {
      allowed[static_cast<std::size_t>(f)] = {v[f]};
      continue;
    }
    const auto it = std::find_if(conditions.begin(), conditions.end(),
                                 [&](const Cause& c) { return c.feature == f; });
    for (int code : domains[static_cast<std::size_t>(f)]) {
      if (it == conditions.end()) {
        allowed[static_cast<std::size_t>(f)].push_back(code);
      } else if (static_cast<double>(code) > it->lower_bound &&
                 static_cast<double>(code) <= it->upper_bound) {
        allowed[static_cast<std::size_t>(f)].push_back(code);
      }
    }
    REQUIRE_FALSE(allowed[static_cast<std::size_t>(f)].empty());
  }
  std::size_t combos = 1;
  for (const auto& options : allowed) combos *= options.size();
  for (std::size_t n = 0; n < combos; ++n) {
    FeatureVector candidate;
    std::size_t rest = n;
    for (int f = 0; f < kNumFeatures; ++f) {
      const auto& options = allowed[static_cast<std::size_t>(f)];
      candidate[f] = options[rest % options.size()];
      rest /= options.size();
    }
    REQUIRE(tree.predict(candidate) == target);
  }
}

}  // namespace

TEST_CASE("a constrained sibling forces the search one level up") {
  // Root splits on TL; its left child (the factual side) splits on EgoPlan,
  // which is constrained. The factual leaf's direct sibling sits under the
  // constrained split, so the admissible counterfactual is the leaf on the
  // other side of the root.
  DecisionTree tree = make_tree({
      split(kTl, 19.5, 1, 4),
      split(kEgoPlan, 0.5, 2, 3),
      leaf({2, 18, 0, 0}),   // factual: move
      leaf({15, 5, 0, 0}),   // sibling under the constrained node: stop
      leaf({20, 0, 0, 0}),   // one level up: stop
  });
  FeatureVector v = fv(1, 0, 0, 19, 0);  // routes left-left to the move leaf
  REQUIRE(tree.leaf_for(v) == 2);

  ConstraintSet none;
  CHECK(find_closest_cf_sibling(tree, v, EgoAction::Move, none) == 3);

  ConstraintSet plan_fixed;
  plan_fixed.add(kEgoPlan);
  const int chosen = find_closest_cf_sibling(tree, v, EgoAction::Move, plan_fixed);
  CHECK(chosen == 4);

  auto lca = lowest_common_ancestor(tree, tree.leaf_for(v), chosen);
  CHECK(lca.ancestor == 0);  // moved a level up to the root
}

TEST_CASE("an unconstrained depth-1 tree offers the other leaf") {
  DecisionTree stump = make_tree({
      split(kTl, 19.5, 1, 2),
      leaf({0, 10, 0, 0}),
      leaf({10, 0, 0, 0}),
  });
  ConstraintSet none;
  CHECK(find_closest_cf_sibling(stump, fv(0, 0, 0, 21, 1), EgoAction::Stop, none) == 1);
  CHECK(find_closest_cf_sibling(stump, fv(0, 0, 0, 19, 1), EgoAction::Move, none) == 2);
}

TEST_CASE("fully constrained alternatives yield NoCounterfactual") {
  DecisionTree tree = make_tree({
      split(kEgoPlan, 0.5, 1, 2),
      leaf({10, 0, 0, 0}),
      leaf({0, 10, 0, 0}),
  });
  ConstraintSet plan_fixed;
  plan_fixed.add(kEgoPlan);
  CHECK_THROWS_AS(
      find_closest_cf_sibling(tree, fv(0, 0, 0, 0, 0), EgoAction::Stop, plan_fixed),
      NoCounterfactualError);

  DecisionTree single = make_tree({leaf({5, 0, 0, 0})});
  ConstraintSet none;
  CHECK_THROWS_AS(find_closest_cf_sibling(single, fv(0, 0, 0, 0, 0), EgoAction::Stop, none),
                  NoCounterfactualError);
}

TEST_CASE("candidates under one ancestor prefer shallow, well-supported leaves") {
  DecisionTree tree = make_tree({
      split(kTl, 19.5, 1, 2),
      leaf({0, 30, 0, 0}),          // factual side: move
      split(kEgoLane, 0.5, 3, 4),   // counterfactual side
      leaf({12, 0, 0, 0}),          // depth 2, stop
      split(kIncomLane, 0.5, 5, 6),
      leaf({9, 0, 0, 0}),           // depth 3, stop
      leaf({0, 0, 40, 0}),          // depth 3, rlc
  });
  ConstraintSet none;
  FeatureVector v = fv(0, 0, 0, 19, 1);
  // All three right-side leaves differ from the factual move; depth 2 wins.
  CHECK(find_closest_cf_sibling(tree, v, EgoAction::Move, none) == 3);
}

TEST_CASE("lowest common ancestor of siblings is their parent, with a hand-checked path") {
  DecisionTree tree = make_tree({
      split(kEgoLane, 0.5, 1, 2),        // 0
      leaf({0, 10, 0, 0}),               // 1
      split(kTl, 9.5, 3, 4),             // 2
      leaf({10, 0, 0, 0}),               // 3
      split(kTl, 19.5, 5, 6),            // 4
      leaf({0, 8, 0, 0}),                // 5
      leaf({7, 0, 0, 0}),                // 6
  });

  auto siblings = lowest_common_ancestor(tree, 5, 6);
  CHECK(siblings.ancestor == 4);
  REQUIRE(siblings.cf_steps.size() == 1);
  // The first step reports the factual side (leaf 5 sits left: LE).
  CHECK(siblings.cf_steps[0].node_id == 4);
  CHECK(siblings.cf_steps[0].comparator == Comparator::LE);

  auto across = lowest_common_ancestor(tree, 1, 6);
  CHECK(across.ancestor == 0);
  REQUIRE(across.cf_steps.size() == 3);
  CHECK(across.cf_steps[0].node_id == 0);
  CHECK(across.cf_steps[0].comparator == Comparator::LE);  // factual side of the root
  CHECK(across.cf_steps[1].node_id == 2);
  CHECK(across.cf_steps[1].comparator == Comparator::GT);
  CHECK(across.cf_steps[2].node_id == 4);
  CHECK(across.cf_steps[2].comparator == Comparator::GT);

  auto degenerate = lowest_common_ancestor(tree, 5, 5);
  CHECK(degenerate.ancestor == 5);
  CHECK(degenerate.cf_steps.empty());
}

TEST_CASE("a desired action equal to the prediction is rejected") {
  DecisionTree stump = make_tree({
      split(kTl, 19.5, 1, 2),
      leaf({0, 10, 0, 0}),
      leaf({10, 0, 0, 0}),
  });
  ConstraintSet none;
  CHECK_THROWS_AS(explain_counterfactual(stump, fv(0, 0, 0, 21, 1), EgoAction::Stop,
                                         EgoAction::Stop, none, Phrasebook::defaults()),
                  DesiredEqualsFactualError);
}

TEST_CASE("the stop-at-red scene yields the green-light move counterfactual") {
  // Left of the root the ego lane is free; a TL subtree distinguishes absent,
  // green and amber/red lights. V carries a stopped vehicle and a red light.
  DecisionTree tree = make_tree({
      split(kEgoLane, 0.5, 1, 6),   // 0
      split(kTl, 9.5, 2, 3),        // 1: free lane
      leaf({3, 1, 0, 0}),           // 2: no light -> stop (give way)
      split(kTl, 19.5, 4, 5),       // 3
      leaf({0, 25, 0, 0}),          // 4: green -> move
      leaf({12, 0, 0, 0}),          // 5: amber/red -> stop
      leaf({40, 2, 0, 0}),          // 6: blocked lane -> stop
  });
  RandomForest forest = make_forest({tree});
  FeatureVector v = fv(14, 0, 0, 21, 1);
  REQUIRE(tree.predict(v) == EgoAction::Stop);

  ConstraintSet plan_fixed;
  plan_fixed.add(kEgoPlan);
  CounterfactualExplanation explanation = explain_counterfactual(
      forest, v, EgoAction::Move, plan_fixed, Phrasebook::defaults());

  CHECK(explanation.target_action == EgoAction::Move);
  REQUIRE(explanation.conditions.size() == 2);
  CHECK(explanation.conditions[0].feature == kEgoLane);
  CHECK(explanation.conditions[0].upper_bound == 0.5);
  CHECK(explanation.conditions[1].feature == kTl);
  CHECK(explanation.conditions[1].lower_bound == 9.5);
  CHECK(explanation.conditions[1].upper_bound == 19.5);
  CHECK(explanation.text ==
        "If ego must move straight, the following should be happening: road is free on ego's "
        "lane; the traffic light is green on ego's lane");
  CHECK(explanation.entropy == doctest::Approx(tree.leaf_entropy(v)).epsilon(1e-12));
  CHECK(explanation.pivot_node == 0);

  check_validity(tree, v, explanation.conditions, plan_fixed, EgoAction::Move);
}

TEST_CASE("counterfactuals on trained forests are valid and respect constraints") {
  Dataset dataset = oracle_dataset(900, 51);
  auto [train, test] = split_dataset(dataset, 0.2, 51);
  ForestParams params;
  params.n_trees = 25;
  params.seed = 51;
  RandomForest forest = fit_forest(train, params);
  ConstraintSet plan_fixed;
  plan_fixed.add(kEgoPlan);

  int emitted = 0;
  for (std::size_t i = 0; i < std::min<std::size_t>(test.size(), 80); ++i) {
    const FeatureVector& v = test[i].features;
    CounterfactualExplanation explanation;
    try {
      explanation = explain_counterfactual(forest, v, {}, plan_fixed, Phrasebook::defaults());
    } catch (const NoCounterfactualError&) {
      continue;
    }
    ++emitted;
    CHECK(explanation.target_action != forest.predict(v));
    for (const auto& condition : explanation.conditions) {
      CHECK(condition.feature != kEgoPlan);
    }
    const DecisionTree& tree =
        forest.trees[static_cast<std::size_t>(explanation.explaining_tree)];
    check_validity(tree, v, explanation.conditions, plan_fixed, explanation.target_action);

    // Determinism.
    CounterfactualExplanation again =
        explain_counterfactual(forest, v, {}, plan_fixed, Phrasebook::defaults());
    CHECK(again.text == explanation.text);
    CHECK(again.pivot_node == explanation.pivot_node);
  }
  CHECK(emitted > 0);
}

namespace {

// Independent re-check of the search contract: a subtree offers an admissible
// leaf when some leaf below it predicts something other than `factual` and no
// split on the way down touches a constrained feature.
bool subtree_has_admissible_leaf(const DecisionTree& tree, int node, EgoAction factual,
                                 const ConstraintSet& constraints) {
  const TreeNode& n = tree.nodes[static_cast<std::size_t>(node)];
  if (n.is_leaf()) {
    const auto predicted = static_cast<EgoAction>(std::distance(
        n.class_counts.begin(), std::max_element(n.class_counts.begin(), n.class_counts.end())));
    return predicted != factual;
  }
  if (constraints.contains(n.feature)) return false;
  return subtree_has_admissible_leaf(tree, n.left, factual, constraints) ||
         subtree_has_admissible_leaf(tree, n.right, factual, constraints);
}

}  // namespace

TEST_CASE("no admissible leaf exists below the chosen pivot") {
  Dataset dataset = oracle_dataset(600, 81);
  TreeParams params;
  params.max_depth = 7;
  params.seed = 81;
  DecisionTree tree = fit_tree(dataset, params);
  ConstraintSet constraints;
  constraints.add(kEgoPlan);

  Rng rng(82);
  int audited = 0;
  for (int round = 0; round < 60; ++round) {
    FeatureVector v = random_input(rng);
    const EgoAction factual = tree.predict(v);
    CounterfactualExplanation explanation;
    try {
      explanation =
          explain_counterfactual(tree, v, factual, {}, constraints, Phrasebook::defaults());
    } catch (const NoCounterfactualError&) {
      continue;
    }
    ++audited;

    // Scan every ancestor strictly deeper than the pivot: none may offer an
    // admissible counterfactual through its sibling.
    auto parent = tree.parents();
    int node = tree.leaf_for(v);
    while (parent[static_cast<std::size_t>(node)] >= 0 &&
           parent[static_cast<std::size_t>(node)] != explanation.pivot_node) {
      const int ancestor = parent[static_cast<std::size_t>(node)];
      const TreeNode& a = tree.nodes[static_cast<std::size_t>(ancestor)];
      const int sibling = a.left == node ? a.right : a.left;
      const bool blocked = constraints.contains(a.feature) ||
                           !subtree_has_admissible_leaf(tree, sibling, factual, constraints);
      CHECK(blocked);
      node = ancestor;
    }
    CHECK(parent[static_cast<std::size_t>(node)] == explanation.pivot_node);
  }
  CHECK(audited > 10);
}

TEST_CASE("a desired class restricts the upward search to that class") {
  Dataset dataset = oracle_dataset(600, 61);
  ForestParams params;
  params.n_trees = 15;
  params.seed = 61;
  RandomForest forest = fit_forest(dataset, params);
  ConstraintSet none;

  const Codebook& cb = Codebook::defaults();
  FeatureVector moving = fv(cb.code(AgentClass::Vehicle, AgentAction::Moving), 0, 0, 0, 1);
  REQUIRE(forest.predict(moving) == EgoAction::Move);

  CounterfactualExplanation to_stop =
      explain_counterfactual(forest, moving, EgoAction::Stop, none, Phrasebook::defaults());
  CHECK(to_stop.target_action == EgoAction::Stop);
  const DecisionTree& tree = forest.trees[static_cast<std::size_t>(to_stop.explaining_tree)];
  check_validity(tree, moving, to_stop.conditions, none, EgoAction::Stop);
}

TEST_CASE("constrained features the input already satisfies stay satisfied") {
  // The cf leaf's own path may cross constrained features only above the
  // pivot, where v's values already satisfy the conditions.
  Dataset dataset = oracle_dataset(700, 71);
  ForestParams params;
  params.n_trees = 10;
  params.seed = 71;
  RandomForest forest = fit_forest(dataset, params);
  ConstraintSet constrained;
  constrained.add(kEgoPlan);
  constrained.add(kIncomLane);

  Rng rng(72);
  for (int round = 0; round < 40; ++round) {
    FeatureVector v = random_input(rng);
    try {
      CounterfactualExplanation explanation =
          explain_counterfactual(forest, v, {}, constrained, Phrasebook::defaults());
      for (const auto& condition : explanation.conditions) {
        CHECK_FALSE(constrained.contains(condition.feature));
      }
      const DecisionTree& tree =
          forest.trees[static_cast<std::size_t>(explanation.explaining_tree)];
      check_validity(tree, v, explanation.conditions, constrained, explanation.target_action);
    } catch (const NoCounterfactualError&) {
      // a legitimate outcome under constraints
    }
  }
}
