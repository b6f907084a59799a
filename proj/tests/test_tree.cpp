#include <doctest.h>

#include <cmath>

#include "commentree/model_io.hpp"
#include "commentree/synthetic.hpp"
#include "commentree/tree.hpp"
#include "support.hpp"

using namespace commentree;
using namespace commentree::test;

namespace {

Dataset oracle_dataset(std::size_t size, std::uint64_t seed, double noise = 0.0) {
  SyntheticConfig config;
  config.size = size;
  config.label_noise = noise;
  auto frames = generate_synthetic(config, seed);
  const Codebook& cb = Codebook::defaults();
  Dataset dataset;
  for (const auto& frame : frames) {
    dataset.push_back({encode_frame(frame, cb), frame.ego_action, frame.ground_truth_explanation});
  }
  return dataset;
}

}  // namespace

TEST_CASE("a single-class dataset collapses to one leaf") {
  Dataset dataset;
  for (int i = 0; i < 10; ++i) {
    dataset.push_back({fv(i, 0, 0, 0, 1), EgoAction::Move, ""});
  }
  DecisionTree tree = fit_tree(dataset, {});
  CHECK(tree.nodes.size() == 1);
  CHECK(tree.predict(fv(3, 0, 0, 0, 1)) == EgoAction::Move);
  CHECK(tree.leaf_entropy(fv(3, 0, 0, 0, 1)) == 0.0);
}

TEST_CASE("a separable toy set is fit to training accuracy 1.0") {
  // stop iff TL is red, else move iff ego lane free, else rlc.
  Dataset dataset;
  for (int tl : {0, 21}) {
    for (int ego : {0, 14}) {
      for (int rep = 0; rep < 3; ++rep) {
        EgoAction label = tl == 21 ? EgoAction::Stop
                          : ego == 0 ? EgoAction::Move
                                     : EgoAction::RightLaneChange;
        dataset.push_back({fv(ego, 0, 0, tl, 1), label, ""});
      }
    }
  }
  DecisionTree tree = fit_tree(dataset, {});
  tree.validate();
  for (const auto& row : dataset) CHECK(tree.predict(row.features) == row.label);
}

TEST_CASE("fitting an empty dataset fails") {
  CHECK_THROWS_AS(fit_tree({}, {}), EmptyDatasetError);
  CHECK_THROWS_AS(fit_forest({}, {}), EmptyDatasetError);
}

TEST_CASE("trained trees keep count consistency at every internal node") {
  Dataset dataset = oracle_dataset(400, 9);
  TreeParams params;
  params.max_depth = 8;
  DecisionTree tree = fit_tree(dataset, params);
  tree.validate();  // includes the children-sum check
  CHECK(tree.leaf_count() >= 2);
}

TEST_CASE("single-leaf predictions expose the leaf distribution") {
  DecisionTree tree = make_tree({leaf({10, 0, 0, 0})});
  CHECK(tree.predict(fv(0, 0, 0, 0, 0)) == EgoAction::Stop);
  auto proba = tree.predict_proba(fv(0, 0, 0, 0, 0));
  CHECK(proba[0] == 1.0);
  CHECK(proba[1] == 0.0);
}

TEST_CASE("a stump routes red lights to the stop side") {
  const Codebook& cb = Codebook::defaults();
  const double threshold = 19.5;  // green vs amber/red
  DecisionTree stump = make_tree({
      split(kTl, threshold, 1, 2),
      leaf({0, 20, 0, 0}),  // tl <= 19.5: move
      leaf({30, 0, 0, 0}),  // tl > 19.5: stop
  });
  CHECK(stump.predict(fv(0, 0, 0, cb.code(AgentClass::TrafficLight, AgentAction::Red), 1)) ==
        EgoAction::Stop);
  CHECK(stump.predict(fv(0, 0, 0, cb.code(AgentClass::TrafficLight, AgentAction::Green), 1)) ==
        EgoAction::Move);
}

TEST_CASE("forest prediction is the majority vote with ties to the lowest class") {
  DecisionTree stop_tree = make_tree({leaf({10, 0, 0, 0})});
  DecisionTree move_tree = make_tree({leaf({0, 10, 0, 0})});
  RandomForest forest = make_forest({stop_tree, stop_tree, move_tree});
  CHECK(forest.predict(fv(0, 0, 0, 0, 0)) == EgoAction::Stop);

  RandomForest tie = make_forest({move_tree, stop_tree});
  CHECK(tie.predict(fv(0, 0, 0, 0, 0)) == EgoAction::Stop);  // tie -> lowest class index

  auto proba = forest.predict_proba(fv(0, 0, 0, 0, 0));
  CHECK(proba[0] == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(proba[1] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  double sum = 0.0;
  for (double p : proba) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("decision paths list exactly the satisfied conditions") {
  DecisionTree single = make_tree({leaf({5, 0, 0, 0})});
  auto empty_path = single.decision_path(fv(1, 2, 3, 0, 0));
  CHECK(empty_path.steps.empty());
  CHECK(empty_path.leaf_id == single.root);

  DecisionTree depth2 = make_tree({
      split(kEgoLane, 0.5, 1, 2),
      leaf({8, 0, 0, 0}),
      split(kTl, 19.5, 3, 4),
      leaf({0, 9, 0, 0}),
      leaf({7, 0, 0, 0}),
  });
  auto path = depth2.decision_path(fv(14, 0, 0, 21, 1));  // left? no: ego 14 > 0.5, tl 21 > 19.5
  REQUIRE(path.steps.size() == 2);
  CHECK(path.steps[0].comparator == Comparator::GT);
  CHECK(path.steps[1].comparator == Comparator::GT);

  auto lr = depth2.decision_path(fv(14, 0, 0, 19, 1));
  REQUIRE(lr.steps.size() == 2);
  CHECK(lr.steps[0].comparator == Comparator::GT);
  CHECK(lr.steps[1].comparator == Comparator::LE);
  CHECK(lr.predicted == EgoAction::Move);
}

TEST_CASE("every decision path condition is satisfied by its input") {
  Dataset dataset = oracle_dataset(300, 17);
  ForestParams params;
  params.n_trees = 10;
  params.seed = 4;
  RandomForest forest = fit_forest(dataset, params);
  Rng rng(23);
  for (int round = 0; round < 100; ++round) {
    FeatureVector v = random_input(rng);
    for (const auto& tree : forest.trees) {
      auto path = tree.decision_path(v);
      for (const auto& step : path.steps) CHECK(step.satisfied_by(v));
      CHECK(path.leaf_id == tree.leaf_for(v));
    }
  }
}

TEST_CASE("mode trees are exactly those voting with the majority") {
  DecisionTree stop_tree = make_tree({leaf({10, 0, 0, 0})});
  DecisionTree move_tree = make_tree({leaf({0, 10, 0, 0})});
  RandomForest forest = make_forest({stop_tree, stop_tree, stop_tree, move_tree, move_tree});
  auto mode = obtain_mode_trees(forest, fv(0, 0, 0, 0, 0));
  CHECK(mode == std::vector<int>{0, 1, 2});

  RandomForest agreeing = make_forest({stop_tree, stop_tree});
  CHECK(obtain_mode_trees(agreeing, fv(0, 0, 0, 0, 0)).size() == 2);

  RandomForest single = make_forest({move_tree});
  CHECK(obtain_mode_trees(single, fv(0, 0, 0, 0, 0)) == std::vector<int>{0});
}

TEST_CASE("factoring picks the tree with the most re-occurring path features") {
  // Two trees split on TL, one on EgoLane; all predict stop for the input.
  DecisionTree tl_tree = make_tree({
      split(kTl, 19.5, 1, 2),
      leaf({0, 10, 0, 0}),
      leaf({10, 0, 0, 0}),
  });
  DecisionTree ego_tree = make_tree({
      split(kEgoLane, 0.5, 1, 2),
      leaf({0, 10, 0, 0}),
      leaf({10, 0, 0, 0}),
  });
  RandomForest forest = make_forest({ego_tree, tl_tree, tl_tree});
  FeatureVector v = fv(14, 0, 0, 21, 1);

  auto mode = obtain_mode_trees(forest, v);
  REQUIRE(mode.size() == 3);
  std::vector<DecisionPath> paths;
  for (int t : mode) paths.push_back(forest.trees[static_cast<std::size_t>(t)].decision_path(v));
  // TL appears twice across the paths, EgoLane once; the first TL tree wins.
  CHECK(obtain_tree_by_factoring_paths(forest, mode, paths) == 1);

  // One tree: that tree.
  RandomForest one = make_forest({ego_tree});
  auto mode1 = obtain_mode_trees(one, v);
  std::vector<DecisionPath> paths1 = {one.trees[0].decision_path(v)};
  CHECK(obtain_tree_by_factoring_paths(one, mode1, paths1) == 0);

  // All paths identical: the lowest tree index wins.
  RandomForest same = make_forest({tl_tree, tl_tree, tl_tree});
  auto mode_same = obtain_mode_trees(same, v);
  std::vector<DecisionPath> paths_same;
  for (int t : mode_same) paths_same.push_back(same.trees[static_cast<std::size_t>(t)].decision_path(v));
  CHECK(obtain_tree_by_factoring_paths(same, mode_same, paths_same) == 0);
}

TEST_CASE("factoring scores distinct path features by global frequency") {
  DecisionTree deep = make_tree({
      split(kEgoLane, 0.5, 1, 2),
      leaf({0, 10, 0, 0}),
      split(kTl, 19.5, 3, 4),
      leaf({0, 10, 0, 0}),
      leaf({10, 0, 0, 0}),
  });
  DecisionTree stump = make_tree({
      split(kTl, 19.5, 1, 2),
      leaf({0, 10, 0, 0}),
      leaf({10, 0, 0, 0}),
  });
  FeatureVector v = fv(14, 0, 0, 21, 1);
  RandomForest forest = make_forest({deep, stump});
  auto mode = obtain_mode_trees(forest, v);
  REQUIRE(mode.size() == 2);
  std::vector<DecisionPath> paths;
  for (int t : mode) paths.push_back(forest.trees[static_cast<std::size_t>(t)].decision_path(v));
  // deep covers {EgoLane, TL} scoring 1 + 2 = 3; the stump covers {TL} scoring 2.
  CHECK(obtain_tree_by_factoring_paths(forest, mode, paths) == 0);
}

TEST_CASE("median tree selection works on regression forests only") {
  auto reg_leaf = [](double value) {
    TreeNode node;
    node.leaf_value = value;
    return node;
  };
  RandomForest regression;
  regression.kind = TreeKind::Regression;
  for (double value : {1.0, 2.0, 9.0}) {
    DecisionTree tree;
    tree.kind = TreeKind::Regression;
    tree.nodes = {reg_leaf(value)};
    regression.trees.push_back(tree);
  }
  CHECK(obtain_median_tree(regression, fv(0, 0, 0, 0, 0)) == 1);  // median of {1,2,9} is 2

  RandomForest single;
  single.kind = TreeKind::Regression;
  single.trees = {regression.trees[2]};
  CHECK(obtain_median_tree(single, fv(0, 0, 0, 0, 0)) == 0);

  RandomForest classifier = make_forest({make_tree({leaf({1, 0, 0, 0})})});
  CHECK_THROWS_AS(obtain_median_tree(classifier, fv(0, 0, 0, 0, 0)), NotRegressionError);
}

TEST_CASE("leaf entropy matches direct evaluation and stays within [0, 2]") {
  DecisionTree pure = make_tree({leaf({20, 0, 0, 0})});
  CHECK(pure.leaf_entropy(fv(0, 0, 0, 0, 0)) == 0.0);

  DecisionTree even = make_tree({leaf({1, 1, 0, 0})});
  CHECK(even.leaf_entropy(fv(0, 0, 0, 0, 0)) == doctest::Approx(1.0).epsilon(1e-12));

  DecisionTree skew = make_tree({leaf({3, 1, 0, 0})});
  CHECK(skew.leaf_entropy(fv(0, 0, 0, 0, 0)) == doctest::Approx(0.8113).epsilon(1e-4));

  DecisionTree uniform = make_tree({leaf({5, 5, 5, 5})});
  CHECK(uniform.leaf_entropy(fv(0, 0, 0, 0, 0)) == doctest::Approx(2.0).epsilon(1e-12));

  Dataset dataset = oracle_dataset(500, 21, 0.3);
  ForestParams params;
  params.n_trees = 5;
  RandomForest forest = fit_forest(dataset, params);
  Rng rng(8);
  for (int round = 0; round < 50; ++round) {
    FeatureVector v = random_input(rng);
    for (const auto& tree : forest.trees) {
      const double entropy = tree.leaf_entropy(v);
      CHECK(entropy >= 0.0);
      CHECK(entropy <= 2.0);
    }
  }
}

TEST_CASE("a one-tree forest without bootstrap matches the bare tree") {
  Dataset dataset = oracle_dataset(400, 13);
  ForestParams params;
  params.n_trees = 1;
  params.bootstrap = false;
  params.features_per_split = 0;  // all features
  params.max_depth = 10;
  params.seed = 99;
  RandomForest forest = fit_forest(dataset, params);

  TreeParams tree_params;
  tree_params.max_depth = 10;
  tree_params.features_per_split = 0;
  tree_params.seed = 123;  // rng unused when all features are considered
  DecisionTree tree = fit_tree(dataset, tree_params);

  Rng rng(31);
  for (int round = 0; round < 300; ++round) {
    FeatureVector v = random_input(rng);
    CHECK(forest.predict(v) == tree.predict(v));
    CHECK(forest.trees[0].leaf_for(v) == tree.leaf_for(v));
  }
}

TEST_CASE("forests reach high accuracy on noiseless oracle data") {
  Dataset dataset = oracle_dataset(1200, 5);
  auto [train, test] = split_dataset(dataset, 0.2, 5);
  ForestParams params;
  params.n_trees = 60;
  params.seed = 5;
  RandomForest forest = fit_forest(train, params);
  CHECK(accuracy_on(forest, test) >= 0.95);
}

TEST_CASE("identical seeds give structurally identical forests") {
  Dataset dataset = oracle_dataset(300, 2);
  ForestParams params;
  params.n_trees = 8;
  params.seed = 77;
  RandomForest a = fit_forest(dataset, params);
  RandomForest b = fit_forest(dataset, params);
  CHECK(model_to_json({a, {}}) == model_to_json({b, {}}));

  params.seed = 78;
  RandomForest c = fit_forest(dataset, params);
  CHECK(model_to_json({a, {}}) != model_to_json({c, {}}));
}

TEST_CASE("cross-validation covers every row once per fold split") {
  Dataset dataset = oracle_dataset(200, 6);
  ForestParams base;
  base.n_trees = 5;
  const std::vector<CvCandidate> grid = {{6, 1}, {10, 1}};
  CvReport report = cross_validate(dataset, base, grid, 5, 3);
  REQUIRE(report.results.size() == 2);
  for (const auto& result : report.results) {
    CHECK(result.fold_accuracy.size() == 5);
    for (double a : result.fold_accuracy) {
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
    }
    CHECK(result.mean_accuracy > 0.5);
  }
  CHECK(report.best < report.results.size());
}
