#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "commentree/explainer.hpp"
#include "commentree/metrics.hpp"
#include "commentree/model_io.hpp"
#include "commentree/synthetic.hpp"

namespace {

using namespace commentree;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

const Codebook& codebook_from(const std::string& path) {
  if (path.empty()) return Codebook::defaults();
  static Codebook loaded = Codebook::load(path);
  return loaded;
}

const Phrasebook& phrasebook_from(const std::string& path) {
  std::string resolved = path;
  if (resolved.empty()) {
    if (const char* env = std::getenv("COMMENTREE_PHRASEBOOK")) resolved = env;
  }
  if (resolved.empty()) return Phrasebook::defaults();
  static Phrasebook loaded = Phrasebook::load_file(resolved);
  return loaded;
}

json cause_to_json(const Cause& cause) {
  json j;
  j["feature"] = feature_names()[static_cast<std::size_t>(cause.feature)];
  if (std::isfinite(cause.lower_bound)) j["lower"] = cause.lower_bound;
  else j["lower"] = nullptr;
  if (std::isfinite(cause.upper_bound)) j["upper"] = cause.upper_bound;
  else j["upper"] = nullptr;
  if (cause.ci) j["ci"] = *cause.ci;
  return j;
}

std::string interval_text(const Cause& cause) {
  std::ostringstream out;
  out << feature_names()[static_cast<std::size_t>(cause.feature)] << " in (";
  if (std::isfinite(cause.lower_bound)) out << cause.lower_bound;
  else out << "-inf";
  out << ", ";
  if (std::isfinite(cause.upper_bound)) out << cause.upper_bound;
  else out << "inf";
  out << "]";
  return out.str();
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string out;
  std::size_t size = 2755;
  std::uint64_t seed = 7;
  double noise = 0.0;
  std::vector<double> weights = {800, 900, 483, 572};
  int lookahead = -1;  // < 0: keep the per-frame plans the sketches assigned
};

int cmd_generate(const GenerateArgs& args) {
  SyntheticConfig config;
  config.size = args.size;
  config.label_noise = args.noise;
  if (args.weights.size() != kNumEgoActions) {
    throw InvalidConfigError("--proportions needs exactly 4 values (stop,move,rlc,llc)");
  }
  double total = 0.0;
  for (double w : args.weights) total += w;
  if (total <= 0.0) throw InvalidConfigError("--proportions must have a positive sum");
  for (int k = 0; k < kNumEgoActions; ++k) {
    config.proportions[static_cast<std::size_t>(k)] = args.weights[static_cast<std::size_t>(k)] / total;
  }

  auto frames = generate_synthetic(config, args.seed);
  if (args.lookahead >= 0) {
    derive_ego_plans(frames, args.lookahead);
    const Codebook& cb = Codebook::defaults();
    for (auto& frame : frames) frame.ego_action = rule_oracle(encode_frame(frame, cb), cb);
  }
  write_frames_csv(args.out, frames);

  std::array<std::int64_t, kNumEgoActions> counts{};
  for (const auto& frame : frames) counts[static_cast<std::size_t>(static_cast<int>(frame.ego_action))] += 1;
  std::cout << "wrote " << frames.size() << " frames to " << args.out << "\n";
  for (int k = 0; k < kNumEgoActions; ++k) {
    std::cout << "  " << to_string(static_cast<EgoAction>(k)) << ": "
              << counts[static_cast<std::size_t>(k)] << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out;
  std::string codebook;
  std::uint64_t seed = 7;
  double test_fraction = 0.2;
  int n_trees = 100;
  int max_depth = 12;
  int min_samples_leaf = 1;
  int features_per_split = 2;
  bool no_bootstrap = false;
  bool no_cv = false;
  int cv_folds = 10;
  std::size_t background_cap = 256;
};

int cmd_train(const TrainArgs& args) {
  const Codebook& codebook = codebook_from(args.codebook);
  Dataset dataset = load_dataset(args.data, codebook);
  auto [train, test] = split_dataset(dataset, args.test_fraction, args.seed);

  ForestParams params;
  params.n_trees = args.n_trees;
  params.max_depth = args.max_depth;
  params.min_samples_leaf = args.min_samples_leaf;
  params.features_per_split = args.features_per_split;
  params.bootstrap = !args.no_bootstrap;
  params.seed = args.seed;

  if (!args.no_cv) {
    const std::vector<CvCandidate> grid = {{8, 1}, {8, 3}, {12, 1}, {12, 3}, {16, 1}, {16, 3}};
    CvReport cv = cross_validate(train, params, grid, args.cv_folds, args.seed);
    std::cout << args.cv_folds << "-fold cross-validation over (max_depth, min_samples_leaf):\n";
    for (std::size_t i = 0; i < cv.results.size(); ++i) {
      const auto& result = cv.results[i];
      std::cout << "  (" << result.candidate.max_depth << ", " << result.candidate.min_samples_leaf
                << ") mean=" << result.mean_accuracy << "  folds:";
      for (double a : result.fold_accuracy) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), " %.3f", a);
        std::cout << buf;
      }
      std::cout << (i == cv.best ? "  <- selected" : "") << "\n";
    }
    params.max_depth = cv.results[cv.best].candidate.max_depth;
    params.min_samples_leaf = cv.results[cv.best].candidate.min_samples_leaf;
  }

  RandomForest forest = fit_forest(train, params);
  TrainedModel model{std::move(forest), make_background(train, args.background_cap, args.seed)};
  save_model(model, args.out);

  std::cout << "trained " << model.forest.n_trees() << " trees on " << train.size() << " rows"
            << " (max_depth=" << params.max_depth << ", min_samples_leaf=" << params.min_samples_leaf
            << ")\n";
  std::cout << "train accuracy: " << accuracy_on(model.forest, train) << "\n";
  if (!test.empty()) std::cout << "test accuracy:  " << accuracy_on(model.forest, test) << "\n";
  std::cout << "model written to " << args.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ExplainArgs {
  std::string model;
  std::string data;
  std::string codebook;
  std::string phrasebook;
  int row = -1;
  std::string ego_lane, incom_lane, outgo_lane, tl;
  std::string plan = "move";
  std::vector<std::string> constraints;
  std::string desired;
  std::string format = "human";  // human | records | both
};

FeatureVector frame_from_args(const ExplainArgs& args, const Codebook& codebook) {
  if (args.row >= 0) {
    if (args.data.empty()) throw Error("--row needs --data");
    Dataset dataset = load_dataset(args.data, codebook);
    if (args.row >= static_cast<int>(dataset.size())) {
      throw Error("row " + std::to_string(args.row) + " out of range (dataset has " +
                  std::to_string(dataset.size()) + " rows)");
    }
    return dataset[static_cast<std::size_t>(args.row)].features;
  }
  FrameRecord frame;
  if (!args.ego_lane.empty()) {
    frame.observations.push_back(parse_observation(args.ego_lane, LanePosition::EgoLane));
  }
  if (!args.incom_lane.empty()) {
    frame.observations.push_back(parse_observation(args.incom_lane, LanePosition::IncomingLane));
  }
  if (!args.outgo_lane.empty()) {
    frame.observations.push_back(parse_observation(args.outgo_lane, LanePosition::OutgoingLane));
  }
  if (!args.tl.empty()) {
    auto tl = parse_observation(args.tl, LanePosition::EgoLane);
    if (tl.agent_class != AgentClass::TrafficLight) throw Error("--tl must be a TrafficLight tuple");
    frame.observations.push_back(tl);
  }
  frame.ego_plan = parse_ego_action(args.plan);
  return encode_frame(frame, codebook);
}

int cmd_explain(const ExplainArgs& args) {
  const Codebook& codebook = codebook_from(args.codebook);
  const Phrasebook& phrasebook = phrasebook_from(args.phrasebook);
  TrainedModel model = load_model(args.model);
  const FeatureVector v = frame_from_args(args, codebook);

  Explainer explainer(model.forest, model.background, phrasebook);
  ConstraintSet constraints = ConstraintSet::from_names(args.constraints);
  std::optional<EgoAction> desired;
  if (!args.desired.empty()) desired = parse_ego_action(args.desired);

  const FactualExplanation factual = explainer.factual(v);
  std::optional<CounterfactualExplanation> counterfactual;
  std::string no_cf_reason;
  try {
    counterfactual = explainer.counterfactual(v, constraints, desired);
  } catch (const NoCounterfactualError& e) {
    no_cf_reason = e.what();
  }

  const bool human = args.format == "human" || args.format == "both";
  const bool records = args.format == "records" || args.format == "both";

  if (human) {
    const auto proba = model.forest.predict_proba(v);
    char entropy_buf[16];
    std::cout << "input: [";
    for (int i = 0; i < kNumFeatures; ++i) {
      std::cout << (i ? ", " : "") << feature_names()[static_cast<std::size_t>(i)] << "=" << v[i];
    }
    std::cout << "]\n";
    std::cout << "predicted action: " << to_string(factual.action)
              << " (p=" << proba[static_cast<std::size_t>(static_cast<int>(factual.action))] << ")\n";
    std::snprintf(entropy_buf, sizeof(entropy_buf), "%.2f", factual.entropy);
    std::cout << "Factual Explanation: \"" << factual.text << "\" S=" << entropy_buf << "\n";
    for (const auto& cause : factual.selected_causes) {
      std::cout << "  cause: " << interval_text(cause);
      if (cause.ci) std::cout << "  ci=" << *cause.ci;
      std::cout << "\n";
    }
    if (factual.low_confidence) std::cout << "  (low confidence: no cause had positive importance)\n";
    if (counterfactual) {
      std::snprintf(entropy_buf, sizeof(entropy_buf), "%.2f", counterfactual->entropy);
      std::cout << "Counterfactual Explanation: \"" << counterfactual->text << "\" S=" << entropy_buf
                << "\n";
      for (const auto& condition : counterfactual->conditions) {
        std::cout << "  condition: " << interval_text(condition) << "\n";
      }
    } else {
      std::cout << "Counterfactual Explanation: none (" << no_cf_reason << ")\n";
    }
  }
  if (records) {
    json f;
    f["type"] = "factual";
    f["action"] = to_string(factual.action);
    f["causes"] = json::array();
    for (const auto& cause : factual.selected_causes) f["causes"].push_back(cause_to_json(cause));
    f["entropy"] = factual.entropy;
    f["low_confidence"] = factual.low_confidence;
    f["text"] = factual.text;
    std::cout << f.dump() << "\n";

    json c;
    c["type"] = "counterfactual";
    if (counterfactual) {
      c["target_action"] = to_string(counterfactual->target_action);
      c["conditions"] = json::array();
      for (const auto& condition : counterfactual->conditions) {
        c["conditions"].push_back(cause_to_json(condition));
      }
      c["pivot_node"] = counterfactual->pivot_node;
      c["entropy"] = counterfactual->entropy;
      c["text"] = counterfactual->text;
    } else {
      c["result"] = "no_counterfactual";
      c["reason"] = no_cf_reason;
    }
    std::cout << c.dump() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string model;
  std::string data;
  std::string codebook;
  std::string phrasebook;
  std::string out;
  std::uint64_t seed = 7;
  double test_fraction = 0.2;
};

int cmd_evaluate(const EvaluateArgs& args) {
  const Codebook& codebook = codebook_from(args.codebook);
  const Phrasebook& phrasebook = phrasebook_from(args.phrasebook);
  TrainedModel model = load_model(args.model);

  Dataset dataset = load_dataset(args.data, codebook);
  auto [train, test] = split_dataset(dataset, args.test_fraction, args.seed);
  (void)train;
  Explainer explainer(model.forest, model.background, phrasebook);
  EvalReport report = evaluate(explainer, test);

  std::cout << render_report(report);
  if (!args.out.empty()) {
    std::ofstream out(args.out);
    if (!out) throw IoError("cannot open " + args.out + " for writing");
    out << report_to_json(report) << "\n";
    if (!out) throw IoError("failed while writing " + args.out);
    std::cout << "report written to " << args.out << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct InspectArgs {
  std::string model;
  int tree = -1;  // -1: all trees
};

void print_tree(const DecisionTree& tree, int index) {
  std::cout << "tree " << index << " (" << tree.leaf_count() << " leaves)\n";
  struct Item {
    int node;
    int depth;
  };
  std::vector<Item> stack = {{tree.root, 0}};
  while (!stack.empty()) {
    auto [id, depth] = stack.back();
    stack.pop_back();
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    std::cout << std::string(static_cast<std::size_t>(depth) * 2 + 2, ' ');
    if (node.is_leaf()) {
      std::cout << "leaf #" << id << " counts=[";
      for (int k = 0; k < kNumEgoActions; ++k) {
        std::cout << (k ? "," : "") << node.class_counts[static_cast<std::size_t>(k)];
      }
      const auto pred = static_cast<std::size_t>(static_cast<int>(
          std::distance(node.class_counts.begin(),
                        std::max_element(node.class_counts.begin(), node.class_counts.end()))));
      std::cout << "] -> " << class_names()[pred] << "\n";
    } else {
      std::cout << "node #" << id << " " << feature_names()[static_cast<std::size_t>(node.feature)]
                << " <= " << node.threshold << "\n";
      stack.push_back({node.right, depth + 1});
      stack.push_back({node.left, depth + 1});
    }
  }
}

int cmd_inspect(const InspectArgs& args) {
  TrainedModel model = load_model(args.model);
  if (args.tree >= model.forest.n_trees()) {
    throw Error("tree index " + std::to_string(args.tree) + " out of range (forest has " +
                std::to_string(model.forest.n_trees()) + " trees)");
  }
  std::array<std::int64_t, kNumFeatures> split_counts{};
  for (const auto& tree : model.forest.trees) {
    for (const auto& node : tree.nodes) {
      if (!node.is_leaf()) split_counts[static_cast<std::size_t>(node.feature)] += 1;
    }
  }
  std::cout << "forest: " << model.forest.n_trees() << " trees, background rows: "
            << model.background.size() << "\n";
  std::cout << "split counts per feature:";
  for (int f = 0; f < kNumFeatures; ++f) {
    std::cout << " " << feature_names()[static_cast<std::size_t>(f)] << "="
              << split_counts[static_cast<std::size_t>(f)];
  }
  std::cout << "\n";
  if (args.tree >= 0) {
    print_tree(model.forest.trees[static_cast<std::size_t>(args.tree)], args.tree);
  } else {
    for (int t = 0; t < model.forest.n_trees(); ++t) {
      print_tree(model.forest.trees[static_cast<std::size_t>(t)], t);
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CodebookArgs {
  std::string out;
  std::string check;
};

int cmd_codebook(const CodebookArgs& args) {
  if (!args.check.empty()) {
    Codebook cb = Codebook::load(args.check);
    std::cout << args.check << ": valid codebook, version " << cb.version() << ", max code "
              << cb.max_code() << "\n";
  }
  if (!args.out.empty()) {
    Codebook::defaults().save(args.out);
    std::cout << "default codebook written to " << args.out << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Action prediction and natural-language driving commentary from tree ensembles"};
  app.require_subcommand(1);
  app.set_config("--config");

  GenerateArgs generate;
  auto* cmd_gen = app.add_subcommand("generate-data", "Write a synthetic scene dataset CSV");
  cmd_gen->add_option("--out", generate.out, "output CSV path")->required();
  cmd_gen->add_option("--size", generate.size, "number of frames");
  cmd_gen->add_option("--seed", generate.seed, "generator seed");
  cmd_gen->add_option("--noise", generate.noise, "label noise rate in [0,1)");
  cmd_gen->add_option("--proportions", generate.weights,
                      "class weights stop,move,rlc,llc (normalised)")
      ->delimiter(',')
      ->expected(4);
  cmd_gen->add_option("--derive-plan-lookahead", generate.lookahead,
                      "rewrite plans as the action N frames ahead, then relabel");

  TrainArgs train;
  auto* cmd_tr = app.add_subcommand("train", "Fit a random forest with cross-validation");
  cmd_tr->add_option("--data", train.data, "dataset CSV")->required();
  cmd_tr->add_option("--out", train.out, "model output path")->required();
  cmd_tr->add_option("--codebook", train.codebook, "codebook file (default: built-in)");
  cmd_tr->add_option("--seed", train.seed, "split/training seed");
  cmd_tr->add_option("--test-fraction", train.test_fraction, "held-out fraction");
  cmd_tr->add_option("--n-trees", train.n_trees, "trees in the forest");
  cmd_tr->add_option("--max-depth", train.max_depth, "depth limit (0 = none)");
  cmd_tr->add_option("--min-samples-leaf", train.min_samples_leaf, "minimum samples per leaf");
  cmd_tr->add_option("--features-per-split", train.features_per_split,
                     "features sampled per split (0 = all)");
  cmd_tr->add_flag("--no-bootstrap", train.no_bootstrap, "fit each tree on the full training split");
  cmd_tr->add_flag("--no-cv", train.no_cv, "skip cross-validated model selection");
  cmd_tr->add_option("--cv-folds", train.cv_folds, "cross-validation folds");
  cmd_tr->add_option("--background-cap", train.background_cap,
                     "rows kept as the attribution background");

  ExplainArgs explain;
  auto* cmd_ex = app.add_subcommand("explain", "Explain one frame (factual + counterfactual)");
  cmd_ex->add_option("--model", explain.model, "model file")->required();
  cmd_ex->add_option("--data", explain.data, "dataset CSV for --row");
  cmd_ex->add_option("--row", explain.row, "0-based dataset row to explain");
  cmd_ex->add_option("--ego-lane", explain.ego_lane, "Class:Action:size:distance");
  cmd_ex->add_option("--incom-lane", explain.incom_lane, "Class:Action:size:distance");
  cmd_ex->add_option("--outgo-lane", explain.outgo_lane, "Class:Action:size:distance");
  cmd_ex->add_option("--tl", explain.tl, "TrafficLight:State:size:distance");
  cmd_ex->add_option("--plan", explain.plan, "ego plan (stop/move/rlc/llc)");
  cmd_ex->add_option("--constrain", explain.constraints, "features that must not change")
      ->delimiter(',');
  cmd_ex->add_option("--desired", explain.desired, "desired counterfactual action");
  cmd_ex->add_option("--codebook", explain.codebook, "codebook file");
  cmd_ex->add_option("--phrasebook", explain.phrasebook,
                     "phrasebook file (default: $COMMENTREE_PHRASEBOOK or built-in)");
  cmd_ex->add_option("--format", explain.format, "human | records | both")
      ->check(CLI::IsMember({"human", "records", "both"}));

  EvaluateArgs evaluate_args;
  auto* cmd_ev = app.add_subcommand("evaluate", "Score explanations on the held-out split");
  cmd_ev->add_option("--model", evaluate_args.model, "model file")->required();
  cmd_ev->add_option("--data", evaluate_args.data, "dataset CSV")->required();
  cmd_ev->add_option("--seed", evaluate_args.seed, "split seed (must match training)");
  cmd_ev->add_option("--test-fraction", evaluate_args.test_fraction, "held-out fraction");
  cmd_ev->add_option("--out", evaluate_args.out, "write the JSON report here");
  cmd_ev->add_option("--codebook", evaluate_args.codebook, "codebook file");
  cmd_ev->add_option("--phrasebook", evaluate_args.phrasebook, "phrasebook file");

  InspectArgs inspect;
  auto* cmd_in = app.add_subcommand("inspect", "Print tree structure and split statistics");
  cmd_in->add_option("--model", inspect.model, "model file")->required();
  cmd_in->add_option("--tree", inspect.tree, "print only this tree");

  CodebookArgs codebook_args;
  auto* cmd_cb = app.add_subcommand("codebook", "Export or check a codebook file");
  cmd_cb->add_option("--out", codebook_args.out, "write the default codebook here");
  cmd_cb->add_option("--check", codebook_args.check, "validate an existing codebook file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (cmd_gen->parsed()) return cmd_generate(generate);
    if (cmd_tr->parsed()) return cmd_train(train);
    if (cmd_ex->parsed()) return cmd_explain(explain);
    if (cmd_ev->parsed()) return cmd_evaluate(evaluate_args);
    if (cmd_in->parsed()) return cmd_inspect(inspect);
    if (cmd_cb->parsed()) return cmd_codebook(codebook_args);
  } catch (const commentree::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
