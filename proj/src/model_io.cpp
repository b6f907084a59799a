#include "commentree/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "commentree/errors.hpp"

namespace commentree {

namespace {

using nlohmann::json;

constexpr const char* kFormatName = "commentree-model";
constexpr int kFormatVersion = 1;

json node_to_json(const TreeNode& node, int id) {
  json j;
  j["id"] = id;
  j["counts"] = node.class_counts;
  if (node.is_leaf()) {
    if (node.leaf_value != 0.0) j["value"] = node.leaf_value;
    return j;
  }
  j["feature"] = feature_names()[static_cast<std::size_t>(node.feature)];
  j["threshold"] = node.threshold;
  j["left"] = node.left;
  j["right"] = node.right;
  return j;
}

TreeNode node_from_json(const json& j) {
  TreeNode node;
  auto counts = j.at("counts").get<std::vector<std::int64_t>>();
  if (counts.size() != kNumEgoActions) throw FormatError("node counts must have 4 entries");
  for (int k = 0; k < kNumEgoActions; ++k) {
    node.class_counts[static_cast<std::size_t>(k)] = counts[static_cast<std::size_t>(k)];
  }
  if (j.contains("feature")) {
    auto idx = feature_index(j.at("feature").get<std::string>());
    if (!idx) throw FormatError("unknown feature name " + j.at("feature").dump());
    node.feature = *idx;
    node.threshold = j.at("threshold").get<double>();
    node.left = j.at("left").get<int>();
    node.right = j.at("right").get<int>();
  } else if (j.contains("value")) {
    node.leaf_value = j.at("value").get<double>();
  }
  return node;
}

}  // namespace

std::string model_to_json(const TrainedModel& model) {
  json j;
  j["format"] = kFormatName;
  j["version"] = kFormatVersion;
  j["kind"] = model.forest.kind == TreeKind::Classification ? "classification" : "regression";
  j["feature_names"] = feature_names();
  j["class_names"] = class_names();
  json meta;
  meta["seed"] = model.forest.params.seed;
  meta["n_trees"] = model.forest.params.n_trees;
  meta["max_depth"] = model.forest.params.max_depth;
  meta["min_samples_leaf"] = model.forest.params.min_samples_leaf;
  meta["features_per_split"] = model.forest.params.features_per_split;
  meta["bootstrap"] = model.forest.params.bootstrap;
  j["meta"] = meta;

  json trees = json::array();
  for (const auto& tree : model.forest.trees) {
    json t;
    t["root"] = tree.root;
    json nodes = json::array();
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      nodes.push_back(node_to_json(tree.nodes[i], static_cast<int>(i)));
    }
    t["nodes"] = std::move(nodes);
    trees.push_back(std::move(t));
  }
  j["trees"] = std::move(trees);

  json background = json::array();
  for (const auto& row : model.background) background.push_back(row.codes);
  j["background"] = std::move(background);
  return j.dump(1);
}

TrainedModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormatName) {
      throw FormatError("not a " + std::string(kFormatName) + " file");
    }
    const int version = j.at("version").get<int>();
    if (version != kFormatVersion) {
      throw FormatError("unsupported model version " + std::to_string(version) +
                        " (this build reads version " + std::to_string(kFormatVersion) + ")");
    }

    TrainedModel model;
    const auto kind = j.at("kind").get<std::string>();
    model.forest.kind = kind == "regression" ? TreeKind::Regression : TreeKind::Classification;
    const auto& meta = j.at("meta");
    model.forest.params.seed = meta.at("seed").get<std::uint64_t>();
    model.forest.params.n_trees = meta.at("n_trees").get<int>();
    model.forest.params.max_depth = meta.at("max_depth").get<int>();
    model.forest.params.min_samples_leaf = meta.at("min_samples_leaf").get<int>();
    model.forest.params.features_per_split = meta.at("features_per_split").get<int>();
    model.forest.params.bootstrap = meta.at("bootstrap").get<bool>();

    for (const auto& t : j.at("trees")) {
      DecisionTree tree;
      tree.kind = model.forest.kind;
      tree.root = t.at("root").get<int>();
      const auto& nodes = t.at("nodes");
      tree.nodes.resize(nodes.size());
      for (const auto& n : nodes) {
        const int id = n.at("id").get<int>();
        if (id < 0 || id >= static_cast<int>(tree.nodes.size())) {
          throw FormatError("node id out of range");
        }
        tree.nodes[static_cast<std::size_t>(id)] = node_from_json(n);
      }
      tree.validate();
      model.forest.trees.push_back(std::move(tree));
    }
    if (model.forest.trees.empty()) throw FormatError("model has no trees");

    for (const auto& row : j.at("background")) {
      auto codes = row.get<std::vector<int>>();
      if (codes.size() != kNumFeatures) throw FormatError("background row must have 5 codes");
      FeatureVector v;
      for (int i = 0; i < kNumFeatures; ++i) v[i] = codes[static_cast<std::size_t>(i)];
      model.background.push_back(v);
    }
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const TrainedModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << model_to_json(model) << "\n";
  if (!out) throw IoError("failed while writing " + path);
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace commentree
