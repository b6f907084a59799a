#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "commentree/explainer.hpp"
#include "commentree/metrics.hpp"
#include "commentree/model_io.hpp"
#include "commentree/synthetic.hpp"

namespace py = pybind11;
using namespace commentree;

namespace {

FeatureVector to_features(const std::vector<int>& codes) {
  if (codes.size() != kNumFeatures) {
    throw py::value_error("a feature vector has exactly 5 codes");
  }
  FeatureVector v;
  for (int i = 0; i < kNumFeatures; ++i) v[i] = codes[static_cast<std::size_t>(i)];
  return v;
}

Background to_background(const std::vector<std::vector<int>>& rows) {
  Background background;
  background.reserve(rows.size());
  for (const auto& row : rows) background.push_back(to_features(row));
  return background;
}

EgoAction action_from(const std::string& name) { return parse_ego_action(name); }

py::dict cause_dict(const Cause& cause) {
  py::dict d;
  d["feature"] = feature_names()[static_cast<std::size_t>(cause.feature)];
  d["lower"] = std::isfinite(cause.lower_bound) ? py::cast(cause.lower_bound) : py::none();
  d["upper"] = std::isfinite(cause.upper_bound) ? py::cast(cause.upper_bound) : py::none();
  if (cause.ci) d["ci"] = *cause.ci;
  return d;
}

const Phrasebook& phrasebook_or_default(const std::optional<std::string>& path) {
  if (!path) return Phrasebook::defaults();
  static std::map<std::string, Phrasebook> cache;
  auto it = cache.find(*path);
  if (it == cache.end()) it = cache.emplace(*path, Phrasebook::load_file(*path)).first;
  return it->second;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tree-based ego action prediction with factual and counterfactual commentary";

  py::register_exception<Error>(m, "CommentreeError", PyExc_RuntimeError);

  m.attr("FEATURE_NAMES") = feature_names();
  m.attr("CLASS_NAMES") = class_names();

  py::class_<RandomForest>(m, "Forest")
      .def_property_readonly("n_trees", &RandomForest::n_trees)
      .def(
          "predict",
          [](const RandomForest& forest, const std::vector<int>& x) {
            return std::string(to_string(forest.predict(to_features(x))));
          },
          py::arg("x"))
      .def(
          "predict_proba",
          [](const RandomForest& forest, const std::vector<int>& x) {
            auto proba = forest.predict_proba(to_features(x));
            return std::vector<double>(proba.begin(), proba.end());
          },
          py::arg("x"));

  m.def(
      "generate_synthetic",
      [](std::size_t size, std::uint64_t seed, double noise) {
        SyntheticConfig config;
        config.size = size;
        config.label_noise = noise;
        auto frames = generate_synthetic(config, seed);
        const Codebook& cb = Codebook::defaults();
        std::vector<std::vector<int>> features;
        std::vector<std::string> labels, texts;
        for (const auto& frame : frames) {
          auto v = encode_frame(frame, cb);
          features.emplace_back(v.codes.begin(), v.codes.end());
          labels.emplace_back(to_string(frame.ego_action));
          texts.push_back(frame.ground_truth_explanation);
        }
        py::dict out;
        out["features"] = features;
        out["labels"] = labels;
        out["texts"] = texts;
        return out;
      },
      py::arg("size") = 1000, py::arg("seed") = 7, py::arg("noise") = 0.0);

  m.def(
      "rule_oracle",
      [](const std::vector<int>& x) {
        return std::string(to_string(rule_oracle(to_features(x), Codebook::defaults())));
      },
      py::arg("x"));

  m.def(
      "train_forest",
      [](const std::vector<std::vector<int>>& features, const std::vector<std::string>& labels,
         int n_trees, int max_depth, int min_samples_leaf, int features_per_split, bool bootstrap,
         std::uint64_t seed) {
        if (features.size() != labels.size()) {
          throw py::value_error("features and labels must have equal length");
        }
        Dataset dataset;
        dataset.reserve(features.size());
        for (std::size_t i = 0; i < features.size(); ++i) {
          dataset.push_back({to_features(features[i]), action_from(labels[i]), ""});
        }
        ForestParams params;
        params.n_trees = n_trees;
        params.max_depth = max_depth;
        params.min_samples_leaf = min_samples_leaf;
        params.features_per_split = features_per_split;
        params.bootstrap = bootstrap;
        params.seed = seed;
        return fit_forest(dataset, params);
      },
      py::arg("features"), py::arg("labels"), py::arg("n_trees") = 50, py::arg("max_depth") = 12,
      py::arg("min_samples_leaf") = 1, py::arg("features_per_split") = 2,
      py::arg("bootstrap") = true, py::arg("seed") = 0);

  m.def(
      "shap_values",
      [](const RandomForest& forest, const std::vector<int>& x,
         const std::vector<std::vector<int>>& background, const std::string& method,
         const std::optional<std::string>& target) {
        std::optional<EgoAction> target_action;
        if (target) target_action = action_from(*target);
        const CiMethod ci_method = method == "bruteforce" ? CiMethod::BruteForce : CiMethod::TreePath;
        CIResult result = obtain_ci(forest, to_features(x), to_background(background), ci_method,
                                    target_action);
        py::dict out;
        out["per_feature"] =
            std::vector<double>(result.per_feature.begin(), result.per_feature.end());
        out["base_value"] = result.base_value;
        out["target"] = std::string(to_string(result.target_class));
        return out;
      },
      py::arg("forest"), py::arg("x"), py::arg("background"), py::arg("method") = "treepath",
      py::arg("target") = std::nullopt);

  m.def(
      "explain_factual",
      [](const RandomForest& forest, const std::vector<int>& x,
         const std::vector<std::vector<int>>& background,
         const std::optional<std::string>& phrasebook_path) {
        const Phrasebook& phrasebook = phrasebook_or_default(phrasebook_path);
        FactualExplanation explanation =
            explain_factual(forest, to_features(x), to_background(background), phrasebook);
        py::dict out;
        out["action"] = std::string(to_string(explanation.action));
        out["text"] = explanation.text;
        out["entropy"] = explanation.entropy;
        out["low_confidence"] = explanation.low_confidence;
        py::list causes;
        for (const auto& cause : explanation.selected_causes) causes.append(cause_dict(cause));
        out["causes"] = causes;
        return out;
      },
      py::arg("forest"), py::arg("x"), py::arg("background"),
      py::arg("phrasebook_path") = std::nullopt);

  m.def(
      "explain_counterfactual",
      [](const RandomForest& forest, const std::vector<int>& x,
         const std::vector<std::string>& constraints, const std::optional<std::string>& desired,
         const std::optional<std::string>& phrasebook_path) {
        const Phrasebook& phrasebook = phrasebook_or_default(phrasebook_path);
        std::optional<EgoAction> desired_action;
        if (desired) desired_action = action_from(*desired);
        CounterfactualExplanation explanation =
            explain_counterfactual(forest, to_features(x), desired_action,
                                   ConstraintSet::from_names(constraints), phrasebook);
        py::dict out;
        out["target_action"] = std::string(to_string(explanation.target_action));
        out["text"] = explanation.text;
        out["entropy"] = explanation.entropy;
        out["pivot_node"] = explanation.pivot_node;
        py::list conditions;
        for (const auto& condition : explanation.conditions) conditions.append(cause_dict(condition));
        out["conditions"] = conditions;
        return out;
      },
      py::arg("forest"), py::arg("x"), py::arg("constraints") = std::vector<std::string>{},
      py::arg("desired") = std::nullopt, py::arg("phrasebook_path") = std::nullopt);

  m.def(
      "save_model",
      [](const RandomForest& forest, const std::vector<std::vector<int>>& background,
         const std::string& path) { save_model({forest, to_background(background)}, path); },
      py::arg("forest"), py::arg("background"), py::arg("path"));

  m.def(
      "load_model",
      [](const std::string& path) {
        TrainedModel model = load_model(path);
        std::vector<std::vector<int>> background;
        for (const auto& row : model.background) {
          background.emplace_back(row.codes.begin(), row.codes.end());
        }
        return py::make_tuple(std::move(model.forest), std::move(background));
      },
      py::arg("path"));

  m.def(
      "bleu4",
      [](const std::string& candidate, const std::vector<std::string>& references) {
        std::vector<std::vector<std::string>> reference_tokens;
        for (const auto& ref : references) reference_tokens.push_back(tokenize(ref));
        return bleu4(tokenize(candidate), reference_tokens);
      },
      py::arg("candidate"), py::arg("references"));

  m.def(
      "rouge_w",
      [](const std::string& candidate, const std::string& reference, double alpha) {
        return rouge_w(tokenize(candidate), tokenize(reference), alpha);
      },
      py::arg("candidate"), py::arg("reference"), py::arg("alpha") = 1.2);

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}
