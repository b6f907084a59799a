#include "commentree/factual.hpp"

#include <algorithm>
#include <sstream>

#include "commentree/decoder.hpp"
#include "commentree/errors.hpp"

namespace commentree {

std::vector<Cause> merge_inequalities(std::span<const PathStep> steps) {
  std::vector<Cause> causes;
  for (const auto& step : steps) {
    auto it = std::find_if(causes.begin(), causes.end(),
                           [&](const Cause& c) { return c.feature == step.feature; });
    if (it == causes.end()) {
      Cause fresh;
      fresh.feature = step.feature;
      causes.push_back(fresh);
      it = std::prev(causes.end());
    }
    if (step.comparator == Comparator::LE) {
      it->upper_bound = std::min(it->upper_bound, step.threshold);
    } else {
      it->lower_bound = std::max(it->lower_bound, step.threshold);
    }
  }
  for (const auto& cause : causes) {
    if (cause.lower_bound >= cause.upper_bound) {
      std::ostringstream msg;
      msg << "contradictory conditions on " << feature_names()[static_cast<std::size_t>(cause.feature)]
          << ": (" << cause.lower_bound << ", " << cause.upper_bound << "]";
      throw ContradictoryPathError(msg.str());
    }
  }
  return causes;
}

std::vector<Cause> merge_inequalities(const DecisionPath& path) {
  return merge_inequalities(std::span<const PathStep>(path.steps));
}

CauseSelection obtain_relevant_causes(const CIResult& ci, std::vector<Cause> causes) {
  if (causes.empty()) return {};
  for (auto& cause : causes) {
    cause.ci = ci.per_feature[static_cast<std::size_t>(cause.feature)];
  }
  const auto max_it = std::max_element(causes.begin(), causes.end(), [](const Cause& a, const Cause& b) {
    return *a.ci < *b.ci;
  });
  const double max_ci = *max_it->ci;

  CauseSelection selection;
  if (max_ci <= 0.0) {
    // Nothing on the path helped the prediction; report the least-bad cause
    // but mark the explanation as low confidence.
    selection.causes.push_back(*max_it);
    selection.low_confidence = true;
    return selection;
  }
  for (const auto& cause : causes) {
    const double value = *cause.ci;
    if (value <= 0.0) continue;
    if ((max_ci - value) / max_ci * 100.0 < 50.0) selection.causes.push_back(cause);
  }
  return selection;
}

namespace {

FactualExplanation explain_on_tree(const DecisionTree& tree, const FeatureVector& v,
                                   const CIResult& ci, EgoAction action, int tree_index,
                                   const Phrasebook& phrasebook) {
  FactualExplanation explanation;
  explanation.action = action;
  explanation.explaining_tree = tree_index;
  explanation.full_path = tree.decision_path(v);
  auto selection = obtain_relevant_causes(ci, merge_inequalities(explanation.full_path));
  explanation.selected_causes = std::move(selection.causes);
  explanation.low_confidence = selection.low_confidence;
  explanation.entropy = tree.leaf_entropy(v);
  explanation.text =
      phrasebook.decode_factual(explanation.action, explanation.selected_causes, explanation.entropy);
  return explanation;
}

}  // namespace

FactualExplanation explain_factual(const DecisionTree& tree, const FeatureVector& v,
                                   const Background& background, const Phrasebook& phrasebook,
                                   CiMethod method) {
  const EgoAction action = tree.predict(v);
  const CIResult ci = method == CiMethod::TreePath ? shap_treepath(tree, v, action, background)
                                                   : shap_bruteforce(tree, v, action, background);
  return explain_on_tree(tree, v, ci, action, 0, phrasebook);
}

FactualExplanation explain_factual(const RandomForest& forest, const FeatureVector& v,
                                   const Background& background, const Phrasebook& phrasebook,
                                   CiMethod method) {
  const EgoAction action = forest.predict(v);
  const CIResult ci = obtain_ci(forest, v, background, method, action);
  const int tree_index = reduce_to_explaining_tree(forest, v);
  return explain_on_tree(forest.trees[static_cast<std::size_t>(tree_index)], v, ci, action,
                         tree_index, phrasebook);
}

}  // namespace commentree
