#include "commentree/explainer.hpp"

namespace commentree {

Explainer::Explainer(const RandomForest& forest, Background background, const Phrasebook& phrasebook,
                     CiMethod method)
    : forest_(&forest), phrasebook_(&phrasebook), engine_(forest, std::move(background), method) {}

FactualExplanation Explainer::factual(const FeatureVector& v) const {
  const EgoAction action = forest_->predict(v);
  const CIResult ci = engine_.run(v, action);
  const int tree_index = reduce_to_explaining_tree(*forest_, v);
  const DecisionTree& tree = forest_->trees[static_cast<std::size_t>(tree_index)];

  FactualExplanation explanation;
  explanation.action = action;
  explanation.explaining_tree = tree_index;
  explanation.full_path = tree.decision_path(v);
  auto selection = obtain_relevant_causes(ci, merge_inequalities(explanation.full_path));
  explanation.selected_causes = std::move(selection.causes);
  explanation.low_confidence = selection.low_confidence;
  explanation.entropy = tree.leaf_entropy(v);
  explanation.text =
      phrasebook_->decode_factual(explanation.action, explanation.selected_causes, explanation.entropy);
  return explanation;
}

CounterfactualExplanation Explainer::counterfactual(const FeatureVector& v,
                                                    const ConstraintSet& constraints,
                                                    std::optional<EgoAction> desired) const {
  return explain_counterfactual(*forest_, v, desired, constraints, *phrasebook_);
}

}  // namespace commentree
