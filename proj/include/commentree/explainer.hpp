#pragma once

#include <optional>

#include "commentree/counterfactual.hpp"
#include "commentree/decoder.hpp"
#include "commentree/factual.hpp"
#include "commentree/shap.hpp"

namespace commentree {

/// Bundles a trained forest, an attribution background and a phrasebook, with
/// the attribution engine built once so batches of explanations stay cheap.
/// The referenced forest and phrasebook must outlive the explainer.
class Explainer {
 public:
  Explainer(const RandomForest& forest, Background background, const Phrasebook& phrasebook,
            CiMethod method = CiMethod::TreePath);

  FactualExplanation factual(const FeatureVector& v) const;
  CounterfactualExplanation counterfactual(const FeatureVector& v, const ConstraintSet& constraints,
                                           std::optional<EgoAction> desired = {}) const;

  const RandomForest& forest() const { return *forest_; }
  const Phrasebook& phrasebook() const { return *phrasebook_; }
  const Background& background() const { return engine_.background(); }

 private:
  const RandomForest* forest_;
  const Phrasebook* phrasebook_;
  CiEngine engine_;
};

}  // namespace commentree
