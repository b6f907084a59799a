#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "commentree/shap.hpp"
#include "commentree/tree.hpp"

namespace commentree {

class Phrasebook;

/// A merged per-feature inequality taken from a decision path: the feature's
/// value lies in (lower_bound, upper_bound]. At least one bound is finite.
struct Cause {
  int feature = 0;
  double lower_bound = -std::numeric_limits<double>::infinity();
  double upper_bound = std::numeric_limits<double>::infinity();
  std::optional<double> ci;

  bool satisfied_by(const FeatureVector& v) const {
    const double x = static_cast<double>(v[feature]);
    return x > lower_bound && x <= upper_bound;
  }
};

/// Merges the split conditions of a path into one interval per distinct
/// feature: upper bound = min of the LE thresholds, lower bound = max of the
/// GT thresholds. Output keeps first-appearance order. Throws
/// ContradictoryPathError when a feature's interval comes out empty.
std::vector<Cause> merge_inequalities(std::span<const PathStep> steps);
std::vector<Cause> merge_inequalities(const DecisionPath& path);

struct CauseSelection {
  std::vector<Cause> causes;
  bool low_confidence = false;  // set when no cause had a positive CI
};

/// Keeps the causes worth telling: each cause is tagged with its feature's CI,
/// and a cause is selected when its CI is positive and within 50% of the
/// maximum ((max - ci) / max * 100 < 50, strict). The maximum-CI cause is
/// always selected; when every CI is nonpositive it is returned alone,
/// flagged low-confidence. Path order is preserved.
CauseSelection obtain_relevant_causes(const CIResult& ci, std::vector<Cause> causes);

struct FactualExplanation {
  EgoAction action = EgoAction::Stop;
  std::vector<Cause> selected_causes;
  DecisionPath full_path;
  double entropy = 0.0;
  std::string text;
  bool low_confidence = false;
  int explaining_tree = 0;  // forest tree index the path was taken from
};

/// Factual explanation of a single tree's prediction.
FactualExplanation explain_factual(const DecisionTree& tree, const FeatureVector& v,
                                   const Background& background, const Phrasebook& phrasebook,
                                   CiMethod method = CiMethod::TreePath);

/// Factual explanation of a forest prediction: attribution on the full
/// ensemble, mode-tree + path-factoring reduction, then path extraction,
/// merging, selection, entropy and decoding on the explaining tree.
FactualExplanation explain_factual(const RandomForest& forest, const FeatureVector& v,
                                   const Background& background, const Phrasebook& phrasebook,
                                   CiMethod method = CiMethod::TreePath);

}  // namespace commentree
