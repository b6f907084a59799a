#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "commentree/factual.hpp"
#include "commentree/scene.hpp"

namespace commentree {

/// Turns merged causes into commentary-style sentences via a configurable
/// clause catalogue (format documented in docs/file_formats.md).
///
/// Each feature carries a priority-ordered list of code-range patterns; a
/// cause is rendered by the first pattern whose codes cover every domain code
/// the cause admits. Factual texts start with the sentence-initial clause
/// form, later clauses and all counterfactual clauses use the mid-sentence
/// form.
class Phrasebook {
 public:
  static Phrasebook load_file(const std::string& path);
  static Phrasebook parse(const std::string& text, const std::string& origin);

  /// The phrasebook built into the library (data/phrasebook.txt).
  static const Phrasebook& defaults();

  std::string decode_factual(EgoAction action, std::span<const Cause> causes, double entropy) const;
  std::string decode_counterfactual(EgoAction action, std::span<const Cause> conditions) const;

  const std::string& version() const { return version_; }

  /// Domain codes a cause interval admits for its feature.
  std::vector<int> codes_in(const Cause& cause) const;

 private:
  struct ClausePattern {
    int feature = 0;
    int lo = 0;
    int hi = 0;
    std::string factual;
    std::string counterfactual;
  };

  struct ActionClause {
    EgoAction action = EgoAction::Stop;
    std::optional<int> when_feature;  // factual form applies only when a cause
                                      // touches this feature
    std::string factual;
    std::string counterfactual;  // empty on conditional entries
  };

  const ClausePattern& match(const Cause& cause) const;
  std::string factual_action_clause(EgoAction action, std::span<const Cause> causes) const;
  std::string counterfactual_action_clause(EgoAction action) const;
  std::string fill_template(const std::string& tmpl, const std::string& clauses,
                            const std::string& action, double entropy) const;
  void validate(const std::string& origin) const;

  std::string version_;
  std::array<std::vector<int>, kNumFeatures> domains_;
  std::array<std::vector<ClausePattern>, kNumFeatures> patterns_;
  std::vector<ActionClause> action_clauses_;
  std::string template_factual_;
  std::string template_factual_empty_;
  std::string template_counterfactual_;
  std::string template_counterfactual_empty_;
};

}  // namespace commentree
