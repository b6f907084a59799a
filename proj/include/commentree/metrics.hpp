#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "commentree/scene.hpp"

namespace commentree {

class Explainer;

/// Lowercases, strips punctuation (apostrophes inside words survive) and
/// splits on whitespace.
std::vector<std::string> tokenize(const std::string& text);

/// Cumulative BLEU-4: geometric mean of modified 1..4-gram precisions with
/// uniform 0.25 weights, times the brevity penalty (closest reference length,
/// ties to the shorter). Zero or undefined precisions of candidates shorter
/// than 4 tokens are replaced by 1e-9; longer candidates with a zero
/// precision score 0. Throws EmptyCandidateError.
double bleu4(const std::vector<std::string>& candidate,
             const std::vector<std::vector<std::string>>& references);

/// Weighted-LCS F-measure with weighting f(k) = k^alpha (beta = 1).
/// Throws EmptyInputError when either sequence is empty.
double rouge_w(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
               double alpha = 1.2);

struct EntropyStats {
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;
  std::int64_t count = 0;
};

/// Similarity means for one class, stratified at the run's median entropy.
struct ClassScores {
  std::optional<double> bleu4_low_entropy;
  std::optional<double> bleu4_high_entropy;
  std::optional<double> rougew_low_entropy;
  std::optional<double> rougew_high_entropy;
  std::int64_t scored_low = 0;
  std::int64_t scored_high = 0;
  EntropyStats entropy;  // over all rows predicted as this class
};

struct EvalReport {
  std::array<ClassScores, kNumEgoActions> per_class;
  double entropy_median = 0.0;  // stratification threshold
  double accuracy = 0.0;
  std::array<std::array<std::int64_t, kNumEgoActions>, kNumEgoActions> confusion{};  // [actual][predicted]
  EntropyStats entropy_summary;
  std::int64_t missing_reference = 0;
  std::int64_t rows_total = 0;
  std::int64_t rows_scored = 0;
};

/// Predicts, explains and scores every test row against its ground-truth
/// text. Rows without a reference text are counted and excluded from the
/// similarity means but still enter accuracy, confusion and entropy.
EvalReport evaluate(const Explainer& explainer, const Dataset& test);

/// Aligned plain-text table (similarity by class and entropy stratum,
/// confusion matrix, entropy summary).
std::string render_report(const EvalReport& report);

/// Machine-readable form; stable key order and formatting.
std::string report_to_json(const EvalReport& report);

}  // namespace commentree
