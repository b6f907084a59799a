#include "commentree/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "commentree/errors.hpp"
#include "commentree/explainer.hpp"

namespace commentree {

std::vector<std::string> tokenize(const std::string& text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '\'') {
      cleaned += static_cast<char>(std::tolower(c));
    } else {
      cleaned += ' ';
    }
  }
  std::vector<std::string> tokens;
  std::stringstream stream(cleaned);
  std::string token;
  while (stream >> token) tokens.push_back(token);
  return tokens;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                    tokens.begin() + static_cast<std::ptrdiff_t>(i + n))] += 1;
  }
  return counts;
}

}  // namespace

double bleu4(const std::vector<std::string>& candidate,
             const std::vector<std::vector<std::string>>& references) {
  if (candidate.empty()) throw EmptyCandidateError("BLEU candidate is empty");
  if (references.empty()) throw EmptyInputError("BLEU needs at least one reference");

  const std::size_t c = candidate.size();

  // Closest reference length; ties prefer the shorter reference.
  std::size_t r = references.front().size();
  for (const auto& ref : references) {
    const auto diff = [&](std::size_t len) {
      return len > c ? len - c : c - len;
    };
    if (diff(ref.size()) < diff(r) || (diff(ref.size()) == diff(r) && ref.size() < r)) {
      r = ref.size();
    }
  }
  const double brevity =
      c >= r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));

  constexpr double kEpsilon = 1e-9;
  double log_precision = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto total = c >= n ? c - n + 1 : 0;
    double precision;
    if (total == 0) {
      precision = kEpsilon;  // candidate shorter than n tokens
    } else {
      auto counts = ngram_counts(candidate, n);
      std::int64_t clipped = 0;
      for (const auto& [gram, count] : counts) {
        int best_ref = 0;
        for (const auto& ref : references) {
          auto ref_counts = ngram_counts(ref, n);
          auto it = ref_counts.find(gram);
          if (it != ref_counts.end()) best_ref = std::max(best_ref, it->second);
        }
        clipped += std::min(count, best_ref);
      }
      if (clipped == 0) {
        if (c >= 4) return 0.0;
        precision = kEpsilon;
      } else {
        precision = static_cast<double>(clipped) / static_cast<double>(total);
      }
    }
    log_precision += 0.25 * std::log(precision);
  }
  return brevity * std::exp(log_precision);
}

double rouge_w(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
               double alpha) {
  if (candidate.empty() || reference.empty()) {
    throw EmptyInputError("ROUGE-W needs nonempty candidate and reference");
  }
  const std::size_t m = reference.size();
  const std::size_t n = candidate.size();
  const auto f = [alpha](double k) { return std::pow(k, alpha); };
  const auto f_inv = [alpha](double t) { return std::pow(t, 1.0 / alpha); };

  // Weighted LCS: runs of consecutive matches of length k score f(k), which
  // rewards longer runs when alpha > 1.
  std::vector<std::vector<double>> score(m + 1, std::vector<double>(n + 1, 0.0));
  std::vector<std::vector<int>> run(m + 1, std::vector<int>(n + 1, 0));
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      if (reference[i - 1] == candidate[j - 1]) {
        const int k = run[i - 1][j - 1];
        score[i][j] = score[i - 1][j - 1] + f(k + 1) - f(k);
        run[i][j] = k + 1;
      } else {
        score[i][j] = std::max(score[i - 1][j], score[i][j - 1]);
        run[i][j] = 0;
      }
    }
  }
  const double wlcs = score[m][n];
  if (wlcs <= 0.0) return 0.0;
  const double recall = f_inv(wlcs / f(static_cast<double>(m)));
  const double precision = f_inv(wlcs / f(static_cast<double>(n)));
  if (recall + precision == 0.0) return 0.0;
  return 2.0 * recall * precision / (recall + precision);
}

namespace {

EntropyStats entropy_stats(std::vector<double> values) {
  EntropyStats stats;
  stats.count = static_cast<std::int64_t>(values.size());
  if (values.empty()) return stats;
  std::sort(values.begin(), values.end());
  stats.min = values.front();
  stats.max = values.back();
  const std::size_t n = values.size();
  stats.median = n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
  return stats;
}

std::optional<double> mean_of(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

EvalReport evaluate(const Explainer& explainer, const Dataset& test) {
  if (test.empty()) throw EmptyDatasetError("cannot evaluate an empty dataset");

  struct RowResult {
    int predicted;
    double entropy;
    std::optional<double> bleu;
    std::optional<double> rouge;
  };
  std::vector<RowResult> rows;
  rows.reserve(test.size());

  EvalReport report;
  report.rows_total = static_cast<std::int64_t>(test.size());
  std::vector<double> all_entropies;

  for (const auto& row : test) {
    const FactualExplanation explanation = explainer.factual(row.features);
    RowResult result;
    result.predicted = static_cast<int>(explanation.action);
    result.entropy = explanation.entropy;
    report.confusion[static_cast<std::size_t>(static_cast<int>(row.label))]
                    [static_cast<std::size_t>(result.predicted)] += 1;
    all_entropies.push_back(result.entropy);

    const auto reference = tokenize(row.gt_text);
    if (reference.empty()) {
      report.missing_reference += 1;
    } else {
      const auto candidate = tokenize(explanation.text);
      result.bleu = bleu4(candidate, {reference});
      result.rouge = rouge_w(candidate, reference);
      report.rows_scored += 1;
    }
    rows.push_back(result);
  }

  report.entropy_summary = entropy_stats(all_entropies);
  report.entropy_median = report.entropy_summary.median;

  std::int64_t hits = 0;
  for (int k = 0; k < kNumEgoActions; ++k) {
    hits += report.confusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];
  }
  report.accuracy = static_cast<double>(hits) / static_cast<double>(test.size());

  for (int k = 0; k < kNumEgoActions; ++k) {
    std::vector<double> bleu_low, bleu_high, rouge_low, rouge_high, entropies;
    for (const auto& row : rows) {
      if (row.predicted != k) continue;
      entropies.push_back(row.entropy);
      if (!row.bleu) continue;
      const bool low = row.entropy <= report.entropy_median;
      (low ? bleu_low : bleu_high).push_back(*row.bleu);
      (low ? rouge_low : rouge_high).push_back(*row.rouge);
    }
    ClassScores& scores = report.per_class[static_cast<std::size_t>(k)];
    scores.bleu4_low_entropy = mean_of(bleu_low);
    scores.bleu4_high_entropy = mean_of(bleu_high);
    scores.rougew_low_entropy = mean_of(rouge_low);
    scores.rougew_high_entropy = mean_of(rouge_high);
    scores.scored_low = static_cast<std::int64_t>(bleu_low.size());
    scores.scored_high = static_cast<std::int64_t>(bleu_high.size());
    scores.entropy = entropy_stats(std::move(entropies));
  }
  return report;
}

namespace {

std::string cell(const std::optional<double>& value) {
  if (!value) return "-";
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.3f", *value);
  return buf;
}

std::string num(double value) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.3f", value);
  return buf;
}

}  // namespace

std::string render_report(const EvalReport& report) {
  std::ostringstream out;
  const std::string median = num(report.entropy_median);
  out << "Similarity of generated vs. ground-truth explanations"
      << " (stratified at median entropy " << median << ")\n\n";
  out << std::left << std::setw(7) << "" << std::setw(10) << "BLEU-4" << std::setw(12) << ""
      << std::setw(10) << "ROUGE-W" << "\n";
  out << std::left << std::setw(7) << "";
  out << std::setw(10) << ("S<=" + median) << std::setw(12) << ("S>" + median);
  out << std::setw(10) << ("S<=" + median) << std::setw(12) << ("S>" + median) << "\n";
  for (int k = 0; k < kNumEgoActions; ++k) {
    const auto& scores = report.per_class[static_cast<std::size_t>(k)];
    out << std::left << std::setw(7) << to_string(static_cast<EgoAction>(k));
    out << std::setw(10) << cell(scores.bleu4_low_entropy) << std::setw(12)
        << cell(scores.bleu4_high_entropy);
    out << std::setw(10) << cell(scores.rougew_low_entropy) << std::setw(12)
        << cell(scores.rougew_high_entropy) << "\n";
  }

  out << "\nEntropy per predicted class (min / max / median):\n";
  for (int k = 0; k < kNumEgoActions; ++k) {
    const auto& stats = report.per_class[static_cast<std::size_t>(k)].entropy;
    out << std::left << std::setw(7) << to_string(static_cast<EgoAction>(k));
    if (stats.count == 0) {
      out << "-\n";
    } else {
      out << num(stats.min) << " / " << num(stats.max) << " / " << num(stats.median) << "  (n="
          << stats.count << ")\n";
    }
  }
  out << "overall " << num(report.entropy_summary.min) << " / " << num(report.entropy_summary.max)
      << " / " << num(report.entropy_summary.median) << "\n";

  out << "\nConfusion matrix (rows = actual, columns = predicted):\n";
  out << std::left << std::setw(7) << "";
  for (int k = 0; k < kNumEgoActions; ++k) {
    out << std::right << std::setw(7) << to_string(static_cast<EgoAction>(k));
  }
  out << "\n";
  for (int a = 0; a < kNumEgoActions; ++a) {
    out << std::left << std::setw(7) << to_string(static_cast<EgoAction>(a));
    for (int p = 0; p < kNumEgoActions; ++p) {
      out << std::right << std::setw(7)
          << report.confusion[static_cast<std::size_t>(a)][static_cast<std::size_t>(p)];
    }
    out << "\n";
  }
  out << "\naccuracy: " << num(report.accuracy) << "\n";
  out << "rows: " << report.rows_total << "  scored: " << report.rows_scored
      << "  missing references: " << report.missing_reference << "\n";
  return out.str();
}

std::string report_to_json(const EvalReport& report) {
  using nlohmann::json;
  json j;
  j["accuracy"] = report.accuracy;
  j["entropy_median"] = report.entropy_median;
  json summary;
  summary["min"] = report.entropy_summary.min;
  summary["max"] = report.entropy_summary.max;
  summary["median"] = report.entropy_summary.median;
  j["entropy_summary"] = summary;
  j["rows_total"] = report.rows_total;
  j["rows_scored"] = report.rows_scored;
  j["missing_reference"] = report.missing_reference;

  json confusion = json::array();
  for (const auto& row : report.confusion) confusion.push_back(row);
  j["confusion"] = confusion;

  json per_class;
  for (int k = 0; k < kNumEgoActions; ++k) {
    const auto& scores = report.per_class[static_cast<std::size_t>(k)];
    json c;
    auto set = [&c](const char* key, const std::optional<double>& value) {
      if (value) c[key] = *value;
      else c[key] = nullptr;
    };
    set("bleu4_low_entropy", scores.bleu4_low_entropy);
    set("bleu4_high_entropy", scores.bleu4_high_entropy);
    set("rougew_low_entropy", scores.rougew_low_entropy);
    set("rougew_high_entropy", scores.rougew_high_entropy);
    c["scored_low"] = scores.scored_low;
    c["scored_high"] = scores.scored_high;
    json e;
    e["min"] = scores.entropy.min;
    e["max"] = scores.entropy.max;
    e["median"] = scores.entropy.median;
    e["count"] = scores.entropy.count;
    c["entropy"] = e;
    per_class[std::string(to_string(static_cast<EgoAction>(k)))] = c;
  }
  j["per_class"] = per_class;
  return j.dump(1);
}

}  // namespace commentree
