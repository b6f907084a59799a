#include "commentree/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "commentree/errors.hpp"
#include "commentree/default_phrasebook.hpp"

namespace commentree {

namespace {

std::string trim(std::string_view s) {
  std::size_t begin = s.find_first_not_of(" \t");
  if (begin == std::string_view::npos) return "";
  std::size_t end = s.find_last_not_of(" \t");
  return std::string(s.substr(begin, end - begin + 1));
}

// Splits "a | b" into its two halves; the right half is optional.
std::pair<std::string, std::string> split_clause_pair(const std::string& text) {
  auto pos = text.find(" | ");
  if (pos == std::string::npos) return {trim(text), ""};
  return {trim(text.substr(0, pos)), trim(text.substr(pos + 3))};
}

std::vector<int> parse_code_list(const std::string& text, std::size_t line_no) {
  std::vector<int> codes;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    auto dots = item.find("..");
    try {
      if (dots == std::string::npos) {
        codes.push_back(std::stoi(item));
      } else {
        int lo = std::stoi(item.substr(0, dots));
        int hi = std::stoi(item.substr(dots + 2));
        for (int c = lo; c <= hi; ++c) codes.push_back(c);
      }
    } catch (const std::exception&) {
      throw ParseError(line_no, "bad code list item '" + item + "'");
    }
  }
  std::sort(codes.begin(), codes.end());
  codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
  return codes;
}

}  // namespace

Phrasebook Phrasebook::parse(const std::string& text, const std::string& origin) {
  Phrasebook book;
  std::stringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string trimmed = trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;

    if (trimmed.rfind("version ", 0) == 0) {
      book.version_ = trim(trimmed.substr(8));
      continue;
    }

    auto eq = trimmed.find(" = ");
    if (eq == std::string::npos) throw ParseError(line_no, "expected '<key> = <value>'");
    std::string key = trim(trimmed.substr(0, eq));
    std::string value = trim(trimmed.substr(eq + 3));

    if (key.rfind("domain ", 0) == 0) {
      auto idx = feature_index(trim(key.substr(7)));
      if (!idx) throw ParseError(line_no, "unknown feature in '" + key + "'");
      book.domains_[static_cast<std::size_t>(*idx)] = parse_code_list(value, line_no);
      continue;
    }
    if (key.rfind("template ", 0) == 0) {
      std::string name = trim(key.substr(9));
      if (name == "factual") book.template_factual_ = value;
      else if (name == "factual_empty") book.template_factual_empty_ = value;
      else if (name == "counterfactual") book.template_counterfactual_ = value;
      else if (name == "counterfactual_empty") book.template_counterfactual_empty_ = value;
      else throw ParseError(line_no, "unknown template '" + name + "'");
      continue;
    }
    if (key.rfind("action ", 0) == 0) {
      std::string rest = trim(key.substr(7));
      ActionClause clause;
      auto when = rest.find(" when ");
      if (when != std::string::npos) {
        auto idx = feature_index(trim(rest.substr(when + 6)));
        if (!idx) throw ParseError(line_no, "unknown feature in '" + rest + "'");
        clause.when_feature = *idx;
        rest = trim(rest.substr(0, when));
      }
      try {
        clause.action = parse_ego_action(rest);
      } catch (const Error& e) {
        throw ParseError(line_no, e.what());
      }
      auto [factual, cf] = split_clause_pair(value);
      clause.factual = factual;
      clause.counterfactual = cf;
      book.action_clauses_.push_back(std::move(clause));
      continue;
    }

    // Interval pattern: "<Feature>|lo..hi = factual | counterfactual".
    auto bar = key.find('|');
    if (bar == std::string::npos) throw ParseError(line_no, "unrecognised key '" + key + "'");
    auto idx = feature_index(trim(key.substr(0, bar)));
    if (!idx) throw ParseError(line_no, "unknown feature in '" + key + "'");
    std::string range = trim(key.substr(bar + 1));
    auto dots = range.find("..");
    if (dots == std::string::npos) throw ParseError(line_no, "pattern range must be lo..hi");
    ClausePattern pattern;
    pattern.feature = *idx;
    try {
      pattern.lo = std::stoi(range.substr(0, dots));
      pattern.hi = std::stoi(range.substr(dots + 2));
    } catch (const std::exception&) {
      throw ParseError(line_no, "bad pattern range '" + range + "'");
    }
    auto [factual, cf] = split_clause_pair(value);
    if (factual.empty() || cf.empty()) {
      throw ParseError(line_no, "pattern needs '<factual> | <counterfactual>' clauses");
    }
    pattern.factual = factual;
    pattern.counterfactual = cf;
    book.patterns_[static_cast<std::size_t>(*idx)].push_back(std::move(pattern));
  }

  book.validate(origin);
  return book;
}

void Phrasebook::validate(const std::string& origin) const {
  if (version_.empty()) throw FormatError(origin + ": missing version line");
  if (template_factual_.empty() || template_factual_empty_.empty() ||
      template_counterfactual_.empty() || template_counterfactual_empty_.empty()) {
    throw FormatError(origin + ": all four templates must be declared");
  }
  for (int f = 0; f < kNumFeatures; ++f) {
    const auto& domain = domains_[static_cast<std::size_t>(f)];
    if (domain.empty()) {
      throw FormatError(origin + ": no domain for " + feature_names()[static_cast<std::size_t>(f)]);
    }
    for (int code : domain) {
      bool covered = false;
      for (const auto& pattern : patterns_[static_cast<std::size_t>(f)]) {
        if (code >= pattern.lo && code <= pattern.hi) {
          covered = true;
          break;
        }
      }
      if (!covered) {
        throw FormatError(origin + ": code " + std::to_string(code) + " of " +
                          feature_names()[static_cast<std::size_t>(f)] + " has no clause");
      }
    }
  }
  for (int k = 0; k < kNumEgoActions; ++k) {
    const auto action = static_cast<EgoAction>(k);
    bool has_unconditional = false;
    for (const auto& clause : action_clauses_) {
      if (clause.action == action && !clause.when_feature && !clause.counterfactual.empty()) {
        has_unconditional = true;
        break;
      }
    }
    if (!has_unconditional) {
      throw FormatError(origin + ": action " + std::string(to_string(action)) +
                        " needs an unconditional 'factual | counterfactual' clause");
    }
  }
}

Phrasebook Phrasebook::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path);
}

const Phrasebook& Phrasebook::defaults() {
  static const Phrasebook book = parse(kDefaultPhrasebookText, "<built-in phrasebook>");
  return book;
}

std::vector<int> Phrasebook::codes_in(const Cause& cause) const {
  std::vector<int> codes;
  for (int code : domains_[static_cast<std::size_t>(cause.feature)]) {
    const double x = static_cast<double>(code);
    if (x > cause.lower_bound && x <= cause.upper_bound) codes.push_back(code);
  }
  return codes;
}

const Phrasebook::ClausePattern& Phrasebook::match(const Cause& cause) const {
  const auto codes = codes_in(cause);
  std::ostringstream interval;
  interval << feature_names()[static_cast<std::size_t>(cause.feature)] << " in ("
           << cause.lower_bound << ", " << cause.upper_bound << "]";
  if (codes.empty()) {
    throw UncoveredIntervalError("no domain code satisfies " + interval.str());
  }
  for (const auto& pattern : patterns_[static_cast<std::size_t>(cause.feature)]) {
    const bool covers = std::all_of(codes.begin(), codes.end(), [&](int code) {
      return code >= pattern.lo && code <= pattern.hi;
    });
    if (covers) return pattern;
  }
  throw UncoveredIntervalError("no clause covers " + interval.str());
}

std::string Phrasebook::factual_action_clause(EgoAction action, std::span<const Cause> causes) const {
  for (const auto& clause : action_clauses_) {
    if (clause.action != action) continue;
    if (!clause.when_feature) return clause.factual;
    const bool applies = std::any_of(causes.begin(), causes.end(), [&](const Cause& cause) {
      return cause.feature == *clause.when_feature;
    });
    if (applies) return clause.factual;
  }
  throw UncoveredIntervalError("no action clause for " + std::string(to_string(action)));
}

std::string Phrasebook::counterfactual_action_clause(EgoAction action) const {
  for (const auto& clause : action_clauses_) {
    if (clause.action == action && !clause.counterfactual.empty()) return clause.counterfactual;
  }
  throw UncoveredIntervalError("no action clause for " + std::string(to_string(action)));
}

std::string Phrasebook::fill_template(const std::string& tmpl, const std::string& clauses,
                                      const std::string& action, double entropy) const {
  std::string out = tmpl;
  auto replace_all = [&out](std::string_view needle, const std::string& replacement) {
    std::size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), replacement);
      pos += replacement.size();
    }
  };
  char entropy_buf[32];
  std::snprintf(entropy_buf, sizeof(entropy_buf), "%.2f", entropy);
  replace_all("{clauses}", clauses);
  replace_all("{action}", action);
  replace_all("{entropy}", entropy_buf);
  return out;
}

std::string Phrasebook::decode_factual(EgoAction action, std::span<const Cause> causes,
                                       double entropy) const {
  const std::string action_clause = factual_action_clause(action, causes);
  if (causes.empty()) {
    return fill_template(template_factual_empty_, "", action_clause, entropy);
  }
  std::string clauses;
  for (std::size_t i = 0; i < causes.size(); ++i) {
    const ClausePattern& pattern = match(causes[i]);
    if (!clauses.empty()) clauses += "; ";
    clauses += i == 0 ? pattern.factual : pattern.counterfactual;
  }
  return fill_template(template_factual_, clauses, action_clause, entropy);
}

std::string Phrasebook::decode_counterfactual(EgoAction action,
                                              std::span<const Cause> conditions) const {
  const std::string action_clause = counterfactual_action_clause(action);
  if (conditions.empty()) {
    return fill_template(template_counterfactual_empty_, "", action_clause, 0.0);
  }
  std::string clauses;
  for (const auto& condition : conditions) {
    if (!clauses.empty()) clauses += "; ";
    clauses += match(condition).counterfactual;
  }
  return fill_template(template_counterfactual_, clauses, action_clause, 0.0);
}

}  // namespace commentree
