#include "driftlab/validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "driftlab/error.hpp"
#include "driftlab/format.hpp"
#include "driftlab/text.hpp"

namespace driftlab {

double semantic_similarity(std::string_view canonical, std::string_view variant,
                           EmbeddingProvider& provider, const std::string& encoder_id) {
  if (trim(canonical).empty() || trim(variant).empty()) {
    throw ParameterError("semantic_similarity: both texts must be non-empty");
  }
  const auto v = provider.embed({{std::string(canonical), std::string(variant)}, encoder_id});
  return std::clamp(v[0].values().dot(v[1].values()), -1.0, 1.0);
}

std::size_t token_edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t subst = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double syntax_distance(std::string_view a, std::string_view b) {
  const auto ta = tokenize(a);
  const auto tb = tokenize(b);
  const std::size_t longest = std::max(ta.size(), tb.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(token_edit_distance(ta, tb)) / static_cast<double>(longest);
}

SyntaxRule max_length_rule(std::size_t max_bytes) {
  return {"max_length", [max_bytes](std::string_view text) -> std::optional<std::string> {
            if (text.size() > max_bytes) {
              return "longer than " + std::to_string(max_bytes) + " bytes";
            }
            return std::nullopt;
          }};
}

namespace {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    if (c < 0x80) len = 1;
    else if ((c >> 5) == 0x6) len = 2;
    else if ((c >> 4) == 0xE) len = 3;
    else if ((c >> 3) == 0x1E) len = 4;
    else return false;
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
    }
    i += len;
  }
  return true;
}

}  // namespace

SyntaxRule character_set_rule() {
  return {"character_set", [](std::string_view text) -> std::optional<std::string> {
            if (!valid_utf8(text)) return "not valid UTF-8";
            for (char ch : text) {
              const auto c = static_cast<unsigned char>(ch);
              if ((c < 0x20 && c != '\t' && c != '\n' && c != '\r') || c == 0x7F) {
                return "contains control characters";
              }
            }
            return std::nullopt;
          }};
}

std::vector<SyntaxRule> default_rules() { return {max_length_rule(8192), character_set_rule()}; }

ValidationReport validate_set(const PromptSet& set, double tau, EmbeddingProvider& provider,
                              const std::string& encoder_id, const std::vector<SyntaxRule>& rules) {
  if (set.variants.empty()) throw ParameterError("prompt set " + set.set_id + " has no variants");
  if (!(tau >= -1.0 && tau <= 1.0)) throw ParameterError("threshold tau must lie in [-1, 1]");

  ValidationReport report;
  report.set_id = set.set_id;
  report.threshold = tau;

  std::optional<EmbeddingVector> canonical;
  std::optional<std::string> canonical_error;
  try {
    canonical = provider.embed({{set.canonical}, encoder_id}).front();
  } catch (const std::exception& e) {
    canonical_error = std::string("canonical embedding failed: ") + e.what();
  }

  for (const auto& variant : set.variants) {
    ValidationEntry entry;
    entry.variant_id = variant.variant_id;
    entry.syntax_distance = syntax_distance(set.canonical, variant.text);
    entry.exempt = variant.label == PerturbationDimension::BrokenPrompt;
    entry.semantic_similarity = std::numeric_limits<double>::quiet_NaN();
    for (const auto& rule : rules) {
      if (auto violation = rule.check(variant.text)) {
        entry.rule_violations.push_back(rule.name + ": " + *violation);
      }
    }
    if (canonical_error) {
      entry.error = canonical_error;
    } else {
      try {
        const auto v = provider.embed({{variant.text}, encoder_id}).front();
        entry.semantic_similarity = std::clamp(canonical->values().dot(v.values()), -1.0, 1.0);
      } catch (const std::exception& e) {
        entry.error = e.what();
      }
    }
    entry.passed = entry.semantic_similarity >= tau;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

std::string validation_csv_header() {
  return csv_row({"set_id", "variant_id", "semantic_similarity", "syntax_distance", "passed",
                  "accepted", "notes"});
}

std::string validation_csv_rows(const ValidationReport& report) {
  std::string out;
  for (const auto& e : report.entries) {
    std::string notes;
    if (e.exempt) notes += "exempt:BrokenPrompt;";
    for (const auto& v : e.rule_violations) notes += v + ";";
    if (e.error) notes += "error:" + *e.error + ";";
    out += csv_row({report.set_id, e.variant_id,
                    std::isnan(e.semantic_similarity) ? "NA" : format_double(e.semantic_similarity),
                    format_double(e.syntax_distance), e.passed ? "true" : "false",
                    e.accepted() ? "true" : "false", notes});
  }
  return out;
}

std::string syntax_map_csv_header() {
  return csv_row({"set_id", "variant_id", "semantic_similarity", "syntax_distance"});
}

std::string syntax_map_csv_rows(const ValidationReport& report) {
  std::string out;
  for (const auto& e : report.entries) {
    if (std::isnan(e.semantic_similarity)) continue;
    out += csv_row({report.set_id, e.variant_id, format_double(e.semantic_similarity),
                    format_double(e.syntax_distance)});
  }
  return out;
}

}  // namespace driftlab
