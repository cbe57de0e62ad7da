#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "driftlab/core.hpp"
#include "driftlab/provider.hpp"

namespace driftlab {

// Cosine similarity of the two prompt embeddings, in [-1, 1].
double semantic_similarity(std::string_view canonical, std::string_view variant,
                           EmbeddingProvider& provider, const std::string& encoder_id);

// Levenshtein distance over token sequences (unit costs).
std::size_t token_edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Token edit distance divided by the longer token count; 0 iff the token
// sequences are identical.
double syntax_distance(std::string_view a, std::string_view b);

// A rule returns a violation message, or nullopt when the text passes.
struct SyntaxRule {
  std::string name;
  std::function<std::optional<std::string>(std::string_view)> check;
};

SyntaxRule max_length_rule(std::size_t max_bytes);
SyntaxRule character_set_rule();  // valid UTF-8, no control characters besides \t \n \r
std::vector<SyntaxRule> default_rules();

struct ValidationEntry {
  std::string variant_id;
  double semantic_similarity = 0;  // NaN when the embedding failed
  double syntax_distance = 0;
  bool passed = false;  // semantic_similarity >= threshold
  bool exempt = false;  // labeled BrokenPrompt: outside the threshold rule
  std::vector<std::string> rule_violations;
  std::optional<std::string> error;

  // Kept for analysis: passed (or exempt), no rule violations, no error.
  bool accepted() const noexcept {
    return !error && rule_violations.empty() && (passed || exempt);
  }
};

struct ValidationReport {
  std::string set_id;
  double threshold = 0.65;
  std::vector<ValidationEntry> entries;
  std::optional<std::string> reviewer_signoff;
};

ValidationReport validate_set(const PromptSet& set, double tau, EmbeddingProvider& provider,
                              const std::string& encoder_id,
                              const std::vector<SyntaxRule>& rules = default_rules());

std::string validation_csv_header();
std::string validation_csv_rows(const ValidationReport& report);
std::string syntax_map_csv_header();
std::string syntax_map_csv_rows(const ValidationReport& report);

}  // namespace driftlab
