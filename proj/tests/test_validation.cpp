#include <doctest.h>

#include <cmath>
#include <random>

#include "driftlab/error.hpp"
#include "driftlab/text.hpp"
#include "driftlab/validation.hpp"
#include "test_util.hpp"

using namespace driftlab;

namespace {

PromptSet example_set() {
  return {"C1",
          "C1-S1",
          "Summarize the key findings of this radiology report",
          {{"v01", "Summarize the key findings of this radiology report", std::nullopt},
           {"v02", "Please summarize the key findings of this radiology report", PerturbationDimension::StylisticShift},
           {"v03", "The key findings of this radiology report: summarize them", PerturbationDimension::SyntacticManipulation},
           {"v04", "Write a limerick about cats", PerturbationDimension::ContextualReframing},
           {"v05", "Summarize key radiology", PerturbationDimension::BrokenPrompt}}};
}

// Fails on one specific text, delegates otherwise.
class FlakyProvider final : public EmbeddingProvider {
 public:
  std::vector<EmbeddingVector> embed(const EmbeddingRequest& request) override {
    for (const auto& t : request.texts) {
      if (t.find("limerick") != std::string::npos) throw ProviderError("simulated outage");
    }
    return inner_.embed(request);
  }

 private:
  MockProvider inner_{128, 1, MockMode::Lexical};
};

}  // namespace

TEST_CASE("tokenizer") {
  CHECK(tokenize("Explain THIS, scan!") == std::vector<std::string>{"explain", "this", "scan"});
  CHECK(tokenize("  ").empty());
  CHECK(tokenize("caf\xc3\xa9 ok") == std::vector<std::string>{"caf\xc3\xa9", "ok"});
}

TEST_CASE("syntax distance examples") {
  CHECK(std::abs(syntax_distance("explain this scan", "explain that scan") - 1.0 / 3.0) <= 1e-15);
  CHECK(syntax_distance("a b c", "a b c") == 0.0);
  CHECK(syntax_distance("", "") == 0.0);
  CHECK(syntax_distance("", "one two") == 1.0);
  CHECK(token_edit_distance({"a", "b"}, {"b", "a"}) == 2);
  CHECK(token_edit_distance({"kitten"}, {}) == 1);
}

TEST_CASE("syntax distance is a pseudo-metric") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> len(0, 7), word(0, 4);
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e"};
  auto draw = [&] {
    std::vector<std::string> v(static_cast<std::size_t>(len(rng)));
    for (auto& w : v) w = vocab[static_cast<std::size_t>(word(rng))];
    return v;
  };
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& w : v) s += w + " ";
    return s;
  };
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = draw(), b = draw(), c = draw();
    CHECK(token_edit_distance(a, a) == 0);
    CHECK(token_edit_distance(a, b) == token_edit_distance(b, a));
    CHECK(token_edit_distance(a, c) <= token_edit_distance(a, b) + token_edit_distance(b, c));
    CHECK(syntax_distance(join(a), join(b)) == syntax_distance(join(b), join(a)));
    const double d = syntax_distance(join(a), join(b));
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
  }
}

TEST_CASE("semantic similarity with the lexical mock") {
  MockProvider provider(256, 3, MockMode::Lexical);
  const auto set = example_set();
  const double self = semantic_similarity(set.canonical, set.canonical, provider, "enc");
  CHECK(std::abs(self - 1.0) <= 1e-12);
  const double para = semantic_similarity(set.canonical, set.variants[1].text, provider, "enc");
  const double off = semantic_similarity(set.canonical, set.variants[3].text, provider, "enc");
  CHECK(para > off);
  CHECK(para <= 1.0);
  CHECK(off >= -1.0);
}

TEST_CASE("validate_set thresholds, exemptions and determinism") {
  MockProvider provider(256, 3, MockMode::Lexical);
  const auto set = example_set();
  const auto report = validate_set(set, 0.65, provider, "enc");
  REQUIRE(report.entries.size() == 5);
  CHECK(report.entries[0].passed);
  CHECK(report.entries[1].passed);
  CHECK_FALSE(report.entries[3].passed);
  CHECK_FALSE(report.entries[3].accepted());
  CHECK(report.entries[4].exempt);
  CHECK(report.entries[4].accepted());

  const auto again = validate_set(set, 0.65, provider, "enc");
  CHECK(validation_csv_rows(again) == validation_csv_rows(report));

  std::size_t prev = report.entries.size() + 1;
  for (double tau = -1.0; tau <= 1.0; tau += 0.05) {
    const auto r = validate_set(set, tau, provider, "enc");
    const auto passed = static_cast<std::size_t>(
        std::count_if(r.entries.begin(), r.entries.end(), [](const ValidationEntry& e) { return e.passed; }));
    CHECK(passed <= prev);
    prev = passed;
  }
  CHECK_THROWS_AS(validate_set(set, 1.5, provider, "enc"), ParameterError);
}

TEST_CASE("per-variant provider failures are recorded, not thrown") {
  FlakyProvider provider;
  const auto report = validate_set(example_set(), 0.65, provider, "enc");
  const auto& e = report.entries[3];
  REQUIRE(e.error);
  CHECK(std::isnan(e.semantic_similarity));
  CHECK_FALSE(e.passed);
  CHECK_FALSE(e.accepted());
  CHECK(report.entries[1].accepted());
  const auto csv = validation_csv_rows(report);
  CHECK(csv.find("C1-S1,v04,NA,") != std::string::npos);
  CHECK(syntax_map_csv_rows(report).find("v04") == std::string::npos);
}

TEST_CASE("syntax rules") {
  MockProvider provider(64, 0);
  auto set = example_set();
  set.variants[1].text = std::string("bad\x01control");
  set.variants[2].text = std::string(20, 'x');
  const auto report = validate_set(set, -1.0, provider, "enc", {max_length_rule(10), character_set_rule()});
  CHECK(report.entries[1].rule_violations.size() == 1);
  CHECK(report.entries[2].rule_violations.size() == 1);
  CHECK_FALSE(report.entries[2].accepted());
  CHECK(character_set_rule().check("\xff\xfe"));
  CHECK_FALSE(character_set_rule().check("tab\tand newline\n ok"));
}

TEST_CASE("CSV headers") {
  CHECK(validation_csv_header() == "set_id,variant_id,semantic_similarity,syntax_distance,passed,accepted,notes\n");
  CHECK(syntax_map_csv_header() == "set_id,variant_id,semantic_similarity,syntax_distance\n");
}
