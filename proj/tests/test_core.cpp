#include <doctest.h>

#include <fstream>
#include <random>

#include "driftlab/core.hpp"
#include "driftlab/error.hpp"
#include "driftlab/format.hpp"
#include "test_util.hpp"

using namespace driftlab;

namespace {

PromptVariantRecord sample_record(int i) {
  return {"task-" + std::to_string(i / 4), "v" + std::to_string(i % 4), "GPT-2", i % 2 ? 1.3 : 0.2,
          "Explain the result", "An answer, with \"quotes\" and é " + std::to_string(i)};
}

std::string random_text(std::mt19937_64& rng) {
  static const std::string alphabet = "abc xyz,.\"\\\n\t{}[]\xc3\xa9";
  std::uniform_int_distribution<std::size_t> len(1, 40), pick(0, alphabet.size() - 1);
  std::string s;
  for (std::size_t i = len(rng); i > 0; --i) s += alphabet[pick(rng)];
  // keep multi-byte sequence intact
  if (s.back() == '\xc3') s.back() = 'q';
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i] == '\xc3' && s[i + 1] != '\xa9') s[i] = 'q';
    if (s[i + 1] == '\xa9' && s[i] != '\xc3') s[i + 1] = 'q';
  }
  if (s.front() == '\xa9') s.front() = 'q';
  return s;
}

}  // namespace

TEST_CASE("record round trip is the identity") {
  testutil::TempDir dir;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> temp(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<PromptVariantRecord> records;
    for (int i = 0; i < 12; ++i) {
      records.push_back({random_text(rng) + "o", "v" + std::to_string(i), "m" + std::to_string(trial),
                         temp(rng), random_text(rng), random_text(rng)});
    }
    const auto path = dir.file("r.jsonl");
    write_records(records, path);
    auto loaded = load_records(path, {.strict = true});
    REQUIRE(loaded.errors.empty());
    CHECK(loaded.records == records);
  }
}

TEST_CASE("record lines keep schema field order") {
  const auto line = to_jsonl_line(sample_record(1));
  CHECK(line.find("\"origin\"") < line.find("\"variant_id\""));
  CHECK(line.find("\"variant_id\"") < line.find("\"model_name\""));
  CHECK(line.find("\"temperature\"") < line.find("\"prompt\""));
  CHECK(line.find("\"prompt\"") < line.find("\"output_text\""));
}

TEST_CASE("lenient load collects bad lines, strict load throws") {
  testutil::TempDir dir;
  const auto path = dir.file("r.jsonl");
  std::string content = to_jsonl_line(sample_record(0)) + "\n";
  content += "{not json\n";
  content += R"({"origin":"a","variant_id":"v","model_name":"m","temperature":-1,"prompt":"p","output_text":"o"})" "\n";
  content += to_jsonl_line(sample_record(0)) + "\n";  // duplicate key
  content += "\n";
  content += to_jsonl_line(sample_record(1)) + "\n";
  write_file(path, content);

  const auto lenient = load_records(path);
  CHECK(lenient.records.size() == 2);
  REQUIRE(lenient.errors.size() == 3);
  CHECK(lenient.errors[0].line == 2);
  CHECK(lenient.errors[1].line == 3);
  CHECK(lenient.errors[2].line == 4);
  CHECK_THROWS_AS(load_records(path, {.strict = true}), ParameterError);

  write_file(path, to_jsonl_line(sample_record(0)) + "\n" + to_jsonl_line(sample_record(0)) + "\n");
  CHECK_THROWS_AS(load_records(path, {.strict = true}), ParameterError);
}

TEST_CASE("record invariants") {
  auto r = sample_record(0);
  CHECK_NOTHROW(check_record(r));
  r.temperature = -0.5;
  CHECK_THROWS_AS(check_record(r), ParameterError);
  r = sample_record(0);
  r.model_name = "";
  CHECK_THROWS_AS(check_record(r), ParameterError);
}

TEST_CASE("summary round trip and range") {
  testutil::TempDir dir;
  std::vector<PbssSummaryRecord> rows{{"t1", "GPT-2", 0.2, 0.0}, {"t1", "GPT-2", 1.3, 2.0},
                                      {"t2", "Phi-2", 0.2, 0.1234567890123456789}};
  write_summary(rows, dir.file("s.jsonl"));
  const auto loaded = load_summary(dir.file("s.jsonl"), {.strict = true});
  CHECK(loaded.records == rows);
  CHECK_THROWS_AS(check_summary({"t", "m", 0.2, 2.01}), ParameterError);
  CHECK_THROWS_AS(check_summary({"t", "m", 0.2, -0.01}), ParameterError);
}

TEST_CASE("summary line carries avg_pbss verbatim") {
  const auto line = to_jsonl_line(PbssSummaryRecord{"C1-S1", "Mistral-7B", 1.3, 0.427});
  CHECK(line == R"({"origin":"C1-S1","model":"Mistral-7B","temperature":1.3,"avg_pbss":0.427})");
}

TEST_CASE("default groups partition the ten models") {
  const auto groups = default_groups();
  CHECK_NOTHROW(check_partition(groups));
  std::size_t total = 0;
  for (const auto& g : groups) total += g.members.size();
  CHECK(total == 10);
  CHECK(group_of("GPT-2", groups).name == GroupName::LegacySmall);
  CHECK(group_of("Mistral-7B", groups).name == GroupName::MidAligned);
  CHECK(group_of("GPT-3.5-Turbo", groups).name == GroupName::LargeInstructionTuned);
  CHECK_THROWS_AS(group_of("Unknown-1B", groups), LookupError);
  for (const auto& g : groups) {
    for (const auto& m : g.members) CHECK(group_of(m, groups).name == g.name);
  }
}

TEST_CASE("overlapping groups are rejected") {
  auto groups = default_groups();
  groups[1].members.push_back("GPT-2");
  CHECK_THROWS_AS(check_partition(groups), ParameterError);
}

TEST_CASE("groups file round trip") {
  testutil::TempDir dir;
  write_groups(default_groups(), dir.file("g.json"));
  const auto loaded = load_groups(dir.file("g.json"));
  CHECK(loaded == default_groups());
}

TEST_CASE("prompt set round trip and checks") {
  testutil::TempDir dir;
  PromptSet set{"C1", "C1-S1", "Explain this scan",
                {{"v01", "Explain this scan", std::nullopt},
                 {"v02", "Please explain this scan", PerturbationDimension::StylisticShift},
                 {"v03", "Explain scan", PerturbationDimension::BrokenPrompt}}};
  write_prompt_set(set, dir.file("p.json"));
  CHECK(load_prompt_set(dir.file("p.json")) == set);

  auto bad = set;
  bad.variants.resize(1);
  CHECK_THROWS_AS(check_prompt_set(bad), ParameterError);
  bad = set;
  bad.variants[2].variant_id = "v01";
  CHECK_THROWS_AS(check_prompt_set(bad), ParameterError);
}

TEST_CASE("perturbation labels parse back") {
  for (auto d : {PerturbationDimension::StylisticShift, PerturbationDimension::InstructionalPerturbation,
                 PerturbationDimension::BrokenPrompt}) {
    CHECK(parse_perturbation(to_string(d)) == d);
  }
  CHECK_THROWS_AS(parse_perturbation("Sarcasm"), ParameterError);
}

TEST_CASE("analysis run config round trip and defaults") {
  const auto defaults = parse_analysis_run("{}");
  CHECK(defaults == AnalysisRun{});
  CHECK(defaults.tau == doctest::Approx(0.65));

  AnalysisRun run;
  run.records = {"a.jsonl", "b.jsonl"};
  run.encoders = {"MiniLM-L6", "mpnet"};
  run.temperatures = {0.2, 1.3};
  run.tau = 0.7;
  run.seed = 42;
  run.pairs = PairSelection::CanonicalVsVariant;
  CHECK(parse_analysis_run(to_json(run)) == run);

  CHECK_THROWS_AS(parse_analysis_run(R"({"tau": 2})"), ParameterError);
  CHECK_THROWS_AS(parse_analysis_run(R"({"lambda": -0.1})"), ParameterError);
  CHECK_THROWS_AS(parse_analysis_run("[1,2"), ParameterError);
  CHECK_THROWS_AS(parse_analysis_run(R"({"encoders": []})"), ParameterError);
}
