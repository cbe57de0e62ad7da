#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace driftlab {

// One generation event: a prompt variant sent to a model at a temperature,
// and the text it produced.
struct PromptVariantRecord {
  std::string origin;
  std::string variant_id;
  std::string model_name;
  double temperature = 0.0;
  std::string prompt;
  std::string output_text;

  bool operator==(const PromptVariantRecord&) const = default;
};

// Throws ParameterError when a record breaks its field invariants.
void check_record(const PromptVariantRecord& record);

struct PbssSummaryRecord {
  std::string origin;
  std::string model;
  double temperature = 0.0;
  double avg_pbss = 0.0;

  bool operator==(const PbssSummaryRecord&) const = default;
};

void check_summary(const PbssSummaryRecord& record);

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

template <typename Record>
struct LoadResult {
  std::vector<Record> records;
  std::vector<LineError> errors;

  std::size_t skipped() const noexcept { return errors.size(); }
};

struct LoadOptions {
  // Strict mode turns the first bad line (or duplicate key) into an error.
  bool strict = false;
};

LoadResult<PromptVariantRecord> load_records(const std::string& path, LoadOptions options = {});
void write_records(const std::vector<PromptVariantRecord>& records, const std::string& path);

LoadResult<PbssSummaryRecord> load_summary(const std::string& path, LoadOptions options = {});
void write_summary(const std::vector<PbssSummaryRecord>& records, const std::string& path);

// Serialized forms, one JSON object without trailing newline.
std::string to_jsonl_line(const PromptVariantRecord& record);
std::string to_jsonl_line(const PbssSummaryRecord& record);

enum class GroupName { LegacySmall, MidAligned, LargeInstructionTuned };

std::string_view to_string(GroupName name);
GroupName parse_group_name(std::string_view text);

struct ModelGroup {
  GroupName name = GroupName::LegacySmall;
  std::vector<std::string> members;
  std::string size_category;

  bool operator==(const ModelGroup&) const = default;
};

// Throws ParameterError unless the groups are non-empty and pairwise disjoint.
void check_partition(const std::vector<ModelGroup>& groups);

const ModelGroup& group_of(std::string_view model_name, const std::vector<ModelGroup>& groups);

// The three tiers used for the reference model pool.
std::vector<ModelGroup> default_groups();

std::vector<ModelGroup> load_groups(const std::string& path);
void write_groups(const std::vector<ModelGroup>& groups, const std::string& path);

enum class PerturbationDimension {
  StylisticShift,
  SyntacticManipulation,
  InstructionalPerturbation,
  ContextualReframing,
  BrokenPrompt,
};

std::string_view to_string(PerturbationDimension dimension);
PerturbationDimension parse_perturbation(std::string_view text);

struct PromptVariant {
  std::string variant_id;
  std::string text;
  std::optional<PerturbationDimension> label;

  bool operator==(const PromptVariant&) const = default;
};

struct PromptSet {
  std::string task_id;
  std::string set_id;
  std::string canonical;
  std::vector<PromptVariant> variants;

  bool operator==(const PromptSet&) const = default;
};

void check_prompt_set(const PromptSet& set);

PromptSet load_prompt_set(const std::string& path);
void write_prompt_set(const PromptSet& set, const std::string& path);

enum class PairSelection {
  AllPairs,            // every i < j within a prompt set
  CanonicalVsVariant,  // first variant (by id) against each other variant
};

std::string_view to_string(PairSelection selection);
PairSelection parse_pair_selection(std::string_view text);

// Reproducible pipeline configuration. Mirrors the JSON config file.
struct AnalysisRun {
  std::vector<std::string> records;
  std::vector<std::string> prompt_sets;
  std::string groups;  // empty: default_groups()
  std::vector<std::string> encoders{"mock"};
  std::string provider = "mock";  // mock | file | remote
  std::string cache_path;
  std::string endpoint;
  std::string mock_mode = "hash";  // hash | lexical
  std::size_t mock_dim = 384;
  std::vector<double> temperatures;  // empty: keep all
  double tau = 0.65;
  double lambda = 0.5;
  std::uint64_t seed = 0;
  std::string output_dir = "driftlab-out";
  PairSelection pairs = PairSelection::AllPairs;
  double perplexity = 30.0;
  std::size_t tsne_iterations = 1000;
  double learning_rate = 200.0;

  bool operator==(const AnalysisRun&) const = default;
};

void check_analysis_run(const AnalysisRun& run);

AnalysisRun parse_analysis_run(std::string_view json_text);
AnalysisRun load_analysis_run(const std::string& path);
std::string to_json(const AnalysisRun& run);

}  // namespace driftlab
