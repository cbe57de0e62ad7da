#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "driftlab/core.hpp"
#include "driftlab/pbss.hpp"
#include "driftlab/provider.hpp"
#include "driftlab/stats.hpp"

namespace driftlab {

enum class Stage { Validate, Embed, Pbss, Stats, Project, Report };

std::string_view to_string(Stage stage);

struct ArtifactEntry {
  std::string path;  // relative to the output directory
  std::string stage;
  std::uintmax_t bytes = 0;
  std::string sha256;
};

struct Manifest {
  std::string status;  // "ok" | "failed"
  std::vector<std::string> completed_stages;
  std::vector<ArtifactEntry> artifacts;
  std::vector<std::string> notes;
  std::string failure;
  std::string config_sha256;
};

std::string to_json(const Manifest& manifest);

// Writes artifacts into a staging directory and records their hashes.
// commit() moves them into the output directory; otherwise the destructor
// discards the staging directory.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path output_dir);
  ~ArtifactWriter();
  ArtifactWriter(const ArtifactWriter&) = delete;
  ArtifactWriter& operator=(const ArtifactWriter&) = delete;

  void write(const std::string& relative_path, std::string_view content, Stage stage);
  void commit();

  const std::vector<ArtifactEntry>& entries() const noexcept { return entries_; }
  const std::filesystem::path& output_dir() const noexcept { return output_dir_; }

 private:
  std::filesystem::path output_dir_;
  std::filesystem::path staging_;
  std::vector<ArtifactEntry> entries_;
  bool committed_ = false;
};

// Exclusive lock file inside the output directory for the lifetime of the
// object. A second instance fails with UsageError.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& output_dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

// One scored prompt pair.
struct ScoreRow {
  std::string encoder;
  std::string model;
  double temperature = 0;
  std::string origin;
  std::string variant_i;
  std::string variant_j;
  double drift = 0;
  double hybrid = 0;
};

std::string scores_to_csv(const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> scores_from_csv(std::string_view csv);

// Records grouped into one prompt set per (model, temperature, origin),
// variants sorted by variant_id.
struct RecordGroup {
  std::string model;
  double temperature = 0;
  std::string origin;
  std::vector<const PromptVariantRecord*> variants;
};

std::vector<RecordGroup> group_records(const std::vector<PromptVariantRecord>& records);

// text -> embedding, per encoder.
using EmbeddingTable = std::map<std::string, std::map<std::string, EmbeddingVector>>;

ProviderConfig provider_config(const AnalysisRun& run, const std::string& encoder_id);

struct PipelineContext {
  AnalysisRun run;
  std::vector<ModelGroup> groups;
  std::vector<PromptVariantRecord> records;
  std::vector<PromptSet> prompt_sets;
  EmbeddingTable embeddings;
  std::vector<ScoreRow> scores;
  std::vector<std::string> notes;
  std::string report_md;
};

// Reads every input named by the run (records, prompt sets, groups) and
// applies the temperature filter. Missing inputs raise UsageError.
PipelineContext load_inputs(const AnalysisRun& run);

void run_validate(PipelineContext& ctx, ArtifactWriter& out);
// Embeds every distinct output text once per encoder. With `out`, also
// writes embeddings.jsonl in cache format (usable as a file-provider cache).
void run_embed(PipelineContext& ctx, ArtifactWriter* out = nullptr);
void run_pbss(PipelineContext& ctx, ArtifactWriter& out);
void run_stats(PipelineContext& ctx, ArtifactWriter& out);
void run_project(PipelineContext& ctx, ArtifactWriter& out);

struct PipelineResult {
  int exit_code = 0;
  Manifest manifest;
};

// Runs the requested stages, then writes manifest.json into the output
// directory. Exit codes: 0 success, 1 analysis failure, 2 usage/input error.
// When `scores_csv` is set and Pbss is not requested, Stats reads the scores
// from that file instead.
PipelineResult run_pipeline(const AnalysisRun& run, const std::set<Stage>& stages,
                            const std::string& scores_csv = {});

PipelineResult run_pipeline(const AnalysisRun& run);

}  // namespace driftlab
