#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "driftlab/error.hpp"
#include "driftlab/format.hpp"
#include "driftlab/hash.hpp"
#include "driftlab/pipeline.hpp"
#include "driftlab/synthetic.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace driftlab;
namespace fs = std::filesystem;

namespace {

AnalysisRun fixture(const testutil::TempDir& dir, std::size_t sets = 3, std::size_t variants = 5) {
  SyntheticOptions opts;
  opts.n_sets = sets;
  opts.variants_per_set = variants;
  const auto ds = build_dataset(default_profiles(0), opts);
  auto run = load_analysis_run(write_dataset(ds, opts, (dir.path() / "fixture").string()));
  run.output_dir = (dir.path() / "out").string();
  run.tsne_iterations = 300;
  return run;
}

}  // namespace

TEST_CASE("score CSV round trip") {
  std::vector<ScoreRow> rows{{"MiniLM-L6", "GPT-2", 0.2, "C1-S1", "v01", "v02", 0.123456789012345678, 0.5},
                             {"enc,comma", "Phi-2", 1.3, "C1-S2", "v01", "v03", 2.0, 0.0}};
  const auto back = scores_from_csv(scores_to_csv(rows));
  REQUIRE(back.size() == 2);
  CHECK(back[0].drift == rows[0].drift);
  CHECK(back[1].encoder == "enc,comma");
  CHECK_THROWS_AS(scores_from_csv("header\n1,2,3\n"), ParameterError);
}

TEST_CASE("records group by model, temperature and origin") {
  std::vector<PromptVariantRecord> records{{"C1", "v02", "A", 0.2, "p", "o1"}, {"C1", "v01", "A", 0.2, "p", "o2"},
                                           {"C1", "v01", "A", 1.3, "p", "o3"}, {"C2", "v01", "B", 0.2, "p", "o4"}};
  const auto groups = group_records(records);
  REQUIRE(groups.size() == 3);
  CHECK(groups[0].model == "A");
  CHECK(groups[0].temperature == 0.2);
  REQUIRE(groups[0].variants.size() == 2);
  CHECK(groups[0].variants[0]->variant_id == "v01");
}

TEST_CASE("full synthetic run writes a complete, hashed manifest") {
  testutil::TempDir dir;
  const auto run = fixture(dir);
  const auto result = run_pipeline(run);
  REQUIRE(result.exit_code == 0);
  CHECK(result.manifest.status == "ok");
  CHECK(result.manifest.completed_stages.size() == 6);
  CHECK(result.manifest.artifacts.size() >= 7);

  const fs::path out = run.output_dir;
  for (const char* name : {"validation.csv", "syntax_map.csv", "matrices.jsonl", "pbss_scores.csv", "stats.csv",
                           "kruskal.csv", "projection.csv", "projection.json", "report.md", "manifest.json"}) {
    CHECK_MESSAGE(fs::exists(out / name), name);
  }
  for (const auto& a : result.manifest.artifacts) {
    const auto content = read_file((out / a.path).string());
    CHECK(sha256_hex(content) == a.sha256);
    CHECK(content.size() == a.bytes);
  }
  CHECK_FALSE(fs::exists(out / ".staging"));
  CHECK_FALSE(fs::exists(out / ".driftlab.lock"));

  const auto manifest = nlohmann::json::parse(read_file((out / "manifest.json").string()));
  CHECK(manifest["status"] == "ok");
  CHECK(manifest["artifacts"].size() == result.manifest.artifacts.size());

  // every heatmap and CDF figure has a CSV sidecar
  for (const auto& a : result.manifest.artifacts) {
    if (a.path.size() > 4 && a.path.ends_with(".svg") && a.path.rfind("projection", 0) != 0) {
      const auto sidecar = a.path.substr(0, a.path.size() - 4) + ".csv";
      CHECK_MESSAGE(fs::exists(out / sidecar), sidecar);
    }
  }
}

TEST_CASE("rerun reproduces identical manifest") {
  testutil::TempDir dir;
  const auto run = fixture(dir);
  const auto a = run_pipeline(run);
  const auto first = read_file(run.output_dir + "/manifest.json");
  const auto b = run_pipeline(run);
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(read_file(run.output_dir + "/manifest.json") == first);
}

TEST_CASE("missing input is a usage error with no output") {
  testutil::TempDir dir;
  AnalysisRun run;
  run.records = {(dir.path() / "absent.jsonl").string()};
  run.output_dir = (dir.path() / "out").string();
  const auto r = run_pipeline(run);
  CHECK(r.exit_code == 2);
  CHECK(r.manifest.failure.find("absent.jsonl") != std::string::npos);
  CHECK_FALSE(fs::exists(run.output_dir));
}

TEST_CASE("unknown model is a usage error") {
  testutil::TempDir dir;
  write_records({{"C1", "v01", "Mystery-9B", 0.2, "p", "out a"}, {"C1", "v02", "Mystery-9B", 0.2, "p", "out b"}},
                dir.file("r.jsonl"));
  AnalysisRun run;
  run.records = {dir.file("r.jsonl")};
  run.output_dir = dir.file("out");
  const auto r = run_pipeline(run);
  CHECK(r.exit_code == 2);
  CHECK(r.manifest.failure.find("Mystery-9B") != std::string::npos);
}

TEST_CASE("a locked output directory is refused") {
  testutil::TempDir dir;
  const auto run = fixture(dir);
  fs::create_directories(run.output_dir);
  { OutputLock lock(run.output_dir); CHECK(run_pipeline(run).exit_code == 2); }
  CHECK(run_pipeline(run).exit_code == 0);
}

TEST_CASE("stage failure records completed stages and discards staged files") {
  testutil::TempDir dir;
  auto run = fixture(dir);
  // drop every response embedding from the cache: embedding fails after validation
  const auto lines = read_file(run.cache_path);
  std::string kept;
  std::istringstream in(lines);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (n++ < 1) kept += line + "\n";
  }
  write_file(run.cache_path, kept);
  const auto r = run_pipeline(run, {Stage::Embed, Stage::Pbss});
  CHECK(r.exit_code == 1);
  CHECK(r.manifest.status == "failed");
  CHECK(r.manifest.completed_stages.empty());
  CHECK_FALSE(fs::exists(fs::path(run.output_dir) / "pbss_scores.csv"));
  CHECK_FALSE(fs::exists(fs::path(run.output_dir) / ".staging"));
  const auto manifest = nlohmann::json::parse(read_file(run.output_dir + "/manifest.json"));
  CHECK(manifest["status"] == "failed");
  CHECK(manifest["artifacts"].empty());
}

TEST_CASE("temperature filter and canonical pairs") {
  testutil::TempDir dir;
  auto run = fixture(dir, 2, 4);
  run.temperatures = {1.3};
  run.pairs = PairSelection::CanonicalVsVariant;
  auto ctx = load_inputs(run);
  for (const auto& r : ctx.records) CHECK(r.temperature == 1.3);
  testutil::TempDir out;
  ArtifactWriter writer(out.path());
  run_pbss(ctx, writer);
  // 4 models x 2 sets x (4 - 1) canonical pairs
  CHECK(ctx.scores.size() == 4 * 2 * 3);
  for (const auto& s : ctx.scores) CHECK(s.variant_i == "v01");
}

TEST_CASE("stats can reuse a scores file") {
  testutil::TempDir dir;
  auto run = fixture(dir);
  REQUIRE(run_pipeline(run, {Stage::Embed, Stage::Pbss}).exit_code == 0);
  const auto scores = run.output_dir + "/pbss_scores.csv";
  const auto saved = dir.file("scores.csv");
  fs::copy_file(scores, saved);
  run.output_dir = dir.file("stats-out");
  const auto r = run_pipeline(run, {Stage::Stats}, saved);
  REQUIRE(r.exit_code == 0);
  const auto kw = read_file(run.output_dir + "/kruskal.csv");
  CHECK(kw.find("All Models,synthetic,All,") != std::string::npos);
  CHECK(kw.find("LegacySmall,synthetic,T=0.2,") != std::string::npos);
  CHECK(run_pipeline(run, {Stage::Stats}, dir.file("nope.csv")).exit_code == 2);
}

TEST_CASE("mock provider pipeline with two encoders adds Combined rows") {
  testutil::TempDir dir;
  auto run = fixture(dir, 2, 4);
  run.provider = "mock";
  run.cache_path.clear();
  run.encoders = {"MiniLM-L6", "all-mpnet-base-v2"};
  run.mock_dim = 32;
  const auto r = run_pipeline(run, {Stage::Embed, Stage::Pbss, Stage::Stats});
  REQUIRE(r.exit_code == 0);
  const auto kw = read_file(run.output_dir + "/kruskal.csv");
  CHECK(kw.find(",Combined,All,") != std::string::npos);
  CHECK(fs::exists(run.output_dir + "/summary.MiniLM-L6.jsonl"));
  CHECK(fs::exists(run.output_dir + "/summary.all-mpnet-base-v2.jsonl"));
}
