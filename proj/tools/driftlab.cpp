// driftlab: prompt-sensitivity drift analysis from the command line.
//
//   driftlab report --input records.jsonl --prompt-set ps.json --output-dir out
//   driftlab synth --output-dir fixture && driftlab report --config fixture/config.json
//
// Exit codes: 0 ok, 1 analysis failure, 2 usage or input error.

#include <CLI11.hpp>

#include <iostream>
#include <set>

#include "driftlab/error.hpp"
#include "driftlab/pipeline.hpp"
#include "driftlab/synthetic.hpp"

using namespace driftlab;

namespace {

struct Flags {
  std::string config;
  std::vector<std::string> input;
  std::vector<std::string> prompt_sets;
  std::string groups;
  std::string output_dir;
  std::vector<std::string> encoders;
  std::vector<double> temperatures;
  std::uint64_t seed = 0;
  std::string provider;
  std::string cache;
  std::string endpoint;
  std::string mock_mode;
  std::size_t mock_dim = 0;
  double tau = 0;
  double lambda = 0;
  std::string pairs;
  double perplexity = 0;
  std::size_t iterations = 0;
  double learning_rate = 0;
  std::string scores;
  // synth
  std::size_t sets = 5;
  std::size_t variants = 6;
};

void add_shared(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "AnalysisRun JSON; flags override its values");
  cmd->add_option("--input", f.input, "response records (JSONL), repeatable");
  cmd->add_option("--output-dir", f.output_dir, "artifact directory");
  cmd->add_option("--encoder", f.encoders, "encoder id, repeatable");
  cmd->add_option("--temperature", f.temperatures, "keep only these temperatures");
  cmd->add_option("--seed", f.seed, "seed for mock embeddings and t-SNE");
  cmd->add_option("--prompt-set", f.prompt_sets, "prompt set JSON, repeatable");
  cmd->add_option("--groups", f.groups, "model groups JSON");
  cmd->add_option("--provider", f.provider, "mock | file | remote");
  cmd->add_option("--cache", f.cache, "embedding cache (JSONL)");
  cmd->add_option("--endpoint", f.endpoint, "bridge URL (default: $DRIFTLAB_BRIDGE_URL)");
  cmd->add_option("--mock-mode", f.mock_mode, "hash | lexical");
  cmd->add_option("--mock-dim", f.mock_dim, "mock embedding dimension");
  cmd->add_option("--tau", f.tau, "prompt validation threshold");
  cmd->add_option("--lambda", f.lambda, "hybrid score weight");
  cmd->add_option("--pairs", f.pairs, "all | canonical");
  cmd->add_option("--perplexity", f.perplexity, "t-SNE perplexity");
  cmd->add_option("--iterations", f.iterations, "t-SNE iterations");
  cmd->add_option("--learning-rate", f.learning_rate, "t-SNE learning rate");
}

AnalysisRun build_run(const CLI::App* cmd, const Flags& f) {
  AnalysisRun run = f.config.empty() ? AnalysisRun{} : load_analysis_run(f.config);
  auto given = [&](const char* name) { return cmd->count(name) > 0; };
  if (given("--input")) run.records = f.input;
  if (given("--prompt-set")) run.prompt_sets = f.prompt_sets;
  if (given("--groups")) run.groups = f.groups;
  if (given("--output-dir")) run.output_dir = f.output_dir;
  if (given("--encoder")) run.encoders = f.encoders;
  if (given("--temperature")) run.temperatures = f.temperatures;
  if (given("--seed")) run.seed = f.seed;
  if (given("--provider")) run.provider = f.provider;
  if (given("--cache")) run.cache_path = f.cache;
  if (given("--endpoint")) run.endpoint = f.endpoint;
  if (given("--mock-mode")) run.mock_mode = f.mock_mode;
  if (given("--mock-dim")) run.mock_dim = f.mock_dim;
  if (given("--tau")) run.tau = f.tau;
  if (given("--lambda")) run.lambda = f.lambda;
  if (given("--pairs")) run.pairs = parse_pair_selection(f.pairs);
  if (given("--perplexity")) run.perplexity = f.perplexity;
  if (given("--iterations")) run.tsne_iterations = f.iterations;
  if (given("--learning-rate")) run.learning_rate = f.learning_rate;
  return run;
}

int finish(const PipelineResult& result, const AnalysisRun& run) {
  if (result.exit_code == 0) {
    std::cout << "ok: " << result.manifest.artifacts.size() << " artifact(s) in " << run.output_dir << "\n";
  } else {
    std::cerr << "driftlab: " << result.manifest.failure << "\n";
  }
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"driftlab: prompt-sensitivity drift analysis"};
  app.require_subcommand(1);
  Flags f;

  struct Command {
    const char* name;
    const char* help;
    std::set<Stage> stages;
  };
  const std::vector<Command> commands{
      {"validate", "score prompt variants against their canonical prompt", {Stage::Validate}},
      {"embed", "embed every response text", {Stage::Embed}},
      {"pbss", "drift matrices, z-scores, heatmaps and CDFs", {Stage::Embed, Stage::Pbss}},
      {"stats", "descriptive statistics and Kruskal-Wallis tests", {Stage::Embed, Stage::Pbss, Stage::Stats}},
      {"project", "t-SNE projection of response embeddings", {Stage::Embed, Stage::Project}},
      {"report", "full pipeline and report.md",
       {Stage::Validate, Stage::Embed, Stage::Pbss, Stage::Stats, Stage::Project, Stage::Report}},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_shared(sub, f);
    if (std::string(c.name) == "stats") sub->add_option("--scores", f.scores, "reuse a pbss_scores.csv");
    subs.push_back(sub);
  }
  auto* synth = app.add_subcommand("synth", "write the synthetic two-tier fixture");
  synth->add_option("--output-dir", f.output_dir, "fixture directory")->required();
  synth->add_option("--seed", f.seed, "generator seed");
  synth->add_option("--sets", f.sets, "prompt sets per model");
  synth->add_option("--variants", f.variants, "variants per prompt set");
  synth->add_option("--temperature", f.temperatures, "temperatures to emit");
  synth->add_option("--encoder", f.encoders, "encoder id for the response embeddings")->expected(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      SyntheticOptions opts;
      opts.seed = f.seed;
      opts.n_sets = f.sets;
      opts.variants_per_set = f.variants;
      if (!f.temperatures.empty()) opts.temperatures = f.temperatures;
      if (!f.encoders.empty()) opts.encoder_id = f.encoders.front();
      const auto dataset = build_dataset(default_profiles(f.seed), opts);
      const auto config = write_dataset(dataset, opts, f.output_dir);
      std::cout << "ok: " << dataset.records.size() << " records; config " << config << "\n";
      return 0;
    }
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      AnalysisRun run;
      try {
        run = build_run(subs[i], f);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      auto stages = commands[i].stages;
      if (!f.scores.empty()) stages = {Stage::Stats};
      return finish(run_pipeline(run, stages, f.scores), run);
    }
  } catch (const UsageError& e) {
    std::cerr << "driftlab: " << e.what() << "\n";
    return 2;
  } catch (const ParameterError& e) {
    std::cerr << "driftlab: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "driftlab: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "driftlab: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
