#include "driftlab/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

#include "driftlab/error.hpp"
#include "driftlab/format.hpp"
#include "driftlab/hash.hpp"
#include "driftlab/report.hpp"
#include "driftlab/text.hpp"
#include "driftlab/tsne.hpp"
#include "driftlab/validation.hpp"
#include "json.hpp"

namespace driftlab {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::Validate: return "validate";
    case Stage::Embed: return "embed";
    case Stage::Pbss: return "pbss";
    case Stage::Stats: return "stats";
    case Stage::Project: return "project";
    case Stage::Report: return "report";
  }
  return "unknown";
}

std::string to_json(const Manifest& m) {
  ordered_json doc;
  doc["tool"] = "driftlab";
  doc["status"] = m.status;
  doc["config_sha256"] = m.config_sha256;
  doc["completed_stages"] = m.completed_stages;
  auto artifacts = ordered_json::array();
  for (const auto& a : m.artifacts) {
    ordered_json e;
    e["path"] = a.path;
    e["stage"] = a.stage;
    e["bytes"] = a.bytes;
    e["sha256"] = a.sha256;
    artifacts.push_back(std::move(e));
  }
  doc["artifacts"] = std::move(artifacts);
  doc["notes"] = m.notes;
  if (!m.failure.empty()) doc["failure"] = m.failure;
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

ArtifactWriter::ArtifactWriter(fs::path output_dir)
    : output_dir_(std::move(output_dir)), staging_(output_dir_ / ".staging") {
  fs::create_directories(output_dir_);
  fs::remove_all(staging_);
  fs::create_directories(staging_);
}

ArtifactWriter::~ArtifactWriter() {
  std::error_code ec;
  fs::remove_all(staging_, ec);
}

void ArtifactWriter::write(const std::string& relative_path, std::string_view content, Stage stage) {
  if (committed_) throw Error("artifact writer already committed");
  const fs::path target = staging_ / relative_path;
  fs::create_directories(target.parent_path());
  write_file(target.string(), content);
  ArtifactEntry entry{relative_path, std::string(to_string(stage)), content.size(), sha256_hex(content)};
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const ArtifactEntry& e) { return e.path == relative_path; });
  if (it != entries_.end()) {
    *it = std::move(entry);
  } else {
    entries_.push_back(std::move(entry));
  }
}

void ArtifactWriter::commit() {
  std::sort(entries_.begin(), entries_.end(),
            [](const ArtifactEntry& a, const ArtifactEntry& b) { return a.path < b.path; });
  for (const auto& e : entries_) {
    const fs::path dest = output_dir_ / e.path;
    fs::create_directories(dest.parent_path());
    fs::rename(staging_ / e.path, dest);
  }
  fs::remove_all(staging_);
  committed_ = true;
}

OutputLock::OutputLock(const fs::path& output_dir) : path_(output_dir / ".driftlab.lock") {
  fs::create_directories(output_dir);
  fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd_ < 0) {
    throw UsageError("output directory " + output_dir.string() +
                     " is locked by another run (remove " + path_.string() + " if stale)");
  }
}

OutputLock::~OutputLock() {
  if (fd_ >= 0) ::close(fd_);
  std::error_code ec;
  fs::remove(path_, ec);
}

// ---------------------------------------------------------------------------

std::string scores_to_csv(const std::vector<ScoreRow>& rows) {
  std::string out =
      csv_row({"encoder", "model", "temperature", "origin", "variant_i", "variant_j", "drift", "hybrid"});
  for (const auto& r : rows) {
    out += csv_row({r.encoder, r.model, format_double(r.temperature), r.origin, r.variant_i, r.variant_j,
                    format_double(r.drift), format_double(r.hybrid)});
  }
  return out;
}

std::vector<ScoreRow> scores_from_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  std::vector<ScoreRow> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || trim(line).empty()) continue;
    const auto c = csv_split(line);
    if (c.size() != 8) throw ParameterError("scores CSV line " + std::to_string(line_no) + " needs 8 fields");
    try {
      rows.push_back({c[0], c[1], std::stod(c[2]), c[3], c[4], c[5], std::stod(c[6]), std::stod(c[7])});
    } catch (const std::logic_error&) {
      throw ParameterError("scores CSV line " + std::to_string(line_no) + " has a bad number");
    }
  }
  return rows;
}

std::vector<RecordGroup> group_records(const std::vector<PromptVariantRecord>& records) {
  std::map<std::tuple<std::string, double, std::string>, RecordGroup> groups;
  for (const auto& r : records) {
    auto& g = groups[{r.model_name, r.temperature, r.origin}];
    g.model = r.model_name;
    g.temperature = r.temperature;
    g.origin = r.origin;
    g.variants.push_back(&r);
  }
  std::vector<RecordGroup> out;
  for (auto& [key, g] : groups) {
    std::sort(g.variants.begin(), g.variants.end(),
              [](const PromptVariantRecord* a, const PromptVariantRecord* b) { return a->variant_id < b->variant_id; });
    out.push_back(std::move(g));
  }
  return out;
}

ProviderConfig provider_config(const AnalysisRun& run, const std::string& encoder_id) {
  ProviderConfig config;
  config.kind = parse_provider_kind(run.provider);
  config.cache_path = run.cache_path;
  config.endpoint = run.endpoint;
  if (config.endpoint.empty()) {
    if (const char* env = std::getenv("DRIFTLAB_BRIDGE_URL")) config.endpoint = env;
  }
  config.mock_dim = run.mock_dim;
  config.mock_mode = parse_mock_mode(run.mock_mode);
  // Each mock encoder gets its own stream so encoders disagree like real ones.
  const auto digest = sha256(encoder_id);
  std::uint64_t salt = 0;
  for (int i = 0; i < 8; ++i) salt = salt << 8 | digest[static_cast<std::size_t>(i)];
  config.mock_seed = run.seed ^ salt;
  return config;
}

// ---------------------------------------------------------------------------

namespace {

std::string slug(std::string_view text) {
  std::string out;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    out += (std::isalnum(u) || c == '-' || c == '.') ? c : '_';
  }
  return out;
}

std::string temp_label(double t) { return "T=" + format_double(t); }

}  // namespace

PipelineContext load_inputs(const AnalysisRun& run) {
  try {
    check_analysis_run(run);
  } catch (const ParameterError& e) {
    throw UsageError(std::string("invalid configuration: ") + e.what());
  }
  std::vector<std::string> missing;
  auto require = [&](const std::string& path) {
    if (!path.empty() && !fs::exists(path)) missing.push_back(path);
  };
  for (const auto& p : run.records) require(p);
  for (const auto& p : run.prompt_sets) require(p);
  require(run.groups);
  if (run.provider == "file") {
    if (run.cache_path.empty()) throw UsageError("file provider needs cache_path");
    require(run.cache_path);
  }
  if (!missing.empty()) {
    std::string msg = "missing input path(s):";
    for (const auto& m : missing) msg += " " + m;
    throw UsageError(msg);
  }

  PipelineContext ctx;
  ctx.run = run;
  try {
    ctx.groups = run.groups.empty() ? default_groups() : load_groups(run.groups);
    for (const auto& p : run.prompt_sets) ctx.prompt_sets.push_back(load_prompt_set(p));
    for (const auto& path : run.records) {
      auto loaded = load_records(path);
      if (loaded.skipped()) {
        ctx.notes.push_back(path + ": skipped " + std::to_string(loaded.skipped()) + " malformed line(s)");
      }
      std::size_t blank = 0;
      for (auto& r : loaded.records) {
        if (trim(r.output_text).empty()) {
          ++blank;
          continue;
        }
        if (!run.temperatures.empty() &&
            std::none_of(run.temperatures.begin(), run.temperatures.end(),
                         [&](double t) { return std::abs(t - r.temperature) <= 1e-9; })) {
          continue;
        }
        ctx.records.push_back(std::move(r));
      }
      if (blank) ctx.notes.push_back(path + ": dropped " + std::to_string(blank) + " record(s) with empty output");
    }
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  std::set<std::string> models;
  for (const auto& r : ctx.records) models.insert(r.model_name);
  for (const auto& m : models) {
    try {
      group_of(m, ctx.groups);
    } catch (const LookupError& e) {
      throw UsageError(std::string(e.what()) + "; add it to the groups file");
    }
  }
  return ctx;
}

void run_validate(PipelineContext& ctx, ArtifactWriter& out) {
  if (ctx.prompt_sets.empty()) {
    ctx.notes.push_back("validate: no prompt sets configured");
    return;
  }
  const auto& encoder = ctx.run.encoders.front();
  auto provider = make_provider(provider_config(ctx.run, encoder));
  std::string validation = validation_csv_header();
  std::string syntax_map = syntax_map_csv_header();
  std::size_t total = 0, passed = 0, accepted = 0;
  for (const auto& set : ctx.prompt_sets) {
    const auto report = validate_set(set, ctx.run.tau, *provider, encoder);
    validation += validation_csv_rows(report);
    syntax_map += syntax_map_csv_rows(report);
    for (const auto& e : report.entries) {
      ++total;
      passed += e.passed;
      accepted += e.accepted();
    }
  }
  out.write("validation.csv", validation, Stage::Validate);
  out.write("syntax_map.csv", syntax_map, Stage::Validate);
  ctx.report_md += "## Prompt validation\n\n";
  ctx.report_md += "- threshold: " + format_double(ctx.run.tau) + " (encoder " + encoder + ")\n";
  ctx.report_md += "- variants: " + std::to_string(total) + ", above threshold: " + std::to_string(passed) +
                   ", accepted: " + std::to_string(accepted) + "\n\n";
}

void run_embed(PipelineContext& ctx, ArtifactWriter* out) {
  std::set<std::string> unique;
  for (const auto& r : ctx.records) unique.insert(r.output_text);
  if (unique.empty()) throw Error("no records to embed");
  const std::vector<std::string> texts(unique.begin(), unique.end());
  for (const auto& encoder : ctx.run.encoders) {
    auto provider = make_provider(provider_config(ctx.run, encoder));
    const auto vectors = provider->embed({texts, encoder});
    auto& table = ctx.embeddings[encoder];
    for (std::size_t i = 0; i < texts.size(); ++i) table.insert_or_assign(texts[i], vectors[i]);
  }
  if (out) {
    std::string lines;
    for (const auto& encoder : ctx.run.encoders) {
      for (const auto& [text, v] : ctx.embeddings.at(encoder)) lines += cache_line(text, v) + "\n";
    }
    out->write("embeddings.jsonl", lines, Stage::Embed);
  }
}

void run_pbss(PipelineContext& ctx, ArtifactWriter& out) {
  if (ctx.embeddings.empty()) run_embed(ctx);
  const auto groups = group_records(ctx.records);
  std::string matrices;
  std::string outliers = csv_row({"encoder", "model", "temperature", "origin", "variant_i", "variant_j",
                                  "drift", "z_global", "z_row"});
  std::set<std::string> heatmapped;
  ctx.scores.clear();

  for (std::size_t e = 0; e < ctx.run.encoders.size(); ++e) {
    const auto& encoder = ctx.run.encoders[e];
    const auto& table = ctx.embeddings.at(encoder);
    std::vector<PbssSummaryRecord> summary;
    std::map<std::string, std::vector<double>> pooled;  // model -> drift values
    std::map<std::pair<double, std::string>, std::vector<double>> by_temp;

    for (const auto& g : groups) {
      if (g.variants.size() < 2) {
        ctx.notes.push_back("pbss: " + g.model + " " + g.origin + " " + temp_label(g.temperature) +
                            " has fewer than 2 variants");
        continue;
      }
      std::vector<EmbeddingVector> vectors;
      std::vector<std::string> ids;
      for (const auto* r : g.variants) {
        vectors.push_back(table.at(r->output_text));
        ids.push_back(r->variant_id);
      }
      const auto m = drift_matrix(vectors, ids);
      check_drift_matrix(m);
      const auto s = summarize(m);
      summary.push_back({g.origin, g.model, g.temperature, s.mean});

      ordered_json line;
      line["encoder"] = encoder;
      line["model"] = g.model;
      line["temperature"] = g.temperature;
      line["origin"] = g.origin;
      line["mean"] = s.mean;
      line["max"] = s.max;
      line["matrix"] = ordered_json::parse(to_json(m));
      matrices += line.dump() + "\n";

      const auto n = m.size();
      const bool row_ok = n >= 3;
      const auto zg = zscore(m, ZScoreMode::Global);
      const auto zr = row_ok ? zscore(m, ZScoreMode::Row) : ZScoreMatrix<double>{};
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
          const bool selected = ctx.run.pairs == PairSelection::AllPairs || i == 0;
          const double d = m.scores(i, j);
          if (selected) {
            ctx.scores.push_back({encoder, g.model, g.temperature, g.origin, ids[static_cast<std::size_t>(i)],
                                  ids[static_cast<std::size_t>(j)], d, hybrid_score(1.0 - d, d, ctx.run.lambda)});
            pooled[g.model].push_back(d);
            by_temp[{g.temperature, g.model}].push_back(d);
          }
          if (!zg.degenerate && std::abs(zg.z(i, j)) >= 2.0) {
            outliers += csv_row({encoder, g.model, format_double(g.temperature), g.origin,
                                 ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)],
                                 format_double(d), format_double(zg.z(i, j)),
                                 row_ok && !zr.degenerate_rows[static_cast<std::size_t>(i)]
                                     ? format_double(zr.z(i, j))
                                     : "NA"});
          }
        }
      }

      // Heatmaps: first encoder, first prompt set per model.
      if (e == 0 && heatmapped.insert(g.model).second) {
        const std::string stem = "heatmaps/" + slug(g.model) + "__" + slug(g.origin) + "__T" +
                                 slug(format_double(g.temperature));
        const std::string title = g.model + " | " + g.origin + " | " + temp_label(g.temperature);
        Eigen::MatrixXd similarity = Eigen::MatrixXd::Ones(n, n) - m.scores;
        auto raw = render_heatmap(similarity, ids, {HeatmapSource::RawSimilarity, n <= 20, encoder, title});
        out.write(stem + "__raw.svg", raw.svg, Stage::Pbss);
        out.write(stem + "__raw.csv", raw.csv, Stage::Pbss);
        auto glob = render_heatmap(zg.z, ids, {HeatmapSource::GlobalZ, n <= 20, encoder, title});
        out.write(stem + "__global_z.svg", glob.svg, Stage::Pbss);
        out.write(stem + "__global_z.csv", glob.csv, Stage::Pbss);
        if (row_ok) {
          auto row = render_heatmap(zr.z, ids, {HeatmapSource::RowZ, n <= 20, encoder, title});
          out.write(stem + "__row_z.svg", row.svg, Stage::Pbss);
          out.write(stem + "__row_z.csv", row.csv, Stage::Pbss);
        }
      }
    }

    out.write("summary." + slug(encoder) + ".jsonl",
              [&] {
                std::string s;
                for (const auto& r : summary) s += to_jsonl_line(r) + "\n";
                return s;
              }(),
              Stage::Pbss);

    if (!pooled.empty()) {
      std::vector<std::pair<std::string, EmpiricalCdf<double>>> curves;
      for (auto& [model, values] : pooled) curves.emplace_back(model, EmpiricalCdf<double>(values));
      auto fig = render_cdf(curves, "PBSS CDF | " + encoder + " | all temperatures");
      out.write("cdf/" + slug(encoder) + "__all.svg", fig.svg, Stage::Pbss);
      out.write("cdf/" + slug(encoder) + "__all.csv", fig.csv, Stage::Pbss);

      std::map<double, std::vector<std::pair<std::string, EmpiricalCdf<double>>>> per_temp;
      for (auto& [key, values] : by_temp) per_temp[key.first].emplace_back(key.second, EmpiricalCdf<double>(values));
      for (auto& [t, c] : per_temp) {
        auto f = render_cdf(c, "PBSS CDF | " + encoder + " | " + temp_label(t));
        out.write("cdf/" + slug(encoder) + "__T" + slug(format_double(t)) + ".svg", f.svg, Stage::Pbss);
        out.write("cdf/" + slug(encoder) + "__T" + slug(format_double(t)) + ".csv", f.csv, Stage::Pbss);
      }
    }
  }
  out.write("matrices.jsonl", matrices, Stage::Pbss);
  out.write("pbss_scores.csv", scores_to_csv(ctx.scores), Stage::Pbss);
  out.write("zscore_outliers.csv", outliers, Stage::Pbss);
}

namespace {

struct KruskalRow {
  std::string group_set, encoder, slice;
  std::optional<KruskalResult> result;
  std::string note;
};

}  // namespace

void run_stats(PipelineContext& ctx, ArtifactWriter& out) {
  if (ctx.scores.empty()) throw Error("stats: no PBSS scores available");

  std::vector<std::string> encoders;
  std::set<double> temperatures;
  std::set<std::string> models;
  // (encoder, model) -> temperature -> values; nullopt temperature = pooled.
  std::map<std::pair<std::string, std::string>, std::map<std::optional<double>, std::vector<double>>> values;
  for (const auto& r : ctx.scores) {
    if (std::find(encoders.begin(), encoders.end(), r.encoder) == encoders.end()) encoders.push_back(r.encoder);
    temperatures.insert(r.temperature);
    models.insert(r.model);
    auto& slot = values[{r.encoder, r.model}];
    slot[r.temperature].push_back(r.drift);
    slot[std::nullopt].push_back(r.drift);
  }
  auto group_name = [&](const std::string& model) -> GroupName {
    try {
      return group_of(model, ctx.groups).name;
    } catch (const LookupError& e) {
      throw UsageError(std::string(e.what()) + "; add it to the groups file");
    }
  };

  std::string stats = csv_row({"model", "group", "encoder", "temperature", "count", "mean", "std_dev", "q25", "q75"});
  std::string table;
  for (const auto& encoder : encoders) {
    for (const auto& model : models) {
      auto it = values.find({encoder, model});
      if (it == values.end()) continue;
      for (const auto& [temp, v] : it->second) {
        const auto d = describe(v);
        stats += csv_row({model, std::string(to_string(group_name(model))), encoder,
                          temp ? format_double(*temp) : "all", std::to_string(d.count), format_double(d.mean),
                          format_double(d.std_dev), format_double(d.q25), format_double(d.q75)});
        if (!temp) table += encoder + "," + render_stats_row(model, d);
      }
    }
  }
  out.write("stats.csv", stats, Stage::Stats);

  auto samples_for = [&](const std::string& encoder, const std::vector<std::string>& members,
                         std::optional<double> temp) {
    std::vector<ScoreSample> samples;
    for (const auto& model : members) {
      auto it = values.find({encoder, model});
      if (it == values.end()) continue;
      auto v = it->second.find(temp);
      if (v == it->second.end()) continue;
      samples.push_back({v->second, model, group_name(model), encoder, temp});
    }
    return samples;
  };

  std::vector<std::pair<std::string, std::vector<std::string>>> group_sets;
  for (const auto& g : ctx.groups) {
    std::vector<std::string> present;
    for (const auto& m : g.members) {
      if (models.count(m)) present.push_back(m);
    }
    if (present.size() >= 2) group_sets.emplace_back(std::string(to_string(g.name)), present);
  }
  if (models.size() >= 2) group_sets.emplace_back("All Models", std::vector<std::string>(models.begin(), models.end()));

  std::vector<std::optional<double>> slices{std::nullopt};
  for (double t : temperatures) slices.emplace_back(t);

  std::vector<KruskalRow> rows;
  for (const auto& [set_name, members] : group_sets) {
    for (const auto& slice : slices) {
      const std::string slice_name = slice ? temp_label(*slice) : "All";
      std::vector<std::vector<ScoreSample>> per_encoder;
      auto test = [&](const std::string& encoder_label, const std::vector<ScoreSample>& samples) {
        KruskalRow row{set_name, encoder_label, slice_name, std::nullopt, {}};
        try {
          row.result = kruskal_wallis(samples);
          if (row.result->small_sample) row.note = "some group has fewer than 5 scores";
        } catch (const Error& e) {
          row.note = e.what();
        }
        rows.push_back(std::move(row));
      };
      for (const auto& encoder : encoders) {
        auto samples = samples_for(encoder, members, slice);
        test(encoder, samples);
        per_encoder.push_back(std::move(samples));
      }
      if (encoders.size() >= 2) test("Combined", pool_combined(per_encoder));
    }
  }

  std::string kw = csv_row({"group_set", "encoder", "slice", "H", "p", "df", "N", "tie_correction", "note"});
  std::string kw_table;
  for (const auto& r : rows) {
    if (r.result) {
      std::size_t n = 0;
      for (auto s : r.result->group_sizes) n += s;
      kw += csv_row({r.group_set, r.encoder, r.slice, format_double(r.result->h), format_double(r.result->p),
                     std::to_string(r.result->df), std::to_string(n), format_double(r.result->tie_correction), r.note});
      kw_table += render_kruskal_row(r.group_set, r.encoder, r.slice, r.result->h, r.result->p);
    } else {
      kw += csv_row({r.group_set, r.encoder, r.slice, "NA", "NA", "", "", "", r.note});
      kw_table += csv_row({r.group_set, r.encoder, r.slice, "NA", "NA"});
    }
  }
  out.write("kruskal.csv", kw, Stage::Stats);

  ctx.report_md += "## Descriptive statistics (pooled over temperatures)\n\n```\n";
  ctx.report_md += "encoder,model,count,mean,std_dev,q25,q75\n" + table + "```\n\n";
  ctx.report_md += "## Kruskal-Wallis tests across models\n\n```\ngroup_set,encoder,slice,H,p\n" + kw_table + "```\n\n";
}

void run_project(PipelineContext& ctx, ArtifactWriter& out) {
  if (ctx.embeddings.empty()) run_embed(ctx);
  constexpr std::size_t kMaxPoints = 2000;
  const auto& encoder = ctx.run.encoders.front();
  const auto& table = ctx.embeddings.at(encoder);

  std::vector<const PromptVariantRecord*> chosen;
  const std::size_t stride = (ctx.records.size() + kMaxPoints - 1) / kMaxPoints;
  for (std::size_t i = 0; i < ctx.records.size(); i += std::max<std::size_t>(stride, 1)) {
    chosen.push_back(&ctx.records[i]);
  }
  if (stride > 1) ctx.notes.push_back("project: subsampled every " + std::to_string(stride) + "th record");
  const auto n = static_cast<Eigen::Index>(chosen.size());
  const double max_perplexity = static_cast<double>(n - 1) / 3.0;
  if (n < 4 || max_perplexity <= 1.0) {
    ctx.notes.push_back("project: too few points for t-SNE");
    return;
  }
  const auto dim = table.at(chosen.front()->output_text).dim();
  Eigen::MatrixXd x(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = table.at(chosen[static_cast<std::size_t>(i)]->output_text).values().transpose();
  }
  TsneConfig config;
  config.perplexity = std::min(ctx.run.perplexity, max_perplexity);
  config.iterations = ctx.run.tsne_iterations;
  config.learning_rate = ctx.run.learning_rate;
  config.seed = ctx.run.seed;
  const auto result = tsne(x, config);

  std::vector<ProjectedPoint> points;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto* r = chosen[static_cast<std::size_t>(i)];
    points.push_back({result.y(i, 0), result.y(i, 1),
                      r->model_name + "/" + r->origin + "/" + r->variant_id + "/" + temp_label(r->temperature),
                      r->model_name, r->origin});
  }
  out.write("projection.csv", projection_csv(points), Stage::Project);
  out.write("projection_by_model.svg", render_scatter(points, ScatterColoring::ByModel, "t-SNE by model | " + encoder),
            Stage::Project);
  out.write("projection_by_origin.svg",
            render_scatter(points, ScatterColoring::ByOrigin, "t-SNE by prompt set | " + encoder), Stage::Project);

  ordered_json quality;
  quality["encoder"] = encoder;
  quality["points"] = n;
  quality["perplexity"] = config.perplexity;
  quality["iterations"] = config.iterations;
  quality["kl_divergence"] = result.kl;
  if (n > 5) quality["neighborhood_preservation_k5"] = neighborhood_preservation(x, result.y, 5);
  out.write("projection.json", quality.dump(2) + "\n", Stage::Project);

  ctx.report_md += "## Projection\n\n- points: " + std::to_string(n) + ", perplexity " +
                   format_double(config.perplexity) + ", final KL " + format_fixed(result.kl, 4) + "\n\n";
}

// ---------------------------------------------------------------------------

PipelineResult run_pipeline(const AnalysisRun& run, const std::set<Stage>& stages, const std::string& scores_csv) {
  PipelineResult result;
  result.manifest.status = "failed";
  result.manifest.config_sha256 = sha256_hex(to_json(run));

  PipelineContext ctx;
  try {
    if (!scores_csv.empty() && !fs::exists(scores_csv)) throw UsageError("missing input path(s): " + scores_csv);
    ctx = load_inputs(run);
    if (!scores_csv.empty()) ctx.scores = scores_from_csv(read_file(scores_csv));
  } catch (const Error& e) {
    result.exit_code = 2;
    result.manifest.failure = e.what();
    return result;
  }

  std::optional<OutputLock> lock;
  try {
    lock.emplace(run.output_dir);
  } catch (const Error& e) {
    result.exit_code = 2;
    result.manifest.failure = e.what();
    return result;
  }

  auto& manifest = result.manifest;
  try {
    ArtifactWriter out(run.output_dir);
    ctx.report_md = "# Prompt drift report\n\n";
    for (Stage stage : {Stage::Validate, Stage::Embed, Stage::Pbss, Stage::Stats, Stage::Project, Stage::Report}) {
      if (!stages.count(stage)) continue;
      switch (stage) {
        case Stage::Validate: run_validate(ctx, out); break;
        case Stage::Embed: run_embed(ctx, &out); break;
        case Stage::Pbss: run_pbss(ctx, out); break;
        case Stage::Stats: run_stats(ctx, out); break;
        case Stage::Project: run_project(ctx, out); break;
        case Stage::Report: {
          std::string md = ctx.report_md;
          if (!ctx.notes.empty()) {
            md += "## Notes\n\n";
            for (const auto& n : ctx.notes) md += "- " + n + "\n";
          }
          out.write("report.md", md, Stage::Report);
          break;
        }
      }
      manifest.completed_stages.emplace_back(to_string(stage));
    }
    out.commit();
    manifest.artifacts = out.entries();
    manifest.status = "ok";
  } catch (const UsageError& e) {
    result.exit_code = 2;
    manifest.failure = e.what();
  } catch (const std::exception& e) {
    result.exit_code = 1;
    manifest.failure = e.what();
  }
  manifest.notes = ctx.notes;
  try {
    write_file((fs::path(run.output_dir) / "manifest.json").string(), to_json(manifest));
  } catch (const Error& e) {
    if (result.exit_code == 0) result.exit_code = 1;
    manifest.failure = e.what();
  }
  return result;
}

PipelineResult run_pipeline(const AnalysisRun& run) {
  return run_pipeline(run, {Stage::Validate, Stage::Embed, Stage::Pbss, Stage::Stats, Stage::Project, Stage::Report});
}

}  // namespace driftlab
