#include "driftlab/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <random>

#include "driftlab/error.hpp"
#include "driftlab/format.hpp"
#include "driftlab/pbss.hpp"

namespace driftlab {

namespace {

std::mt19937_64 derived_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return std::mt19937_64(seq);
}

Eigen::VectorXd gaussian(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  return v;
}

Eigen::VectorXd unit(const Eigen::VectorXd& v) { return normalize(v).values(); }

constexpr std::uint64_t kBaseTag = 0xBA5E;
constexpr std::uint64_t kSetTag = 0x5E7;
constexpr std::uint64_t kTextTag = 0x7E47;

}  // namespace

void check_profile(const SyntheticModelProfile& p) {
  if (p.name.empty()) throw ParameterError("synthetic profile needs a name");
  if (!(p.intra_set_noise >= 0.0)) throw ParameterError("intra_set_noise must be >= 0");
  if (!(p.anchor_spread >= 0.0)) throw ParameterError("anchor_spread must be >= 0");
  if (p.dim < 8) throw ParameterError("synthetic dimension must be >= 8");
}

std::vector<Eigen::MatrixXd> generate(const SyntheticModelProfile& profile, std::size_t n_sets,
                                      std::size_t variants_per_set, std::uint64_t stream) {
  check_profile(profile);
  if (n_sets < 1) throw ParameterError("n_sets must be >= 1");
  if (variants_per_set < 2) throw ParameterError("variants_per_set must be >= 2");
  auto base_rng = derived_stream(profile.seed, kBaseTag, 0, 0);
  const Eigen::VectorXd base = unit(gaussian(base_rng, profile.dim));

  std::vector<Eigen::MatrixXd> sets;
  sets.reserve(n_sets);
  for (std::size_t s = 0; s < n_sets; ++s) {
    // The anchor depends on the set only; the variant noise also on `stream`.
    auto anchor_rng = derived_stream(profile.seed, kSetTag, s, 0);
    const Eigen::VectorXd anchor = unit(base + profile.anchor_spread * gaussian(anchor_rng, profile.dim));
    auto rng = derived_stream(profile.seed, kSetTag, s, stream + 1);
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(variants_per_set), static_cast<Eigen::Index>(profile.dim));
    for (std::size_t v = 0; v < variants_per_set; ++v) {
      rows.row(static_cast<Eigen::Index>(v)) =
          unit(anchor + profile.intra_set_noise * gaussian(rng, profile.dim)).transpose();
    }
    sets.push_back(std::move(rows));
  }
  return sets;
}

std::vector<EmbeddingVector> to_embeddings(const Eigen::MatrixXd& unit_rows, const std::string& encoder_id) {
  std::vector<EmbeddingVector> out;
  out.reserve(static_cast<std::size_t>(unit_rows.rows()));
  for (Eigen::Index i = 0; i < unit_rows.rows(); ++i) {
    out.push_back(normalize(Eigen::VectorXd(unit_rows.row(i).transpose()), encoder_id));
  }
  return out;
}

std::vector<double> set_mean_drifts(const SyntheticModelProfile& profile, std::size_t n_sets,
                                    std::size_t variants_per_set, std::uint64_t stream) {
  std::vector<double> means;
  for (const auto& rows : generate(profile, n_sets, variants_per_set, stream)) {
    BasicDriftMatrix<double> m;
    m.scores = drift_scores(rows);
    m.prompt_ids.resize(static_cast<std::size_t>(rows.rows()));
    means.push_back(summarize(m).mean);
  }
  return means;
}

std::vector<std::pair<double, double>> expected_drift_curve(const std::vector<double>& sigmas,
                                                            std::size_t dim, std::size_t pairs,
                                                            std::uint64_t seed) {
  if (dim < 2) throw ParameterError("dimension must be >= 2");
  if (pairs == 0) throw ParameterError("pairs must be positive");
  std::vector<std::pair<double, double>> curve;
  for (double sigma : sigmas) {
    if (!(sigma >= 0.0)) throw ParameterError("sigma must be >= 0");
    auto rng = derived_stream(seed, 0xC0DE, 0, 0);
    double sum = 0;
    for (std::size_t k = 0; k < pairs; ++k) {
      const Eigen::VectorXd anchor = unit(gaussian(rng, dim));
      const Eigen::VectorXd a = unit(anchor + sigma * gaussian(rng, dim));
      const Eigen::VectorXd b = unit(anchor + sigma * gaussian(rng, dim));
      sum += cosine_drift(a, b);
    }
    curve.emplace_back(sigma, sum / static_cast<double>(pairs));
  }
  return curve;
}

std::vector<std::vector<std::string>> synthesize_texts(const SyntheticModelProfile& profile,
                                                       std::size_t n_sets, std::size_t variants_per_set,
                                                       std::size_t length, std::size_t vocabulary) {
  check_profile(profile);
  if (n_sets < 1 || variants_per_set < 2 || length < 1 || vocabulary < 2) {
    throw ParameterError("synthesize_texts: bad counts");
  }
  const double replace = std::min(1.0, profile.intra_set_noise);
  std::vector<std::vector<std::string>> sets;
  for (std::size_t s = 0; s < n_sets; ++s) {
    // Anchor sentences are shared across profiles (seeded by set only) so
    // tiers differ purely in how much they perturb them.
    auto anchor_rng = derived_stream(0, kTextTag, s, 0);
    std::uniform_int_distribution<std::size_t> word(0, vocabulary - 1);
    std::vector<std::size_t> anchor(length);
    for (auto& w : anchor) w = word(anchor_rng);

    auto rng = derived_stream(profile.seed, kTextTag, s, 1);
    std::bernoulli_distribution flip(replace);
    std::vector<std::string> variants;
    for (std::size_t v = 0; v < variants_per_set; ++v) {
      std::string text;
      for (std::size_t t = 0; t < length; ++t) {
        const std::size_t w = flip(rng) ? word(rng) : anchor[t];
        if (t) text += ' ';
        text += "w" + std::to_string(w);
      }
      variants.push_back(std::move(text));
    }
    sets.push_back(std::move(variants));
  }
  return sets;
}

std::vector<SyntheticModelProfile> default_profiles(std::uint64_t seed) {
  return {
      {"Stable-A", GroupName::LargeInstructionTuned, 0.10, 1.0, 64, seed * 4 + 1},
      {"Stable-B", GroupName::LargeInstructionTuned, 0.12, 1.0, 64, seed * 4 + 2},
      {"Drifty-A", GroupName::LegacySmall, 0.60, 1.0, 64, seed * 4 + 3},
      {"Drifty-B", GroupName::LegacySmall, 0.70, 1.0, 64, seed * 4 + 4},
  };
}

namespace {

const std::vector<std::string> kPromptWords{
    "explain", "describe", "outline", "summarize", "clarify", "detail",  "the",   "a",
    "this",    "that",     "task",    "concept",   "problem", "result",  "for",   "to",
    "reader",  "student",  "panel",   "office",    "clearly", "briefly", "please", "in",
    "plain",   "formal",   "simple",  "terms",     "words",   "manner",  "now",   "kindly"};

std::string prompt_text(std::mt19937_64& rng, std::size_t length) {
  std::uniform_int_distribution<std::size_t> word(0, kPromptWords.size() - 1);
  std::string text;
  for (std::size_t t = 0; t < length; ++t) {
    if (t) text += ' ';
    text += kPromptWords[word(rng)];
  }
  return text;
}

std::string perturb(std::mt19937_64& rng, const std::string& canonical, std::size_t edits) {
  auto words = std::vector<std::string>{};
  std::size_t start = 0;
  while (start <= canonical.size()) {
    auto end = canonical.find(' ', start);
    if (end == std::string::npos) end = canonical.size();
    words.push_back(canonical.substr(start, end - start));
    start = end + 1;
  }
  std::uniform_int_distribution<std::size_t> pos(0, words.size() - 1);
  std::uniform_int_distribution<std::size_t> word(0, kPromptWords.size() - 1);
  for (std::size_t e = 0; e < edits; ++e) words[pos(rng)] = kPromptWords[word(rng)];
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

std::string two_digits(std::size_t v) { return (v < 10 ? "0" : "") + std::to_string(v); }

}  // namespace

SyntheticDataset build_dataset(const std::vector<SyntheticModelProfile>& profiles,
                               const SyntheticOptions& options) {
  if (profiles.empty()) throw ParameterError("build_dataset: no profiles");
  if (options.temperatures.empty()) throw ParameterError("build_dataset: no temperatures");
  SyntheticDataset ds;

  auto prompt_rng = derived_stream(options.seed, 0x9807, 0, 0);
  for (std::size_t s = 0; s < options.n_sets; ++s) {
    PromptSet set;
    set.task_id = "C" + std::to_string(s / 5 + 1);
    set.set_id = set.task_id + "-S" + std::to_string(s % 5 + 1);
    set.canonical = prompt_text(prompt_rng, 10);
    for (std::size_t v = 0; v < options.variants_per_set; ++v) {
      PromptVariant variant;
      variant.variant_id = "v" + two_digits(v + 1);
      if (v == 0) {
        variant.text = set.canonical;
      } else if (v + 1 == options.variants_per_set && options.variants_per_set > 3) {
        variant.text = set.canonical.substr(0, set.canonical.size() / 2);
        variant.label = PerturbationDimension::BrokenPrompt;
      } else {
        variant.text = perturb(prompt_rng, set.canonical, 1 + v % 3);
        variant.label = static_cast<PerturbationDimension>(v % 4);
      }
      set.variants.push_back(std::move(variant));
    }
    ds.prompt_sets.push_back(std::move(set));
  }

  // Prompt embeddings come from the lexical mock so validation sees
  // vocabulary overlap; response embeddings come from the drift simulator.
  std::map<std::string, bool> seen;
  for (const auto& set : ds.prompt_sets) {
    for (const std::string* text : {&set.canonical}) {
      if (seen.emplace(*text, true).second) {
        ds.embeddings.emplace_back(*text, lexical_mock_embed(*text, profiles.front().dim, options.seed, options.encoder_id));
      }
    }
    for (const auto& v : set.variants) {
      if (seen.emplace(v.text, true).second) {
        ds.embeddings.emplace_back(v.text, lexical_mock_embed(v.text, profiles.front().dim, options.seed, options.encoder_id));
      }
    }
  }

  std::map<GroupName, ModelGroup> groups;
  for (const auto& profile : profiles) {
    auto& g = groups[profile.tier];
    g.name = profile.tier;
    g.size_category = "synthetic";
    g.members.push_back(profile.name);
    for (std::size_t t = 0; t < options.temperatures.size(); ++t) {
      const double temperature = options.temperatures[t];
      const auto sets = generate(profile, options.n_sets, options.variants_per_set, t);
      for (std::size_t s = 0; s < sets.size(); ++s) {
        const auto& set = ds.prompt_sets[s];
        for (std::size_t v = 0; v < options.variants_per_set; ++v) {
          PromptVariantRecord r;
          r.origin = set.set_id;
          r.variant_id = set.variants[v].variant_id;
          r.model_name = profile.name;
          r.temperature = temperature;
          r.prompt = set.variants[v].text;
          r.output_text = "synthetic response | model=" + profile.name + " | origin=" + r.origin +
                          " | variant=" + r.variant_id + " | T=" + format_double(temperature);
          ds.embeddings.emplace_back(
              r.output_text,
              normalize(Eigen::VectorXd(sets[s].row(static_cast<Eigen::Index>(v)).transpose()),
                        options.encoder_id));
          ds.records.push_back(std::move(r));
        }
      }
    }
  }
  for (auto& [name, g] : groups) ds.groups.push_back(std::move(g));
  return ds;
}

std::string write_dataset(const SyntheticDataset& dataset, const SyntheticOptions& options,
                          const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(directory) / "promptsets");
  const auto records = (fs::path(directory) / "records.jsonl").string();
  const auto cache_path = (fs::path(directory) / "cache.jsonl").string();
  const auto groups = (fs::path(directory) / "groups.json").string();
  write_records(dataset.records, records);
  fs::remove(cache_path);
  {
    EmbeddingCache cache(cache_path);
    for (const auto& [text, vector] : dataset.embeddings) cache.store(text, vector);
  }
  write_groups(dataset.groups, groups);

  AnalysisRun run;
  run.records = {records};
  for (const auto& set : dataset.prompt_sets) {
    const auto path = (fs::path(directory) / "promptsets" / (set.set_id + ".json")).string();
    write_prompt_set(set, path);
    run.prompt_sets.push_back(path);
  }
  run.groups = groups;
  run.encoders = {options.encoder_id};
  run.provider = "file";
  run.cache_path = cache_path;
  run.seed = options.seed;
  run.output_dir = (fs::path(directory) / "report").string();
  const auto config = (fs::path(directory) / "config.json").string();
  write_file(config, to_json(run));
  return config;
}

}  // namespace driftlab
