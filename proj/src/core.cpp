#include "driftlab/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "driftlab/error.hpp"
#include "driftlab/format.hpp"
#include "json.hpp"

namespace driftlab {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string required_string(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) throw ParameterError(std::string("missing field '") + field + "'");
  if (!it->is_string()) throw ParameterError(std::string("field '") + field + "' is not a string");
  return it->get<std::string>();
}

double required_number(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) throw ParameterError(std::string("missing field '") + field + "'");
  if (!it->is_number()) throw ParameterError(std::string("field '") + field + "' is not a number");
  return it->get<double>();
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

// Shared JSONL driver: parse each non-blank line with `parse`, collecting or
// throwing per-line failures depending on strictness.
template <typename Record, typename Parse, typename Key>
LoadResult<Record> load_jsonl(const std::string& path, LoadOptions options, Parse parse, Key key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  LoadResult<Record> result;
  std::set<decltype(key(std::declval<const Record&>()))> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    try {
      json obj = json::parse(line);
      if (!obj.is_object()) throw ParameterError("line is not a JSON object");
      Record record = parse(obj);
      if (!seen.insert(key(record)).second) throw ParameterError("duplicate record key");
      result.records.push_back(std::move(record));
    } catch (const std::exception& e) {
      const std::string msg = path + ":" + std::to_string(line_no) + ": " + e.what();
      if (options.strict) throw ParameterError(msg);
      result.errors.push_back({line_no, msg});
    }
  }
  if (in.bad()) throw IoError("read failed for " + path);
  return result;
}

template <typename Record>
void write_jsonl(const std::vector<Record>& records, const std::string& path) {
  std::string content;
  for (const auto& r : records) {
    content += to_jsonl_line(r);
    content += '\n';
  }
  write_file(path, content);
}

}  // namespace

void check_record(const PromptVariantRecord& r) {
  if (r.origin.empty()) throw ParameterError("record origin is empty");
  if (r.variant_id.empty()) throw ParameterError("record variant_id is empty");
  if (r.model_name.empty()) throw ParameterError("record model_name is empty");
  if (!std::isfinite(r.temperature) || r.temperature < 0.0) {
    throw ParameterError("record temperature must be a finite value >= 0");
  }
}

void check_summary(const PbssSummaryRecord& r) {
  if (r.origin.empty() || r.model.empty()) throw ParameterError("summary origin/model is empty");
  if (!std::isfinite(r.temperature) || r.temperature < 0.0) {
    throw ParameterError("summary temperature must be a finite value >= 0");
  }
  if (!(r.avg_pbss >= 0.0 && r.avg_pbss <= 2.0)) throw ParameterError("avg_pbss outside [0, 2]");
}

std::string to_jsonl_line(const PromptVariantRecord& r) {
  ordered_json obj;
  obj["origin"] = r.origin;
  obj["variant_id"] = r.variant_id;
  obj["model_name"] = r.model_name;
  obj["temperature"] = r.temperature;
  obj["prompt"] = r.prompt;
  obj["output_text"] = r.output_text;
  return obj.dump();
}

std::string to_jsonl_line(const PbssSummaryRecord& r) {
  ordered_json obj;
  obj["origin"] = r.origin;
  obj["model"] = r.model;
  obj["temperature"] = r.temperature;
  obj["avg_pbss"] = r.avg_pbss;
  return obj.dump();
}

LoadResult<PromptVariantRecord> load_records(const std::string& path, LoadOptions options) {
  return load_jsonl<PromptVariantRecord>(
      path, options,
      [](const json& obj) {
        PromptVariantRecord r;
        r.origin = required_string(obj, "origin");
        r.variant_id = required_string(obj, "variant_id");
        r.model_name = required_string(obj, "model_name");
        r.temperature = required_number(obj, "temperature");
        r.prompt = required_string(obj, "prompt");
        r.output_text = required_string(obj, "output_text");
        check_record(r);
        return r;
      },
      [](const PromptVariantRecord& r) {
        return std::make_tuple(r.origin, r.variant_id, r.model_name, r.temperature);
      });
}

void write_records(const std::vector<PromptVariantRecord>& records, const std::string& path) {
  for (const auto& r : records) check_record(r);
  write_jsonl(records, path);
}

LoadResult<PbssSummaryRecord> load_summary(const std::string& path, LoadOptions options) {
  return load_jsonl<PbssSummaryRecord>(
      path, options,
      [](const json& obj) {
        PbssSummaryRecord r;
        r.origin = required_string(obj, "origin");
        r.model = required_string(obj, "model");
        r.temperature = required_number(obj, "temperature");
        r.avg_pbss = required_number(obj, "avg_pbss");
        check_summary(r);
        return r;
      },
      [](const PbssSummaryRecord& r) { return std::make_tuple(r.origin, r.model, r.temperature); });
}

void write_summary(const std::vector<PbssSummaryRecord>& records, const std::string& path) {
  for (const auto& r : records) check_summary(r);
  write_jsonl(records, path);
}

// ---------------------------------------------------------------------------
// Model groups

namespace {
constexpr std::array<std::pair<GroupName, std::string_view>, 3> kGroupNames{{
    {GroupName::LegacySmall, "LegacySmall"},
    {GroupName::MidAligned, "MidAligned"},
    {GroupName::LargeInstructionTuned, "LargeInstructionTuned"},
}};
}  // namespace

std::string_view to_string(GroupName name) {
  for (auto [n, s] : kGroupNames) {
    if (n == name) return s;
  }
  return "unknown";
}

GroupName parse_group_name(std::string_view text) {
  for (auto [n, s] : kGroupNames) {
    if (s == text) return n;
  }
  throw ParameterError("unknown model group '" + std::string(text) + "'");
}

void check_partition(const std::vector<ModelGroup>& groups) {
  std::set<std::string> seen;
  for (const auto& g : groups) {
    if (g.members.empty()) {
      throw ParameterError("model group " + std::string(to_string(g.name)) + " has no members");
    }
    for (const auto& m : g.members) {
      if (!seen.insert(m).second) {
        throw ParameterError("model '" + m + "' belongs to more than one group");
      }
    }
  }
}

const ModelGroup& group_of(std::string_view model_name, const std::vector<ModelGroup>& groups) {
  const ModelGroup* found = nullptr;
  for (const auto& g : groups) {
    if (std::find(g.members.begin(), g.members.end(), model_name) != g.members.end()) {
      if (found) throw ParameterError("model '" + std::string(model_name) + "' is in two groups");
      found = &g;
    }
  }
  if (!found) throw LookupError("model '" + std::string(model_name) + "' is not in any group");
  return *found;
}

std::vector<ModelGroup> default_groups() {
  return {
      {GroupName::LegacySmall,
       {"GPT-2", "GPT-2 Large", "GPT-Neo-1.3B", "SmolLM-360M"},
       "Small / Small-Medium"},
      {GroupName::MidAligned,
       {"LLaMA-2-7B", "Phi-2", "Mistral-7B", "OpenChat-3.5"},
       "Medium / Medium-Large"},
      {GroupName::LargeInstructionTuned, {"GPT-3.5-Turbo", "MythoMax-13B"}, "Large / Extra-Large"},
  };
}

std::vector<ModelGroup> load_groups(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParameterError(path + ": " + e.what());
  }
  if (!doc.contains("groups") || !doc["groups"].is_array()) {
    throw ParameterError(path + ": expected an object with a \"groups\" array");
  }
  std::vector<ModelGroup> groups;
  for (const auto& g : doc["groups"]) {
    ModelGroup group;
    group.name = parse_group_name(required_string(g, "name"));
    group.size_category = g.value("size_category", "");
    if (!g.contains("members") || !g["members"].is_array()) {
      throw ParameterError(path + ": group without members array");
    }
    for (const auto& m : g["members"]) group.members.push_back(m.get<std::string>());
    groups.push_back(std::move(group));
  }
  check_partition(groups);
  return groups;
}

void write_groups(const std::vector<ModelGroup>& groups, const std::string& path) {
  check_partition(groups);
  ordered_json doc;
  doc["groups"] = ordered_json::array();
  for (const auto& g : groups) {
    ordered_json obj;
    obj["name"] = to_string(g.name);
    obj["size_category"] = g.size_category;
    obj["members"] = g.members;
    doc["groups"].push_back(obj);
  }
  write_file(path, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Prompt sets

namespace {
constexpr std::array<std::pair<PerturbationDimension, std::string_view>, 5> kDimensions{{
    {PerturbationDimension::StylisticShift, "StylisticShift"},
    {PerturbationDimension::SyntacticManipulation, "SyntacticManipulation"},
    {PerturbationDimension::InstructionalPerturbation, "InstructionalPerturbation"},
    {PerturbationDimension::ContextualReframing, "ContextualReframing"},
    {PerturbationDimension::BrokenPrompt, "BrokenPrompt"},
}};
}  // namespace

std::string_view to_string(PerturbationDimension dimension) {
  for (auto [d, s] : kDimensions) {
    if (d == dimension) return s;
  }
  return "unknown";
}

PerturbationDimension parse_perturbation(std::string_view text) {
  for (auto [d, s] : kDimensions) {
    if (s == text) return d;
  }
  throw ParameterError("unknown perturbation dimension '" + std::string(text) + "'");
}

void check_prompt_set(const PromptSet& set) {
  if (set.set_id.empty()) throw ParameterError("prompt set without set_id");
  if (set.variants.size() < 2) {
    throw ParameterError("prompt set " + set.set_id + " needs at least 2 variants");
  }
  std::set<std::string> ids;
  for (const auto& v : set.variants) {
    if (v.variant_id.empty()) throw ParameterError("prompt set " + set.set_id + ": empty variant_id");
    if (!ids.insert(v.variant_id).second) {
      throw ParameterError("prompt set " + set.set_id + ": duplicate variant_id " + v.variant_id);
    }
  }
}

PromptSet load_prompt_set(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParameterError(path + ": " + e.what());
  }
  PromptSet set;
  try {
    set.task_id = required_string(doc, "task_id");
    set.set_id = required_string(doc, "set_id");
    set.canonical = required_string(doc, "canonical");
    if (!doc.contains("variants") || !doc["variants"].is_array()) {
      throw ParameterError("missing variants array");
    }
    for (const auto& v : doc["variants"]) {
      PromptVariant variant;
      variant.variant_id = required_string(v, "variant_id");
      variant.text = required_string(v, "text");
      if (v.contains("label") && !v["label"].is_null()) {
        variant.label = parse_perturbation(v["label"].get<std::string>());
      }
      set.variants.push_back(std::move(variant));
    }
    check_prompt_set(set);
  } catch (const Error& e) {
    throw ParameterError(path + ": " + e.what());
  }
  return set;
}

void write_prompt_set(const PromptSet& set, const std::string& path) {
  check_prompt_set(set);
  ordered_json doc;
  doc["task_id"] = set.task_id;
  doc["set_id"] = set.set_id;
  doc["canonical"] = set.canonical;
  doc["variants"] = ordered_json::array();
  for (const auto& v : set.variants) {
    ordered_json obj;
    obj["variant_id"] = v.variant_id;
    obj["text"] = v.text;
    if (v.label) obj["label"] = to_string(*v.label);
    doc["variants"].push_back(obj);
  }
  write_file(path, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Analysis run config

std::string_view to_string(PairSelection selection) {
  return selection == PairSelection::AllPairs ? "all" : "canonical";
}

PairSelection parse_pair_selection(std::string_view text) {
  if (text == "all") return PairSelection::AllPairs;
  if (text == "canonical") return PairSelection::CanonicalVsVariant;
  throw ParameterError("pair selection must be 'all' or 'canonical', got '" + std::string(text) + "'");
}

void check_analysis_run(const AnalysisRun& run) {
  if (!(run.lambda >= 0.0 && run.lambda <= 1.0)) throw ParameterError("lambda must lie in [0, 1]");
  if (!(run.tau >= -1.0 && run.tau <= 1.0)) throw ParameterError("tau must lie in [-1, 1]");
  if (run.encoders.empty()) throw ParameterError("at least one encoder is required");
  if (run.provider != "mock" && run.provider != "file" && run.provider != "remote") {
    throw ParameterError("provider must be mock, file or remote");
  }
  if (run.mock_mode != "hash" && run.mock_mode != "lexical") {
    throw ParameterError("mock_mode must be hash or lexical");
  }
  if (run.mock_dim < 2) throw ParameterError("mock_dim must be >= 2");
  if (!(run.perplexity > 1.0)) throw ParameterError("perplexity must be > 1");
  if (run.tsne_iterations == 0) throw ParameterError("tsne_iterations must be positive");
  if (!(run.learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
  if (run.output_dir.empty()) throw ParameterError("output_dir is empty");
}

AnalysisRun parse_analysis_run(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw ParameterError("config must be a JSON object");
  AnalysisRun run;
  try {
    run.records = doc.value("records", run.records);
    run.prompt_sets = doc.value("prompt_sets", run.prompt_sets);
    run.groups = doc.value("groups", run.groups);
    run.encoders = doc.value("encoders", run.encoders);
    run.provider = doc.value("provider", run.provider);
    run.cache_path = doc.value("cache_path", run.cache_path);
    run.endpoint = doc.value("endpoint", run.endpoint);
    run.mock_mode = doc.value("mock_mode", run.mock_mode);
    run.mock_dim = doc.value("mock_dim", run.mock_dim);
    run.temperatures = doc.value("temperatures", run.temperatures);
    run.tau = doc.value("tau", run.tau);
    run.lambda = doc.value("lambda", run.lambda);
    run.seed = doc.value("seed", run.seed);
    run.output_dir = doc.value("output_dir", run.output_dir);
    run.pairs = parse_pair_selection(doc.value("pairs", std::string(to_string(run.pairs))));
    run.perplexity = doc.value("perplexity", run.perplexity);
    run.tsne_iterations = doc.value("tsne_iterations", run.tsne_iterations);
    run.learning_rate = doc.value("learning_rate", run.learning_rate);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
  check_analysis_run(run);
  return run;
}

AnalysisRun load_analysis_run(const std::string& path) { return parse_analysis_run(read_file(path)); }

std::string to_json(const AnalysisRun& run) {
  ordered_json doc;
  doc["records"] = run.records;
  doc["prompt_sets"] = run.prompt_sets;
  doc["groups"] = run.groups;
  doc["encoders"] = run.encoders;
  doc["provider"] = run.provider;
  doc["cache_path"] = run.cache_path;
  doc["endpoint"] = run.endpoint;
  doc["mock_mode"] = run.mock_mode;
  doc["mock_dim"] = run.mock_dim;
  doc["temperatures"] = run.temperatures;
  doc["tau"] = run.tau;
  doc["lambda"] = run.lambda;
  doc["seed"] = run.seed;
  doc["output_dir"] = run.output_dir;
  doc["pairs"] = to_string(run.pairs);
  doc["perplexity"] = run.perplexity;
  doc["tsne_iterations"] = run.tsne_iterations;
  doc["learning_rate"] = run.learning_rate;
  return doc.dump(2) + "\n";
}

}  // namespace driftlab
