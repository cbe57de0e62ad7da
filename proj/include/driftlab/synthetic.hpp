#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "driftlab/core.hpp"
#include "driftlab/embedding.hpp"

namespace driftlab {

// Controlled drift regime for one simulated model. Variants of a prompt set
// are unit vectors normalize(anchor + sigma * N(0, I)) around a per-set
// anchor; anchors scatter around a model-level base direction.
struct SyntheticModelProfile {
  std::string name;
  GroupName tier = GroupName::LegacySmall;
  double intra_set_noise = 0.1;  // sigma
  double anchor_spread = 1.0;
  std::size_t dim = 64;
  std::uint64_t seed = 0;
};

void check_profile(const SyntheticModelProfile& profile);

// One (variants_per_set x dim) matrix of unit rows per set. Each set draws
// from its own stream derived from (seed, set index, stream), so sets can be
// generated in any order. `stream` separates e.g. decoding temperatures.
std::vector<Eigen::MatrixXd> generate(const SyntheticModelProfile& profile, std::size_t n_sets,
                                      std::size_t variants_per_set, std::uint64_t stream = 0);

std::vector<EmbeddingVector> to_embeddings(const Eigen::MatrixXd& unit_rows, const std::string& encoder_id);

// Mean PBSS of every generated set.
std::vector<double> set_mean_drifts(const SyntheticModelProfile& profile, std::size_t n_sets,
                                    std::size_t variants_per_set, std::uint64_t stream = 0);

// Monte-Carlo mean drift per sigma over `pairs` variant pairs, each pair with
// a fresh random anchor. The same random stream is reused for every sigma.
std::vector<std::pair<double, double>> expected_drift_curve(const std::vector<double>& sigmas,
                                                            std::size_t dim = 384,
                                                            std::size_t pairs = 10000,
                                                            std::uint64_t seed = 0);

// Token-level analogue: per set an anchor sentence of `length` tokens from a
// synthetic vocabulary; each variant replaces every token independently with
// probability min(1, sigma).
std::vector<std::vector<std::string>> synthesize_texts(const SyntheticModelProfile& profile,
                                                       std::size_t n_sets, std::size_t variants_per_set,
                                                       std::size_t length = 12,
                                                       std::size_t vocabulary = 5000);

// Two tiers, two models each: stable (sigma 0.1, 0.12) and drifty (0.6, 0.7).
std::vector<SyntheticModelProfile> default_profiles(std::uint64_t seed = 0);

struct SyntheticOptions {
  std::size_t n_sets = 5;
  std::size_t variants_per_set = 6;
  std::vector<double> temperatures{0.2, 1.3};
  std::string encoder_id = "synthetic";
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  std::vector<PromptVariantRecord> records;
  std::vector<std::pair<std::string, EmbeddingVector>> embeddings;  // text -> vector
  std::vector<PromptSet> prompt_sets;
  std::vector<ModelGroup> groups;
};

SyntheticDataset build_dataset(const std::vector<SyntheticModelProfile>& profiles,
                               const SyntheticOptions& options);

// Writes records.jsonl, cache.jsonl, groups.json, promptsets/<set>.json and a
// config.json that runs the file-provider pipeline on them. Returns the
// config path.
std::string write_dataset(const SyntheticDataset& dataset, const SyntheticOptions& options,
                          const std::string& directory);

}  // namespace driftlab
