#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driftlab/core.hpp"

namespace driftlab {

// Scores for one model under one encoder (and optionally one temperature).
struct ScoreSample {
  std::vector<double> values;
  std::string model;
  GroupName group = GroupName::LegacySmall;
  std::string encoder_id;
  std::optional<double> temperature;  // nullopt: pooled across temperatures
};

void check_sample(const ScoreSample& sample);

struct DescriptiveStats {
  std::size_t count = 0;
  double mean = 0;
  double std_dev = 0;  // sample (n - 1) standard deviation, 0 for n == 1
  double q25 = 0;
  double q75 = 0;
};

DescriptiveStats describe(std::span<const double> values);

// Linear interpolation between closest ranks, position (n - 1) * q on the
// sorted values ("type 7").
double quantile_type7(std::span<const double> sorted, double q);

// 1-based ranks; ties share the mean of the ranks they span.
std::vector<double> rank_with_ties(std::span<const double> values);

struct KruskalResult {
  double h = 0;
  double p = 1;
  std::size_t df = 0;
  double tie_correction = 1;
  std::vector<std::size_t> group_sizes;
  bool small_sample = false;  // some group has fewer than 5 values
};

KruskalResult kruskal_wallis(const std::vector<ScoreSample>& groups);
KruskalResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

// Upper tail of the chi-squared distribution, Q(df/2, x/2).
double chi2_sf(double x, unsigned df);

// Regularized upper incomplete gamma Q(a, x): series below a + 1, Lentz
// continued fraction above.
double regularized_gamma_q(double a, double x);

// Concatenates per-encoder samples model by model. Outer index: encoder.
// The pooled samples carry encoder_id "Combined".
std::vector<ScoreSample> pool_combined(const std::vector<std::vector<ScoreSample>>& per_encoder);

// Table-style renderings. Three decimals for descriptives, two for H, and
// two significant digits in scientific notation for p.
std::string format_pvalue(double p);
std::string render_stats_row(const std::string& model, const DescriptiveStats& stats);
std::string render_kruskal_row(const std::string& group_set, const std::string& encoder,
                               const std::string& slice, double h, double p);

}  // namespace driftlab
