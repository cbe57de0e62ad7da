#include "driftlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "driftlab/error.hpp"
#include "driftlab/format.hpp"

namespace driftlab {

void check_sample(const ScoreSample& sample) {
  if (sample.values.empty()) throw ParameterError("score sample for " + sample.model + " is empty");
  for (double v : sample.values) {
    if (!std::isfinite(v)) throw ParameterError("score sample for " + sample.model + " has a non-finite value");
  }
}

double quantile_type7(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ParameterError("quantile of an empty list");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

DescriptiveStats describe(std::span<const double> values) {
  if (values.empty()) throw ParameterError("describe: empty list");
  for (double v : values) {
    if (!std::isfinite(v)) throw ParameterError("describe: non-finite value");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  DescriptiveStats s;
  s.count = sorted.size();
  // Sums over the sorted copy so the result is independent of input order.
  double sum = 0;
  for (double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(s.count);
  if (s.count > 1) {
    double sq = 0;
    for (double v : sorted) sq += (v - s.mean) * (v - s.mean);
    s.std_dev = std::sqrt(sq / static_cast<double>(s.count - 1));
  }
  s.q25 = quantile_type7(sorted, 0.25);
  s.q75 = quantile_type7(sorted, 0.75);
  return s;
}

std::vector<double> rank_with_ties(std::span<const double> values) {
  if (values.empty()) throw ParameterError("rank_with_ties: empty list");
  for (double v : values) {
    if (!std::isfinite(v)) throw ParameterError("rank_with_ties: non-finite value");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j (0-based) hold ranks i+1..j+1
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
    i = j + 1;
  }
  return ranks;
}

KruskalResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw ParameterError("Kruskal-Wallis needs at least 2 groups");
  std::vector<double> pooled;
  KruskalResult r;
  for (const auto& g : groups) {
    if (g.empty()) throw ParameterError("Kruskal-Wallis group is empty");
    pooled.insert(pooled.end(), g.begin(), g.end());
    r.group_sizes.push_back(g.size());
    if (g.size() < 5) r.small_sample = true;
  }
  const auto ranks = rank_with_ties(pooled);
  const double n = static_cast<double>(pooled.size());

  // Tie blocks from the sorted pooled values.
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_sum = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_sum += t * t * t - t;
    i = j;
  }
  r.tie_correction = 1.0 - tie_sum / (n * n * n - n);
  if (!(r.tie_correction > 0.0)) {
    throw DegenerateSampleError("Kruskal-Wallis: all values are tied");
  }

  double between = 0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double rank_sum = 0;
    for (std::size_t k = 0; k < g.size(); ++k) rank_sum += ranks[offset + k];
    between += rank_sum * rank_sum / static_cast<double>(g.size());
    offset += g.size();
  }
  const double h = (12.0 / (n * (n + 1.0)) * between - 3.0 * (n + 1.0)) / r.tie_correction;
  r.h = std::max(0.0, h);
  r.df = groups.size() - 1;
  r.p = chi2_sf(r.h, static_cast<unsigned>(r.df));
  return r;
}

KruskalResult kruskal_wallis(const std::vector<ScoreSample>& groups) {
  std::vector<std::vector<double>> values;
  values.reserve(groups.size());
  for (const auto& g : groups) {
    check_sample(g);
    values.push_back(g.values);
  }
  return kruskal_wallis(values);
}

namespace {

constexpr double kGammaEps = 1e-16;
constexpr int kGammaMaxIter = 10000;

double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double term = sum;
  for (int n = 0; n < kGammaMaxIter; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kGammaEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_continued_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kGammaEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kGammaMaxIter; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kGammaEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0)) throw ParameterError("regularized_gamma_q: a must be positive");
  if (!(x >= 0.0)) throw ParameterError("regularized_gamma_q: x must be >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return std::clamp(1.0 - gamma_p_series(a, x), 0.0, 1.0);
  return std::clamp(gamma_q_continued_fraction(a, x), 0.0, 1.0);
}

double chi2_sf(double x, unsigned df) {
  if (df == 0) throw ParameterError("chi2_sf: df must be positive");
  if (std::isnan(x) || x < 0.0) throw ParameterError("chi2_sf: x must be >= 0");
  return regularized_gamma_q(static_cast<double>(df) / 2.0, x / 2.0);
}

std::vector<ScoreSample> pool_combined(const std::vector<std::vector<ScoreSample>>& per_encoder) {
  if (per_encoder.empty()) throw ParameterError("pool_combined: no encoder samples");
  std::vector<ScoreSample> pooled;
  std::map<std::string, std::size_t> index;
  for (const auto& encoder_samples : per_encoder) {
    for (const auto& s : encoder_samples) {
      check_sample(s);
      auto [it, inserted] = index.try_emplace(s.model, pooled.size());
      if (inserted) {
        ScoreSample p = s;
        p.encoder_id = "Combined";
        pooled.push_back(std::move(p));
        continue;
      }
      auto& p = pooled[it->second];
      if (p.group != s.group) {
        throw IntegrityError("model " + s.model + " is labeled " + std::string(to_string(p.group)) +
                             " under one encoder and " + std::string(to_string(s.group)) +
                             " under another");
      }
      if (p.temperature != s.temperature) p.temperature.reset();
      p.values.insert(p.values.end(), s.values.begin(), s.values.end());
    }
  }
  return pooled;
}

std::string format_pvalue(double p) { return format_scientific(p, 2); }

std::string render_stats_row(const std::string& model, const DescriptiveStats& s) {
  return csv_row({model, std::to_string(s.count), format_fixed(s.mean, 3), format_fixed(s.std_dev, 3),
                  format_fixed(s.q25, 3), format_fixed(s.q75, 3)});
}

std::string render_kruskal_row(const std::string& group_set, const std::string& encoder,
                               const std::string& slice, double h, double p) {
  return csv_row({group_set, encoder, slice, format_fixed(h, 2), format_pvalue(p)});
}

}  // namespace driftlab
