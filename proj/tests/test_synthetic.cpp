#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "driftlab/error.hpp"
#include "driftlab/pipeline.hpp"
#include "driftlab/stats.hpp"
#include "driftlab/synthetic.hpp"
#include "driftlab/validation.hpp"
#include "test_util.hpp"

using namespace driftlab;

namespace {

SyntheticModelProfile profile(double sigma, std::uint64_t seed, std::size_t dim = 64) {
  return {"p", GroupName::LegacySmall, sigma, 1.0, dim, seed};
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("generated variants are unit rows with the requested shape") {
  const auto sets = generate(profile(0.3, 1), 4, 7);
  REQUIRE(sets.size() == 4);
  for (const auto& m : sets) {
    CHECK(m.rows() == 7);
    CHECK(m.cols() == 64);
    for (Eigen::Index i = 0; i < m.rows(); ++i) CHECK(std::abs(m.row(i).norm() - 1.0) <= 1e-12);
  }
}

TEST_CASE("generation is deterministic and set-local") {
  const auto a = generate(profile(0.3, 9), 3, 5);
  const auto b = generate(profile(0.3, 9), 6, 5);
  for (std::size_t s = 0; s < 3; ++s) CHECK(a[s] == b[s]);
  CHECK_FALSE(generate(profile(0.3, 10), 1, 5)[0] == a[0]);
  CHECK_FALSE(generate(profile(0.3, 9), 1, 5, 1)[0] == a[0]);
}

TEST_CASE("zero noise gives zero drift") {
  for (double m : set_mean_drifts(profile(0.0, 2), 3, 4)) CHECK(m <= 1e-12);
}

TEST_CASE("profile checks") {
  CHECK_THROWS_AS(check_profile(profile(-0.1, 0)), ParameterError);
  CHECK_THROWS_AS(check_profile(profile(0.1, 0, 4)), ParameterError);
  CHECK_THROWS_AS(generate(profile(0.1, 0), 1, 1), ParameterError);
}

TEST_CASE("expected drift follows the concentration approximation") {
  // For large d, a.b ~ 1 / (1 + sigma^2 d) when both variants share an anchor.
  const std::size_t d = 384;
  const auto curve = expected_drift_curve({0.01, 0.03, 0.05, 0.1, 0.2}, d, 2000, 4);
  double prev = -1;
  for (const auto& [sigma, drift] : curve) {
    const double approx = 1.0 - 1.0 / (1.0 + sigma * sigma * static_cast<double>(d));
    CHECK(std::abs(drift - approx) <= 0.02);
    CHECK(drift > prev);
    prev = drift;
  }
}

TEST_CASE("higher noise means higher mean drift") {
  const auto low = set_mean_drifts(profile(0.1, 3), 20, 8);
  const auto high = set_mean_drifts(profile(0.6, 3), 20, 8);
  CHECK(mean(high) > mean(low));
  for (double m : low) CHECK(m < *std::min_element(high.begin(), high.end()));
}

TEST_CASE("tiers separate under Kruskal-Wallis") {
  int significant = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto low = set_mean_drifts(profile(0.1, 2 * seed), 50, 15);
    const auto high = set_mean_drifts(profile(0.6, 2 * seed + 1), 50, 15);
    if (kruskal_wallis(std::vector<std::vector<double>>{low, high}).p < 0.01) ++significant;
  }
  CHECK(significant == 10);
}

TEST_CASE("token-level texts keep tier ranking across mock encoders") {
  const auto profiles = default_profiles(5);
  for (std::uint64_t enc_seed : {11u, 12u}) {
    MockProvider encoder(256, enc_seed, MockMode::Lexical);
    std::vector<double> means;
    for (const auto& p : profiles) {
      std::vector<double> drifts;
      for (const auto& set : synthesize_texts(p, 10, 6)) {
        const auto v = encoder.embed({set, "enc"});
        std::vector<std::string> ids(set.size(), "v");
        drifts.push_back(summarize(drift_matrix(v, ids)).mean);
      }
      means.push_back(mean(drifts));
    }
    // Stable-A < Stable-B < Drifty-A < Drifty-B
    CHECK(means[0] < means[1]);
    CHECK(means[1] < means[2]);
    CHECK(means[2] < means[3]);
  }
}

TEST_CASE("synthetic dataset is complete and loadable") {
  testutil::TempDir dir;
  SyntheticOptions opts;
  opts.n_sets = 2;
  opts.variants_per_set = 4;
  const auto ds = build_dataset(default_profiles(1), opts);
  CHECK(ds.records.size() == 4 * 2 * 4 * 2);
  CHECK(ds.prompt_sets.size() == 2);
  CHECK(ds.prompt_sets[0].variants.back().label == PerturbationDimension::BrokenPrompt);
  CHECK_NOTHROW(check_partition(ds.groups));

  const auto config = write_dataset(ds, opts, dir.path().string());
  const auto run = load_analysis_run(config);
  CHECK(run.provider == "file");
  auto ctx = load_inputs(run);
  CHECK(ctx.records.size() == ds.records.size());
  CHECK_NOTHROW(run_embed(ctx));
  // prompt texts are cached too, so validation needs no live encoder
  FileProvider provider(run.cache_path);
  for (const auto& set : ctx.prompt_sets) {
    const auto report = validate_set(set, run.tau, provider, run.encoders.front());
    for (const auto& e : report.entries) CHECK_FALSE(e.error);
  }
}
