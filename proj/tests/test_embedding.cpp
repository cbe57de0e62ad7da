#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include "driftlab/embedding.hpp"
#include "driftlab/error.hpp"
#include "driftlab/format.hpp"
#include "driftlab/pipeline.hpp"
#include "driftlab/provider.hpp"
#include "json.hpp"

// after Eigen: <resolv.h> defines a `_res` macro that clashes with Eigen internals
#include <httplib.h>
#include "test_util.hpp"

using namespace driftlab;

namespace {

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) { return a.values().dot(b.values()); }

// Minimal stand-in for the bridge's POST /embed. Vectors come from the hash
// mock so answers are deterministic; behavior knobs simulate failures.
class FakeBridge {
 public:
  explicit FakeBridge(std::size_t dim = 16) : dim_(dim) {
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      const int now = ++in_flight;
      int seen = max_in_flight.load();
      while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      ++calls;
      auto body = nlohmann::json::parse(req.body);
      last_encoder = body["encoder"].get<std::string>();
      const auto texts = body["texts"].get<std::vector<std::string>>();
      largest_batch = std::max<std::size_t>(largest_batch, texts.size());
      if (fail_first > 0) {
        --fail_first;
        res.status = fail_status;
        --in_flight;
        return;
      }
      if (always_status) {
        res.status = always_status;
        res.set_content("nope", "text/plain");
        --in_flight;
        return;
      }
      nlohmann::json reply;
      const std::size_t d = texts.size() > 1 && ragged ? dim_ + 1 : dim_;
      reply["dim"] = dim_;
      reply["vectors"] = nlohmann::json::array();
      for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto v = mock_embed(texts[i], i == 1 ? d : dim_, 99);
        std::vector<double> raw(v.values().data(), v.values().data() + v.dim());
        for (auto& x : raw) x *= 3.0;  // bridge output need not be unit norm on the wire
        reply["vectors"].push_back(raw);
      }
      res.set_content(reply.dump(), "application/json");
      --in_flight;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeBridge() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::atomic<int> calls{0};
  std::atomic<int> in_flight{0};
  std::atomic<int> max_in_flight{0};
  std::atomic<int> fail_first{0};
  int fail_status = 503;
  int always_status = 0;
  int delay_ms = 0;
  bool ragged = false;
  std::size_t largest_batch = 0;
  std::string last_encoder;

 private:
  std::size_t dim_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ProviderConfig remote(const FakeBridge& bridge) {
  ProviderConfig c;
  c.kind = ProviderKind::Remote;
  c.endpoint = bridge.url();
  c.backoff_base_seconds = 0.001;
  c.timeout_seconds = 5;
  return c;
}

std::vector<std::string> numbered_texts(std::size_t n) {
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < n; ++i) texts.push_back("text number " + std::to_string(i));
  return texts;
}

}  // namespace

TEST_CASE("embedding vector rejects bad values") {
  CHECK_THROWS_AS(EmbeddingVector(Eigen::VectorXd(), "e", false), ParameterError);
  CHECK_THROWS_AS(EmbeddingVector(Eigen::VectorXd::Zero(3), "e", false), ParameterError);
  Eigen::VectorXd nan = Eigen::VectorXd::Ones(3);
  nan[1] = std::nan("");
  CHECK_THROWS_AS(EmbeddingVector(nan, "e", false), ParameterError);
  CHECK_THROWS_AS(EmbeddingVector(Eigen::VectorXd::Ones(3), "e", true), ParameterError);
  CHECK_NOTHROW(EmbeddingVector(Eigen::VectorXd::Ones(3), "e", false));
}

TEST_CASE("normalize examples") {
  const auto v = normalize(Eigen::Vector2d(3, 4));
  CHECK(v.values()[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(v.values()[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(v.normalized());
  CHECK_THROWS_AS(normalize(Eigen::VectorXd::Zero(4)), ParameterError);
  // huge and tiny components survive the max-abs prescale
  const auto big = normalize(Eigen::Vector2d(3e300, 4e300));
  CHECK(big.values()[1] == doctest::Approx(0.8));
  const auto tiny = normalize(Eigen::Vector2d(3e-300, 4e-300));
  CHECK(tiny.values()[0] == doctest::Approx(0.6));
}

TEST_CASE("normalize is idempotent and scale invariant") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd raw(17);
    for (auto& x : raw) x = g(rng);
    const auto a = normalize(raw);
    const auto twice = normalize(a.values());
    const auto scaled = normalize(Eigen::VectorXd(scale(rng) * raw));
    CHECK((a.values() - twice.values()).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((a.values() - scaled.values()).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("mock embedding is deterministic and unit") {
  const auto a = mock_embed("hello world", 384, 1);
  const auto b = mock_embed("hello world", 384, 1);
  CHECK(a == b);
  CHECK(a.dim() == 384);
  CHECK(std::abs(a.values().norm() - 1.0) <= 1e-12);
  CHECK(std::abs(cosine(a, b) - 1.0) <= 1e-9);
  CHECK_FALSE(mock_embed("hello world", 384, 2) == a);
  // distinct texts are close to orthogonal in 384 dims
  CHECK(std::abs(cosine(a, mock_embed("goodbye world", 384, 1))) < 0.25);
  CHECK_THROWS_AS(mock_embed("x", 1, 0), ParameterError);
}

TEST_CASE("lexical mock orders paraphrases above unrelated text") {
  const std::vector<std::array<std::string, 3>> triples{
      {"Summarize the main findings of this report", "Please summarize the main findings of the report",
       "What is the boiling point of water at altitude"},
      {"Translate the sentence into French", "Translate this sentence into French please",
       "List three causes of the industrial revolution"},
      {"Explain how photosynthesis works", "Explain briefly how photosynthesis works",
       "Write a haiku about winter mornings"},
  };
  for (const auto& t : triples) {
    const auto a = lexical_mock_embed(t[0], 384, 5);
    const auto p = lexical_mock_embed(t[1], 384, 5);
    const auto u = lexical_mock_embed(t[2], 384, 5);
    CHECK(cosine(a, p) > cosine(a, u));
  }
}

TEST_CASE("mock provider preserves batch order under permutation") {
  MockProvider provider(64, 11);
  auto texts = numbered_texts(20);
  const auto base = provider.embed({texts, "enc"});
  std::vector<std::size_t> perm(texts.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(4));
  std::vector<std::string> shuffled;
  for (auto i : perm) shuffled.push_back(texts[i]);
  const auto out = provider.embed({shuffled, "enc"});
  for (std::size_t k = 0; k < perm.size(); ++k) CHECK(out[k] == base[perm[k]]);
  for (const auto& v : out) CHECK(v.encoder_id() == "enc");
}

TEST_CASE("requests are validated") {
  MockProvider provider(8, 0);
  CHECK_THROWS_AS(provider.embed({{}, "enc"}), ParameterError);
  CHECK_THROWS_AS(provider.embed({{"ok", "  "}, "enc"}), ParameterError);
  CHECK_THROWS_AS(provider.embed({{"ok"}, ""}), ParameterError);
}

TEST_CASE("cache round trip is lossless and last line wins") {
  testutil::TempDir dir;
  const auto path = dir.file("cache.jsonl");
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  std::vector<std::pair<std::string, EmbeddingVector>> stored;
  {
    EmbeddingCache cache(path);
    for (int i = 0; i < 25; ++i) {
      Eigen::VectorXd raw(9);
      for (auto& x : raw) x = g(rng);
      auto v = normalize(raw, "enc");
      cache.store("t" + std::to_string(i), v);
      stored.emplace_back("t" + std::to_string(i), v);
    }
    cache.store("t0", mock_embed("other", 9, 0, "enc"));
    stored[0].second = mock_embed("other", 9, 0, "enc");
  }
  EmbeddingCache reloaded(path);
  CHECK(reloaded.size() == 25);
  for (const auto& [text, v] : stored) {
    auto hit = reloaded.lookup(text, "enc");
    REQUIRE(hit);
    CHECK(*hit == v);
  }
  CHECK_FALSE(reloaded.lookup("t1", "other-encoder"));
  CHECK_FALSE(reloaded.lookup("never stored", "enc"));
}

TEST_CASE("corrupt cache line names the line") {
  testutil::TempDir dir;
  const auto path = dir.file("cache.jsonl");
  {
    EmbeddingCache cache(path);
    cache.store("a", mock_embed("a", 4, 0, "enc"));
  }
  write_file(path, read_file(path) + "{\"key\": 12}\n");
  try {
    EmbeddingCache cache(path);
    FAIL("expected IntegrityError");
  } catch (const IntegrityError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("file provider serves hits and reports misses") {
  testutil::TempDir dir;
  const auto path = dir.file("cache.jsonl");
  {
    EmbeddingCache cache(path);
    cache.store("alpha", mock_embed("alpha", 8, 0, "enc"));
    cache.store("beta", mock_embed("beta", 8, 0, "enc"));
  }
  FileProvider provider(path);
  const auto out = provider.embed({{"beta", "alpha"}, "enc"});
  CHECK(out[0] == mock_embed("beta", 8, 0, "enc"));
  CHECK_THROWS_AS(provider.embed({{"alpha", "gamma"}, "enc"}), MissingEmbeddingError);
  CHECK_THROWS_AS(provider.embed({{"alpha"}, "other"}), MissingEmbeddingError);
}

TEST_CASE("remote provider speaks the /embed wire format") {
  FakeBridge bridge;
  RemoteProvider provider(remote(bridge));
  const auto texts = numbered_texts(5);
  const auto out = provider.embed({texts, "all-mpnet-base-v2"});
  REQUIRE(out.size() == 5);
  CHECK(bridge.last_encoder == "all-mpnet-base-v2");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto expected = mock_embed(texts[i], 16, 99);
    CHECK((out[i].values() - expected.values()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(out[i].encoder_id() == "all-mpnet-base-v2");
    CHECK(std::abs(out[i].values().norm() - 1.0) <= 1e-12);
  }
}

TEST_CASE("remote provider splits batches and bounds concurrency") {
  FakeBridge bridge;
  bridge.delay_ms = 30;
  auto config = remote(bridge);
  config.batch_size = 10;
  config.max_in_flight = 2;
  RemoteProvider provider(config);
  const auto texts = numbered_texts(95);
  const auto out = provider.embed({texts, "enc"});
  CHECK(out.size() == 95);
  CHECK(bridge.calls == 10);
  CHECK(bridge.largest_batch == 10);
  CHECK(bridge.max_in_flight <= 2);
  CHECK(out[94].values() == provider.embed({{texts[94]}, "enc"})[0].values());
}

TEST_CASE("default batch cap is 256 texts per call") {
  FakeBridge bridge(4);
  RemoteProvider provider(remote(bridge));
  provider.embed({numbered_texts(600), "enc"});
  CHECK(bridge.largest_batch == 256);
  CHECK(bridge.calls == 3);
  auto config = remote(bridge);
  config.batch_size = 257;
  CHECK_THROWS_AS(RemoteProvider{config}, ParameterError);
}

TEST_CASE("remote provider retries transient failures") {
  for (int status : {429, 503}) {
    FakeBridge bridge;
    bridge.fail_first = 2;
    bridge.fail_status = status;
    RemoteProvider provider(remote(bridge));
    CHECK(provider.embed({{"a", "b"}, "enc"}).size() == 2);
    CHECK(bridge.calls == 3);
  }
  FakeBridge bridge;
  bridge.fail_first = 10;
  auto config = remote(bridge);
  config.retry_limit = 2;
  RemoteProvider provider(config);
  CHECK_THROWS_AS(provider.embed({{"a"}, "enc"}), ProviderError);
  CHECK(bridge.calls == 3);
}

TEST_CASE("remote provider does not retry client errors") {
  FakeBridge bridge;
  bridge.always_status = 404;
  RemoteProvider provider(remote(bridge));
  CHECK_THROWS_AS(provider.embed({{"a"}, "unknown-encoder"}), ProviderError);
  CHECK(bridge.calls == 1);
}

TEST_CASE("remote provider rejects ragged vectors") {
  FakeBridge bridge;
  bridge.ragged = true;
  RemoteProvider provider(remote(bridge));
  CHECK_THROWS_AS(provider.embed({{"a", "b", "c"}, "enc"}), IntegrityError);
}

TEST_CASE("unreachable bridge fails after retries") {
  ProviderConfig config;
  config.kind = ProviderKind::Remote;
  config.endpoint = "http://127.0.0.1:1";
  config.retry_limit = 1;
  config.backoff_base_seconds = 0.001;
  config.timeout_seconds = 1;
  RemoteProvider provider(config);
  CHECK_THROWS_AS(provider.embed({{"a"}, "enc"}), ProviderError);
}

TEST_CASE("remote provider writes through its cache") {
  testutil::TempDir dir;
  FakeBridge bridge;
  auto config = remote(bridge);
  config.cache_path = dir.file("cache.jsonl");
  {
    RemoteProvider provider(config);
    provider.embed({{"a", "b"}, "enc"});
    provider.embed({{"b", "c"}, "enc"});
  }
  CHECK(bridge.calls == 2);
  CHECK(bridge.largest_batch == 2);
  FileProvider offline(config.cache_path);
  CHECK(offline.embed({{"a", "b", "c"}, "enc"}).size() == 3);
}

TEST_CASE("bridge endpoint comes from DRIFTLAB_BRIDGE_URL") {
  AnalysisRun run;
  run.provider = "remote";
  ::setenv("DRIFTLAB_BRIDGE_URL", "http://bridge.example:8000", 1);
  CHECK(provider_config(run, "enc").endpoint == "http://bridge.example:8000");
  run.endpoint = "http://explicit:1";
  CHECK(provider_config(run, "enc").endpoint == "http://explicit:1");
  ::unsetenv("DRIFTLAB_BRIDGE_URL");
  run.endpoint.clear();
  CHECK(provider_config(run, "enc").endpoint.empty());
  CHECK_THROWS_AS(make_provider(provider_config(run, "enc")), ParameterError);
}
