#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <semaphore>
#include <string>
#include <vector>

#include "driftlab/embedding.hpp"

namespace driftlab {

struct EmbeddingRequest {
  std::vector<std::string> texts;
  std::string encoder_id;
};

// Throws ParameterError for an empty request or a blank text.
void check_request(const EmbeddingRequest& request);

enum class ProviderKind { File, Remote, Mock };
enum class MockMode { Hash, Lexical };

ProviderKind parse_provider_kind(std::string_view text);
MockMode parse_mock_mode(std::string_view text);

struct ProviderConfig {
  ProviderKind kind = ProviderKind::Mock;
  std::string endpoint;    // remote: "http://host:port"
  std::string cache_path;  // file: required; remote: optional write-through
  std::size_t max_in_flight = 4;
  std::size_t retry_limit = 3;
  double backoff_base_seconds = 0.5;
  double timeout_seconds = 60.0;
  std::size_t batch_size = 256;
  std::size_t mock_dim = 384;
  std::uint64_t mock_seed = 0;
  MockMode mock_mode = MockMode::Hash;
};

// Every provider returns one unit-norm vector per text, in request order,
// with a uniform dimension and the request's encoder_id.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<EmbeddingVector> embed(const EmbeddingRequest& request) = 0;
};

class MockProvider final : public EmbeddingProvider {
 public:
  MockProvider(std::size_t dim, std::uint64_t seed, MockMode mode = MockMode::Hash);
  std::vector<EmbeddingVector> embed(const EmbeddingRequest& request) override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  MockMode mode_;
};

// Serves embeddings from a precomputed cache only. A miss is an error.
class FileProvider final : public EmbeddingProvider {
 public:
  explicit FileProvider(const std::string& cache_path);
  std::vector<EmbeddingVector> embed(const EmbeddingRequest& request) override;

 private:
  EmbeddingCache cache_;
};

// Client for the bridge service's POST /embed endpoint.
class RemoteProvider final : public EmbeddingProvider {
 public:
  explicit RemoteProvider(ProviderConfig config);
  std::vector<EmbeddingVector> embed(const EmbeddingRequest& request) override;

 private:
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts,
                                           const std::string& encoder_id);

  ProviderConfig config_;
  std::unique_ptr<EmbeddingCache> cache_;
  std::counting_semaphore<> in_flight_;
};

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config);

std::vector<EmbeddingVector> embed(const EmbeddingRequest& request, const ProviderConfig& config);

// Post-condition check shared by all providers (IntegrityError on failure).
void check_batch(const EmbeddingRequest& request, const std::vector<EmbeddingVector>& vectors);

}  // namespace driftlab
