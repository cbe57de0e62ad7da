#include "driftlab/provider.hpp"

#include <chrono>
#include <future>
#include <random>
#include <thread>

#include "driftlab/error.hpp"
#include "driftlab/text.hpp"
#include "httplib.h"
#include "json.hpp"

namespace driftlab {

void check_request(const EmbeddingRequest& request) {
  if (request.texts.empty()) throw ParameterError("embedding request has no texts");
  if (request.encoder_id.empty()) throw ParameterError("embedding request has no encoder id");
  for (std::size_t i = 0; i < request.texts.size(); ++i) {
    if (trim(request.texts[i]).empty()) {
      throw ParameterError("embedding request text " + std::to_string(i) + " is blank");
    }
  }
}

ProviderKind parse_provider_kind(std::string_view text) {
  if (text == "file") return ProviderKind::File;
  if (text == "remote") return ProviderKind::Remote;
  if (text == "mock") return ProviderKind::Mock;
  throw ParameterError("unknown provider kind '" + std::string(text) + "'");
}

MockMode parse_mock_mode(std::string_view text) {
  if (text == "hash") return MockMode::Hash;
  if (text == "lexical") return MockMode::Lexical;
  throw ParameterError("unknown mock mode '" + std::string(text) + "'");
}

void check_batch(const EmbeddingRequest& request, const std::vector<EmbeddingVector>& vectors) {
  if (vectors.size() != request.texts.size()) {
    throw IntegrityError("provider returned " + std::to_string(vectors.size()) + " vectors for " +
                         std::to_string(request.texts.size()) + " texts");
  }
  for (const auto& v : vectors) {
    if (v.dim() != vectors.front().dim()) throw IntegrityError("dimension mismatch within batch");
    if (v.encoder_id() != request.encoder_id) throw IntegrityError("encoder mismatch within batch");
    if (!v.normalized()) throw IntegrityError("provider returned a non-normalized vector");
  }
}

// ---------------------------------------------------------------------------

MockProvider::MockProvider(std::size_t dim, std::uint64_t seed, MockMode mode)
    : dim_(dim), seed_(seed), mode_(mode) {
  if (dim_ < 2) throw ParameterError("mock embedding dimension must be >= 2");
}

std::vector<EmbeddingVector> MockProvider::embed(const EmbeddingRequest& request) {
  check_request(request);
  std::vector<EmbeddingVector> out;
  out.reserve(request.texts.size());
  for (const auto& t : request.texts) {
    out.push_back(mode_ == MockMode::Hash ? mock_embed(t, dim_, seed_, request.encoder_id)
                                          : lexical_mock_embed(t, dim_, seed_, request.encoder_id));
  }
  check_batch(request, out);
  return out;
}

// ---------------------------------------------------------------------------

FileProvider::FileProvider(const std::string& cache_path) : cache_(cache_path) {
  if (cache_path.empty()) throw ParameterError("file provider needs a cache path");
}

std::vector<EmbeddingVector> FileProvider::embed(const EmbeddingRequest& request) {
  check_request(request);
  std::vector<EmbeddingVector> out;
  out.reserve(request.texts.size());
  std::string missing;
  std::size_t missing_count = 0;
  for (const auto& t : request.texts) {
    auto hit = cache_.lookup(t, request.encoder_id);
    if (!hit) {
      if (missing_count++ < 8) missing += " " + EmbeddingCache::key_of(t);
      continue;
    }
    out.push_back(*hit);
  }
  if (missing_count) {
    throw MissingEmbeddingError(std::to_string(missing_count) + " text(s) missing from cache " +
                                cache_.path() + " for encoder " + request.encoder_id + ":" +
                                missing + (missing_count > 8 ? " ..." : ""));
  }
  check_batch(request, out);
  return out;
}

// ---------------------------------------------------------------------------

RemoteProvider::RemoteProvider(ProviderConfig config)
    : config_(std::move(config)),
      in_flight_(static_cast<std::ptrdiff_t>(config_.max_in_flight)) {
  if (config_.endpoint.empty()) throw ParameterError("remote provider needs an endpoint URL");
  if (config_.max_in_flight < 1) throw ParameterError("max_in_flight must be >= 1");
  if (config_.batch_size < 1 || config_.batch_size > 256) {
    throw ParameterError("batch_size must lie in [1, 256]");
  }
  if (!config_.cache_path.empty()) cache_ = std::make_unique<EmbeddingCache>(config_.cache_path);
}

std::vector<EmbeddingVector> RemoteProvider::embed_batch(const std::vector<std::string>& texts,
                                                         const std::string& encoder_id) {
  nlohmann::json body;
  body["texts"] = texts;
  body["encoder"] = encoder_id;
  const std::string payload = body.dump();

  std::mt19937_64 jitter_rng(std::random_device{}());
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  std::string last_failure;
  for (std::size_t attempt = 0; attempt <= config_.retry_limit; ++attempt) {
    if (attempt > 0) {
      const double delay = config_.backoff_base_seconds * std::pow(2.0, attempt - 1) * jitter(jitter_rng);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    httplib::Result res;
    {
      in_flight_.acquire();
      httplib::Client client(config_.endpoint);
      const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
      client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      res = client.Post("/embed", payload, "application/json");
      in_flight_.release();
    }
    if (!res) {
      last_failure = "connection error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_failure = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw ProviderError("bridge /embed returned HTTP " + std::to_string(res->status) + ": " +
                          res->body);
    }
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw IntegrityError(std::string("bridge /embed returned invalid JSON: ") + e.what());
    }
    if (!reply.contains("dim") || !reply.contains("vectors") || !reply["vectors"].is_array()) {
      throw IntegrityError("bridge /embed reply lacks dim/vectors");
    }
    const auto dim = reply["dim"].get<std::int64_t>();
    const auto& vectors = reply["vectors"];
    if (vectors.size() != texts.size()) {
      throw IntegrityError("bridge returned " + std::to_string(vectors.size()) + " vectors for " +
                           std::to_string(texts.size()) + " texts");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& row : vectors) {
      if (!row.is_array() || static_cast<std::int64_t>(row.size()) != dim) {
        throw IntegrityError("bridge vector has dimension " + std::to_string(row.size()) +
                             ", expected " + std::to_string(dim));
      }
      Eigen::VectorXd v(dim);
      for (std::int64_t i = 0; i < dim; ++i) v[i] = row[static_cast<std::size_t>(i)].get<double>();
      try {
        out.push_back(normalize(v, encoder_id));
      } catch (const ParameterError& e) {
        throw IntegrityError(std::string("bridge vector rejected: ") + e.what());
      }
    }
    return out;
  }
  throw ProviderError("bridge /embed failed after " + std::to_string(config_.retry_limit + 1) +
                      " attempt(s): " + last_failure);
}

std::vector<EmbeddingVector> RemoteProvider::embed(const EmbeddingRequest& request) {
  check_request(request);
  std::vector<std::optional<EmbeddingVector>> slots(request.texts.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < request.texts.size(); ++i) {
    if (cache_) slots[i] = cache_->lookup(request.texts[i], request.encoder_id);
    if (!slots[i]) pending.push_back(i);
  }

  std::vector<std::future<std::vector<EmbeddingVector>>> futures;
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < pending.size(); start += config_.batch_size) {
    const std::size_t end = std::min(pending.size(), start + config_.batch_size);
    batches.emplace_back(pending.begin() + start, pending.begin() + end);
  }
  for (const auto& batch : batches) {
    std::vector<std::string> texts;
    for (auto i : batch) texts.push_back(request.texts[i]);
    futures.push_back(std::async(std::launch::async, [this, texts = std::move(texts), &request] {
      return embed_batch(texts, request.encoder_id);
    }));
  }
  // Collect every future before rethrowing so no thread outlives `request`.
  std::exception_ptr failure;
  for (std::size_t b = 0; b < futures.size(); ++b) {
    try {
      auto vectors = futures[b].get();
      for (std::size_t k = 0; k < vectors.size(); ++k) slots[batches[b][k]] = std::move(vectors[k]);
    } catch (...) {
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<EmbeddingVector> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  check_batch(request, out);
  if (cache_) {
    for (auto i : pending) cache_->store(request.texts[i], out[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config) {
  switch (config.kind) {
    case ProviderKind::Mock:
      return std::make_unique<MockProvider>(config.mock_dim, config.mock_seed, config.mock_mode);
    case ProviderKind::File:
      return std::make_unique<FileProvider>(config.cache_path);
    case ProviderKind::Remote:
      return std::make_unique<RemoteProvider>(config);
  }
  throw ParameterError("unknown provider kind");
}

std::vector<EmbeddingVector> embed(const EmbeddingRequest& request, const ProviderConfig& config) {
  return make_provider(config)->embed(request);
}

}  // namespace driftlab
