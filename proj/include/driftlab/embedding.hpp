#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

namespace driftlab {

// Sentence embedding s(y) of one text under a named encoder.
//
// Construction validates the invariants: finite components, nonzero norm,
// and unit norm (within 1e-6) whenever `normalized` is claimed.
class EmbeddingVector {
 public:
  static constexpr double kUnitTolerance = 1e-6;

  EmbeddingVector(Eigen::VectorXd values, std::string encoder_id, bool normalized);

  const Eigen::VectorXd& values() const noexcept { return values_; }
  Eigen::Index dim() const noexcept { return values_.size(); }
  const std::string& encoder_id() const noexcept { return encoder_id_; }
  bool normalized() const noexcept { return normalized_; }

  bool operator==(const EmbeddingVector& other) const {
    return encoder_id_ == other.encoder_id_ && normalized_ == other.normalized_ &&
           values_.size() == other.values_.size() && values_ == other.values_;
  }

 private:
  Eigen::VectorXd values_;
  std::string encoder_id_;
  bool normalized_;
};

// Scales `raw` to unit L2 norm. Zero or non-finite input is a ParameterError.
EmbeddingVector normalize(const Eigen::VectorXd& raw, std::string encoder_id = {});

template <typename Derived>
EmbeddingVector normalize(const Eigen::MatrixBase<Derived>& raw, std::string encoder_id = {}) {
  return normalize(Eigen::VectorXd(raw), std::move(encoder_id));
}

// Deterministic stand-in encoder: a Gaussian stream seeded from
// SHA-256(text) and `seed`, normalized. Distinct texts are near-orthogonal.
EmbeddingVector mock_embed(std::string_view text, std::size_t dim, std::uint64_t seed,
                           std::string encoder_id = "mock");

// Bag-of-tokens variant of the mock: sum of per-token hash vectors plus a
// small whole-text component. Texts sharing vocabulary get higher cosine, so
// paraphrase-vs-unrelated ordering can be exercised without a real encoder.
EmbeddingVector lexical_mock_embed(std::string_view text, std::size_t dim, std::uint64_t seed,
                                   std::string encoder_id = "mock-lexical");

// Append-only JSONL embedding cache keyed by (sha256(text), encoder_id).
// Lines: {"key": hex, "encoder": id, "dim": d, "values": [...]}. A later line
// for the same key replaces an earlier one. Thread-safe.
class EmbeddingCache {
 public:
  // Loads `path` when it exists. A corrupt line raises IntegrityError naming
  // the line number.
  explicit EmbeddingCache(std::string path);

  std::optional<EmbeddingVector> lookup(std::string_view text, std::string_view encoder_id) const;
  std::optional<EmbeddingVector> lookup_key(const std::string& key,
                                            std::string_view encoder_id) const;

  void store(std::string_view text, const EmbeddingVector& vector);

  std::size_t size() const;
  const std::string& path() const noexcept { return path_; }

  static std::string key_of(std::string_view text);

 private:
  std::string path_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, EmbeddingVector> entries_;  // key + '\n' + encoder
};

// One cache line (no trailing newline) for `text`.
std::string cache_line(std::string_view text, const EmbeddingVector& vector);

}  // namespace driftlab
