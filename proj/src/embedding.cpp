#include "driftlab/embedding.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <vector>

#include "driftlab/error.hpp"
#include "driftlab/hash.hpp"
#include "driftlab/text.hpp"
#include "json.hpp"

namespace driftlab {

EmbeddingVector::EmbeddingVector(Eigen::VectorXd values, std::string encoder_id, bool normalized)
    : values_(std::move(values)), encoder_id_(std::move(encoder_id)), normalized_(normalized) {
  if (values_.size() == 0) throw ParameterError("embedding has zero dimension");
  if (!values_.allFinite()) throw ParameterError("embedding has non-finite components");
  const double norm = values_.norm();
  if (!(norm > 0.0)) throw ParameterError("embedding is the zero vector");
  if (normalized_ && std::abs(norm - 1.0) > kUnitTolerance) {
    throw ParameterError("embedding flagged normalized but has norm " + std::to_string(norm));
  }
}

EmbeddingVector normalize(const Eigen::VectorXd& raw, std::string encoder_id) {
  if (raw.size() == 0) throw ParameterError("cannot normalize an empty vector");
  if (!raw.allFinite()) throw ParameterError("cannot normalize a non-finite vector");
  // Rescale by the max-abs component first so tiny or huge inputs neither
  // underflow nor overflow in the squared norm.
  const double scale = raw.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) throw ParameterError("cannot normalize the zero vector");
  Eigen::VectorXd v = raw / scale;
  v /= v.norm();
  return EmbeddingVector(std::move(v), std::move(encoder_id), true);
}

namespace {

std::mt19937_64 stream_for(std::string_view domain, std::string_view text, std::uint64_t seed) {
  std::string material(domain);
  material += text;
  const auto digest = sha256(material);
  std::vector<std::uint32_t> words;
  words.reserve(10);
  for (std::size_t i = 0; i < digest.size(); i += 4) {
    words.push_back(static_cast<std::uint32_t>(digest[i]) << 24 |
                    static_cast<std::uint32_t>(digest[i + 1]) << 16 |
                    static_cast<std::uint32_t>(digest[i + 2]) << 8 |
                    static_cast<std::uint32_t>(digest[i + 3]));
  }
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

Eigen::VectorXd gaussian_draw(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  return v;
}

}  // namespace

EmbeddingVector mock_embed(std::string_view text, std::size_t dim, std::uint64_t seed,
                           std::string encoder_id) {
  if (dim < 2) throw ParameterError("mock embedding dimension must be >= 2");
  auto rng = stream_for("text:", text, seed);
  return normalize(gaussian_draw(rng, dim), std::move(encoder_id));
}

EmbeddingVector lexical_mock_embed(std::string_view text, std::size_t dim, std::uint64_t seed,
                                   std::string encoder_id) {
  if (dim < 2) throw ParameterError("mock embedding dimension must be >= 2");
  constexpr double kWholeTextWeight = 0.25;
  auto text_rng = stream_for("text:", text, seed);
  Eigen::VectorXd acc = kWholeTextWeight * gaussian_draw(text_rng, dim);
  for (const auto& token : tokenize(text)) {
    auto rng = stream_for("token:", token, seed);
    acc += gaussian_draw(rng, dim);
  }
  return normalize(acc, std::move(encoder_id));
}

// ---------------------------------------------------------------------------

namespace {
std::string entry_key(const std::string& key, std::string_view encoder) {
  std::string k = key;
  k += '\n';
  k += encoder;
  return k;
}
}  // namespace

EmbeddingCache::EmbeddingCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;  // a missing cache is an empty cache
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      const auto key = obj.at("key").get<std::string>();
      const auto encoder = obj.at("encoder").get<std::string>();
      const auto dim = obj.at("dim").get<std::int64_t>();
      const auto& values = obj.at("values");
      if (key.size() != 64) throw IntegrityError("key is not a hex SHA-256");
      if (!values.is_array() || static_cast<std::int64_t>(values.size()) != dim || dim <= 0) {
        throw IntegrityError("values length does not match dim");
      }
      Eigen::VectorXd v(dim);
      for (std::int64_t i = 0; i < dim; ++i) v[i] = values[static_cast<std::size_t>(i)].get<double>();
      const bool unit = std::abs(v.norm() - 1.0) <= EmbeddingVector::kUnitTolerance;
      entries_.insert_or_assign(entry_key(key, encoder), EmbeddingVector(std::move(v), encoder, unit));
    } catch (const std::exception& e) {
      throw IntegrityError(path_ + ":" + std::to_string(line_no) + ": corrupt cache line (" +
                           e.what() + ")");
    }
  }
}

std::string EmbeddingCache::key_of(std::string_view text) { return sha256_hex(text); }

std::optional<EmbeddingVector> EmbeddingCache::lookup(std::string_view text,
                                                      std::string_view encoder_id) const {
  return lookup_key(key_of(text), encoder_id);
}

std::optional<EmbeddingVector> EmbeddingCache::lookup_key(const std::string& key,
                                                          std::string_view encoder_id) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(entry_key(key, encoder_id));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string cache_line(std::string_view text, const EmbeddingVector& vector) {
  nlohmann::ordered_json obj;
  obj["key"] = EmbeddingCache::key_of(text);
  obj["encoder"] = vector.encoder_id();
  obj["dim"] = vector.dim();
  auto values = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < vector.dim(); ++i) values.push_back(vector.values()[i]);
  obj["values"] = std::move(values);
  return obj.dump();
}

void EmbeddingCache::store(std::string_view text, const EmbeddingVector& vector) {
  const std::string key = key_of(text);
  const std::string line = cache_line(text, vector);

  std::lock_guard lock(mutex_);
  auto ek = entry_key(key, vector.encoder_id());
  if (auto it = entries_.find(ek); it != entries_.end() && it->second == vector) return;
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to cache " + path_);
  out << line << '\n';
  if (!out) throw IoError("write failed for cache " + path_);
  entries_.insert_or_assign(std::move(ek), vector);
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

}  // namespace driftlab
