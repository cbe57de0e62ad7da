#pragma once

// Prompt-based semantic shift (PBSS) quantities over response embeddings:
// pairwise cosine drift, the drift matrix and its summaries, the empirical
// CDF of drift values, the hybrid score, and global/row z-score indices.
//
// The numeric kernels are templated on the Eigen scalar so they can run on
// float, double or long double matrices; the EmbeddingVector overloads are
// the checked entry points used by the pipeline.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "driftlab/core.hpp"
#include "driftlab/embedding.hpp"
#include "driftlab/error.hpp"

namespace driftlab {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// 1 - a.b for unit vectors, clamped to [0, 2] against rounding.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_drift(const Eigen::MatrixBase<DerivedA>& a,
                                       const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar d = Scalar(1) - a.dot(b);
  return std::clamp(d, Scalar(0), Scalar(2));
}

inline double drift(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw ComparisonError("drift between embeddings of dimension " + std::to_string(a.dim()) +
                          " and " + std::to_string(b.dim()));
  }
  if (a.encoder_id() != b.encoder_id()) {
    throw ComparisonError("drift between encoders " + a.encoder_id() + " and " + b.encoder_id());
  }
  if (!a.normalized() || !b.normalized()) throw ComparisonError("drift needs normalized embeddings");
  return cosine_drift(a.values(), b.values());
}

template <typename Scalar>
struct BasicDriftMatrix {
  DenseMatrix<Scalar> scores;
  std::vector<std::string> prompt_ids;
  std::string encoder_id;

  Eigen::Index size() const noexcept { return scores.rows(); }
};

using DriftMatrix = BasicDriftMatrix<double>;

// Pairwise drift of the rows of `unit_rows` (each row a unit vector). Each
// upper-triangle entry is computed once and mirrored.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> drift_scores(const Eigen::MatrixBase<Derived>& unit_rows) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = unit_rows.rows();
  if (n < 2) throw ParameterError("drift matrix needs at least 2 vectors");
  DenseMatrix<Scalar> d = DenseMatrix<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = cosine_drift(unit_rows.row(i), unit_rows.row(j));
      d(j, i) = d(i, j);
    }
  }
  return d;
}

inline DriftMatrix drift_matrix(const std::vector<EmbeddingVector>& vectors,
                                std::vector<std::string> ids) {
  const auto n = static_cast<Eigen::Index>(vectors.size());
  if (n < 2) throw ParameterError("drift matrix needs at least 2 vectors");
  if (ids.size() != vectors.size()) throw ParameterError("drift matrix: ids/vectors length mismatch");
  DriftMatrix m;
  m.scores = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      m.scores(i, j) = drift(vectors[static_cast<std::size_t>(i)], vectors[static_cast<std::size_t>(j)]);
      m.scores(j, i) = m.scores(i, j);
    }
  }
  m.prompt_ids = std::move(ids);
  m.encoder_id = vectors.front().encoder_id();
  return m;
}

// Throws IntegrityError unless the matrix is square, has a zero diagonal, is
// exactly symmetric and every entry lies in [0, 2].
template <typename Scalar>
void check_drift_matrix(const BasicDriftMatrix<Scalar>& m) {
  const Eigen::Index n = m.scores.rows();
  if (n != m.scores.cols()) throw IntegrityError("drift matrix is not square");
  if (static_cast<std::size_t>(n) != m.prompt_ids.size()) {
    throw IntegrityError("drift matrix ids do not match its size");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (m.scores(i, i) != Scalar(0)) throw IntegrityError("drift matrix diagonal is not zero");
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Scalar v = m.scores(i, j);
      if (v != m.scores(j, i)) throw IntegrityError("drift matrix is not symmetric");
      if (!(v >= Scalar(0) && v <= Scalar(2))) throw IntegrityError("drift entry outside [0, 2]");
    }
  }
}

// Upper-triangle entries (i < j) in row-major order.
template <typename Derived>
std::vector<typename Derived::Scalar> upper_triangle(const Eigen::MatrixBase<Derived>& scores) {
  std::vector<typename Derived::Scalar> out;
  const Eigen::Index n = scores.rows();
  out.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) out.push_back(scores(i, j));
  }
  return out;
}

template <typename Scalar>
std::vector<Scalar> select_pairs(const BasicDriftMatrix<Scalar>& m, PairSelection selection) {
  if (selection == PairSelection::AllPairs) return upper_triangle(m.scores);
  std::vector<Scalar> out;
  for (Eigen::Index j = 1; j < m.size(); ++j) out.push_back(m.scores(0, j));
  return out;
}

template <typename Scalar>
struct DriftSummary {
  Scalar mean = 0;
  Scalar max = 0;
  std::size_t count = 0;
};

template <typename Scalar>
DriftSummary<Scalar> summarize(const BasicDriftMatrix<Scalar>& m) {
  const Eigen::Index n = m.size();
  if (n < 2) throw ParameterError("summary needs at least a 2x2 drift matrix");
  DriftSummary<Scalar> s;
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      sum += m.scores(i, j);
      s.max = std::max(s.max, m.scores(i, j));
    }
  }
  s.count = static_cast<std::size_t>(n * (n - 1) / 2);
  s.mean = sum / static_cast<Scalar>(s.count);
  return s;
}

// Right-continuous empirical CDF F(delta) = #{score <= delta} / #scores.
template <typename Scalar>
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<Scalar> scores) : sorted_(std::move(scores)) {
    if (sorted_.empty()) throw ParameterError("empirical CDF needs at least one score");
    std::sort(sorted_.begin(), sorted_.end());
  }

  Scalar operator()(Scalar delta) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), delta);
    return static_cast<Scalar>(it - sorted_.begin()) / static_cast<Scalar>(sorted_.size());
  }

  const std::vector<Scalar>& sorted_scores() const noexcept { return sorted_; }
  std::size_t size() const noexcept { return sorted_.size(); }

  struct Knot {
    Scalar delta;
    Scalar value;
  };

  // Step-curve corners: (0, F(0)), then (s, F(s)) for each distinct score
  // s > 0, then (2, 1).
  std::vector<Knot> knots() const {
    std::vector<Knot> out;
    out.push_back({Scalar(0), (*this)(Scalar(0))});
    for (std::size_t i = 0; i < sorted_.size(); ++i) {
      if (i + 1 < sorted_.size() && sorted_[i + 1] == sorted_[i]) continue;
      if (sorted_[i] <= Scalar(0) || sorted_[i] >= Scalar(2)) continue;
      out.push_back({sorted_[i], static_cast<Scalar>(i + 1) / static_cast<Scalar>(sorted_.size())});
    }
    out.push_back({Scalar(2), Scalar(1)});
    return out;
  }

 private:
  std::vector<Scalar> sorted_;
};

template <typename Scalar>
EmpiricalCdf<Scalar> cdf(const BasicDriftMatrix<Scalar>& m) {
  if (m.size() < 2) throw ParameterError("CDF needs at least a 2x2 drift matrix");
  return EmpiricalCdf<Scalar>(upper_triangle(m.scores));
}

// lambda * sem_sim + (1 - lambda) * pbss.
template <typename Scalar>
Scalar hybrid_score(Scalar sem_sim, Scalar pbss, Scalar lambda) {
  if (!(lambda >= Scalar(0) && lambda <= Scalar(1))) {
    throw ParameterError("hybrid weight lambda must lie in [0, 1]");
  }
  return lambda * sem_sim + (Scalar(1) - lambda) * pbss;
}

// Hybrid matrix with the semantic term instantiated as the cosine similarity
// of the two response embeddings, i.e. 1 - D. Diagonal stays zero.
template <typename Scalar>
DenseMatrix<Scalar> hybrid_matrix(const BasicDriftMatrix<Scalar>& m, Scalar lambda) {
  const Eigen::Index n = m.size();
  DenseMatrix<Scalar> h = DenseMatrix<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) h(i, j) = hybrid_score(Scalar(1) - m.scores(i, j), m.scores(i, j), lambda);
    }
  }
  return h;
}

enum class ZScoreMode { Global, Row };

template <typename Scalar>
struct ZScoreMatrix {
  DenseMatrix<Scalar> z;  // diagonal stored as 0 and masked
  ZScoreMode mode = ZScoreMode::Global;
  // Set when the relevant off-diagonal set has zero spread. Affected
  // entries are 0.
  bool degenerate = false;
  std::vector<bool> degenerate_rows;
};

namespace detail {

template <typename Scalar>
struct MeanStd {
  Scalar mean;
  Scalar std;
  bool degenerate;
};

// Population mean/std. Spread below a few ulps of the mean counts as zero.
template <typename Scalar>
MeanStd<Scalar> population_moments(const std::vector<Scalar>& values) {
  Scalar sum = 0;
  for (auto v : values) sum += v;
  const Scalar mean = sum / static_cast<Scalar>(values.size());
  Scalar sq = 0;
  for (auto v : values) sq += (v - mean) * (v - mean);
  const Scalar std = std::sqrt(sq / static_cast<Scalar>(values.size()));
  const Scalar floor = Scalar(16) * std::numeric_limits<Scalar>::epsilon() *
                       std::max(Scalar(1), std::abs(mean));
  return {mean, std, !(std > floor)};
}

}  // namespace detail

template <typename Scalar>
ZScoreMatrix<Scalar> zscore(const BasicDriftMatrix<Scalar>& m, ZScoreMode mode) {
  const Eigen::Index n = m.size();
  if (n < 2) throw ParameterError("z-scores need at least a 2x2 drift matrix");
  if (mode == ZScoreMode::Row && n < 3) {
    throw ParameterError("row z-scores need n >= 3 (two off-diagonal entries per row)");
  }
  ZScoreMatrix<Scalar> out;
  out.mode = mode;
  out.z = DenseMatrix<Scalar>::Zero(n, n);
  out.degenerate_rows.assign(static_cast<std::size_t>(n), false);

  if (mode == ZScoreMode::Global) {
    std::vector<Scalar> off;
    off.reserve(static_cast<std::size_t>(n * (n - 1)));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j) off.push_back(m.scores(i, j));
      }
    }
    const auto mom = detail::population_moments(off);
    if (mom.degenerate) {
      out.degenerate = true;
      out.degenerate_rows.assign(static_cast<std::size_t>(n), true);
      return out;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j) out.z(i, j) = (m.scores(i, j) - mom.mean) / mom.std;
      }
    }
    return out;
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<Scalar> row;
    row.reserve(static_cast<std::size_t>(n - 1));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) row.push_back(m.scores(i, j));
    }
    const auto mom = detail::population_moments(row);
    if (mom.degenerate) {
      out.degenerate = true;
      out.degenerate_rows[static_cast<std::size_t>(i)] = true;
      continue;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) out.z(i, j) = (m.scores(i, j) - mom.mean) / mom.std;
    }
  }
  return out;
}

// Export: header of prompt ids, then one row of shortest-round-trip floats
// per matrix row.
std::string matrix_to_csv(const Eigen::MatrixXd& values, const std::vector<std::string>& ids);

struct LabeledMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> ids;
};

LabeledMatrix matrix_from_csv(std::string_view csv);

std::string to_json(const DriftMatrix& m);

}  // namespace driftlab
