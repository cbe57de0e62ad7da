#pragma once

// Exact O(n^2) t-SNE for projecting response embeddings to 2-D.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "driftlab/error.hpp"

namespace driftlab {

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch_iter = 250;
  double init_scale = 1e-4;
  std::uint64_t seed = 0;
};

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Squared Euclidean distances between rows.
template <typename Derived>
RowMatrix<typename Derived::Scalar> squared_distances(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.rows();
  RowMatrix<Scalar> d = RowMatrix<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = (x.row(i) - x.row(j)).squaredNorm();
      d(j, i) = d(i, j);
    }
  }
  return d;
}

template <typename Scalar>
struct ConditionalAffinities {
  RowMatrix<Scalar> p;                 // row i holds P(j | i); zero diagonal
  std::vector<Scalar> betas;           // Gaussian precision 1 / (2 sigma_i^2)
  std::vector<Scalar> entropy_bits;    // achieved Shannon entropy per row
  std::vector<std::size_t> clamped_rows;  // rows where the target was not reached
};

// Calibrates each row's Gaussian bandwidth by bisection so the conditional
// distribution has entropy log2(perplexity) bits.
template <typename Derived>
ConditionalAffinities<typename Derived::Scalar> conditional_affinities(
    const Eigen::MatrixBase<Derived>& x, double perplexity) {
  using Scalar = typename Derived::Scalar;
  using std::exp;
  using std::log;
  const Eigen::Index n = x.rows();
  if (n < 4) throw ParameterError("t-SNE affinities need at least 4 points");
  if (!(perplexity > 1.0) || !(perplexity < static_cast<double>(n))) {
    throw ParameterError("perplexity must lie in (1, n)");
  }
  constexpr int kMaxIter = 100;
  constexpr double kTargetTolBits = 1e-5;
  const Scalar target = static_cast<Scalar>(std::log(perplexity));  // nats
  const Scalar tol = static_cast<Scalar>(1e-10);

  const auto dist = squared_distances(x);
  ConditionalAffinities<Scalar> out;
  out.p = RowMatrix<Scalar>::Zero(n, n);
  out.betas.resize(static_cast<std::size_t>(n));
  out.entropy_bits.resize(static_cast<std::size_t>(n));

  std::vector<Scalar> shifted(static_cast<std::size_t>(n - 1));
  std::vector<Scalar> w(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar dmin = std::numeric_limits<Scalar>::max();
    for (Eigen::Index j = 0, k = 0; j < n; ++j) {
      if (j == i) continue;
      shifted[static_cast<std::size_t>(k++)] = dist(i, j);
      dmin = std::min(dmin, dist(i, j));
    }
    Scalar dmean = 0;
    for (auto& d : shifted) {
      d -= dmin;
      dmean += d;
    }
    dmean /= static_cast<Scalar>(shifted.size());

    // Entropy in nats for precision beta; fills w with the normalized row.
    auto entropy = [&](Scalar beta) {
      Scalar sum = 0;
      for (std::size_t k = 0; k < shifted.size(); ++k) {
        w[k] = exp(-beta * shifted[k]);
        sum += w[k];
      }
      Scalar weighted = 0;
      for (std::size_t k = 0; k < shifted.size(); ++k) {
        w[k] /= sum;
        weighted += shifted[k] * w[k];
      }
      return log(sum) + beta * weighted;
    };

    Scalar beta = dmean > 0 ? Scalar(1) / dmean : Scalar(1);
    Scalar lo = 0;
    Scalar hi = std::numeric_limits<Scalar>::infinity();
    Scalar h = entropy(beta);
    for (int iter = 0; iter < kMaxIter && std::abs(h - target) > tol; ++iter) {
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2 : (lo + hi) / 2;
      } else {
        hi = beta;
        beta = (lo + hi) / 2;
      }
      h = entropy(beta);
    }
    const Scalar bits = h / static_cast<Scalar>(std::log(2.0));
    if (std::abs(static_cast<double>(bits) - std::log2(perplexity)) > kTargetTolBits) {
      out.clamped_rows.push_back(static_cast<std::size_t>(i));
    }
    out.betas[static_cast<std::size_t>(i)] = beta;
    out.entropy_bits[static_cast<std::size_t>(i)] = bits;
    for (Eigen::Index j = 0, k = 0; j < n; ++j) {
      if (j == i) continue;
      out.p(i, j) = w[static_cast<std::size_t>(k++)];
    }
  }
  return out;
}

template <typename Scalar>
struct Affinities {
  RowMatrix<Scalar> p;  // symmetric joint distribution, sums to 1
  std::vector<std::size_t> clamped_rows;
};

template <typename Derived>
Affinities<typename Derived::Scalar> pairwise_affinities(const Eigen::MatrixBase<Derived>& x,
                                                        double perplexity) {
  using Scalar = typename Derived::Scalar;
  auto cond = conditional_affinities(x, perplexity);
  const auto n = static_cast<Scalar>(x.rows());
  Affinities<Scalar> out;
  out.p = (cond.p + cond.p.transpose()) / (Scalar(2) * n);
  out.clamped_rows = std::move(cond.clamped_rows);
  return out;
}

namespace detail {

// Unnormalized Student-t kernel (1 + |yi - yj|^2)^-1 with a zero diagonal.
template <typename Scalar>
RowMatrix<Scalar> student_kernel(const RowMatrix<Scalar>& y) {
  auto num = squared_distances(y);
  num = (Scalar(1) + num.array()).inverse().matrix();
  num.diagonal().setZero();
  return num;
}

}  // namespace detail

// KL(P || Q) with Q the normalized Student-t similarities of `y`.
template <typename Scalar>
Scalar kl_divergence(const RowMatrix<Scalar>& p, const RowMatrix<Scalar>& y) {
  const auto num = detail::student_kernel(y);
  const Scalar z = num.sum();
  Scalar kl = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (i == j || p(i, j) <= 0) continue;
      kl += p(i, j) * std::log(p(i, j) / (num(i, j) / z));
    }
  }
  return kl;
}

// dKL/dy_i = 4 sum_j (p_ij - q_ij)(y_i - y_j)(1 + |y_i - y_j|^2)^-1.
template <typename Scalar>
RowMatrix<Scalar> kl_gradient(const RowMatrix<Scalar>& p, const RowMatrix<Scalar>& y) {
  const auto num = detail::student_kernel(y);
  const Scalar z = num.sum();
  const RowMatrix<Scalar> pq = ((p - num / z).array() * num.array()).matrix();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row_sums = pq.rowwise().sum();
  return Scalar(4) * (row_sums.asDiagonal() * y - pq * y);
}

template <typename Scalar>
struct TsneResult {
  RowMatrix<Scalar> y;            // n x 2
  Scalar kl = 0;                  // final KL(P || Q) with the unexaggerated P
  std::vector<Scalar> kl_history;  // one entry per iteration
  std::vector<std::size_t> clamped_rows;
};

template <typename Derived>
TsneResult<typename Derived::Scalar> tsne(const Eigen::MatrixBase<Derived>& x, const TsneConfig& config) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.rows();
  if (n < 4) throw ParameterError("t-SNE needs at least 4 points");
  if (!(config.perplexity > 1.0)) throw ParameterError("perplexity must be > 1");
  if (config.perplexity > static_cast<double>(n - 1) / 3.0) {
    throw ParameterError("perplexity " + std::to_string(config.perplexity) + " exceeds (n - 1) / 3 = " +
                         std::to_string(static_cast<double>(n - 1) / 3.0));
  }
  if (config.iterations == 0) throw ParameterError("t-SNE iterations must be positive");
  if (!(config.learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
  if (!(config.early_exaggeration >= 1.0)) throw ParameterError("early exaggeration must be >= 1");

  auto aff = pairwise_affinities(x, config.perplexity);
  const RowMatrix<Scalar>& p = aff.p;

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  TsneResult<Scalar> result;
  result.clamped_rows = std::move(aff.clamped_rows);
  RowMatrix<Scalar> y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < 2; ++k) y(i, k) = static_cast<Scalar>(config.init_scale * normal(rng));
  }
  RowMatrix<Scalar> update = RowMatrix<Scalar>::Zero(n, 2);
  RowMatrix<Scalar> gains = RowMatrix<Scalar>::Ones(n, 2);
  const Scalar eta = static_cast<Scalar>(config.learning_rate);
  const Scalar min_gain = static_cast<Scalar>(0.01);

  result.kl_history.reserve(config.iterations);
  for (std::size_t iter = 0; iter < config.iterations; ++iter) {
    const Scalar exaggeration =
        iter < config.exaggeration_iters ? static_cast<Scalar>(config.early_exaggeration) : Scalar(1);
    const Scalar momentum = static_cast<Scalar>(
        iter < config.momentum_switch_iter ? config.initial_momentum : config.final_momentum);
    const RowMatrix<Scalar> grad = kl_gradient<Scalar>(exaggeration * p, y);
    if (!grad.allFinite()) throw TsneError("non-finite t-SNE gradient", iter);

    // Delta-bar-delta gains: grow where the step direction flips sign.
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < 2; ++k) {
        const bool same = (grad(i, k) > 0) == (update(i, k) > 0);
        gains(i, k) = std::max(same ? gains(i, k) * Scalar(0.8) : gains(i, k) + Scalar(0.2), min_gain);
      }
    }
    update = momentum * update - eta * gains.cwiseProduct(grad);
    y += update;
    y.rowwise() -= y.colwise().mean();
    result.kl_history.push_back(kl_divergence<Scalar>(p, y));
  }
  result.kl = result.kl_history.back();
  result.y = std::move(y);
  return result;
}

namespace detail {

template <typename Derived>
std::vector<std::vector<Eigen::Index>> knn(const Eigen::MatrixBase<Derived>& x, std::size_t k) {
  using Scalar = typename Derived::Scalar;
  const auto dist = squared_distances(x);
  const Eigen::Index n = x.rows();
  std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < n; ++i) {
    order.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      const Scalar da = dist(i, a);
      const Scalar db = dist(i, b);
      return da < db;
    });
    out[static_cast<std::size_t>(i)].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

}  // namespace detail

// Mean fraction of each point's k nearest neighbors (brute force, ties by
// index) shared between the high- and low-dimensional layouts.
template <typename DerivedHigh, typename DerivedLow>
double neighborhood_preservation(const Eigen::MatrixBase<DerivedHigh>& high,
                                 const Eigen::MatrixBase<DerivedLow>& low, std::size_t k) {
  const Eigen::Index n = high.rows();
  if (low.rows() != n) throw ParameterError("neighborhood_preservation: point counts differ");
  if (k == 0 || static_cast<Eigen::Index>(k) >= n) {
    throw ParameterError("neighborhood_preservation: k must lie in [1, n)");
  }
  const auto a = detail::knn(high, k);
  const auto b = detail::knn(low, k);
  double total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto sa = a[i];
    auto sb = b[i];
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    std::vector<Eigen::Index> common;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
    total += static_cast<double>(common.size()) / static_cast<double>(k);
  }
  return total / static_cast<double>(n);
}

struct ProjectedPoint {
  double x = 0;
  double y = 0;
  std::string record_ref;
  std::string model_label;
  std::string origin_label;
};

}  // namespace driftlab
