#pragma once

#include "eigengame/common.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <utility>

namespace eigengame {

/// Uniform sample on S^{d-1}: a normalized isotropic Gaussian draw.
template <typename Scalar = double, typename Rng>
Vector<Scalar> sample_unit_sphere(Index d, Rng& rng) {
  if (d < 1) throw Error(ErrorCode::invalid_dimension, "sample_unit_sphere: d must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector<Scalar> v(d);
  Scalar norm = 0;
  do {
    for (Index i = 0; i < d; ++i) v(i) = static_cast<Scalar>(normal(rng));
    norm = v.norm();
  } while (!(norm > Scalar(0)));
  return v / norm;
}

template <typename Scalar = double>
Vector<Scalar> sample_unit_sphere(Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_unit_sphere<Scalar>(d, rng);
}

/// d x k matrix of independent uniform unit columns. Column i uses
/// derive_seed(seed, i) so that the i-th column does not depend on k.
template <typename Scalar = double>
Matrix<Scalar> random_unit_columns(Index d, Index k, std::uint64_t seed) {
  Matrix<Scalar> V(d, k);
  for (Index i = 0; i < k; ++i)
    V.col(i) = sample_unit_sphere<Scalar>(d, derive_seed(seed, static_cast<std::uint64_t>(i)));
  return V;
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// column signs fixed by sign(diag(R)).
template <typename Scalar = double>
Matrix<Scalar> random_orthogonal(Index d, std::uint64_t seed) {
  if (d < 1) throw Error(ErrorCode::invalid_dimension, "random_orthogonal: d must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<Scalar> G(d, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) G(i, j) = static_cast<Scalar>(normal(rng));
  Eigen::HouseholderQR<Matrix<Scalar>> qr(G);
  Matrix<Scalar> Q = qr.householderQ() * Matrix<Scalar>::Identity(d, d);
  for (Index j = 0; j < d; ++j)
    if (qr.matrixQR()(j, j) < Scalar(0)) Q.col(j) = -Q.col(j);
  return Q;
}

enum class SpectrumKind { linear, exponential, bubble };

struct SpectrumSpec {
  SpectrumKind kind = SpectrumKind::linear;
  Index d = 50;
  double lambda_max = 1000.0;
  double lambda_min = 1.0;
  /// 1-based inclusive index interval; only read for bubble spectra, which
  /// start from the linear spectrum and flatten this range to its first value.
  std::optional<std::pair<Index, Index>> bubble_range;
};

inline void validate(const SpectrumSpec& spec) {
  if (spec.d < 2) throw Error(ErrorCode::invalid_dimension, "spectrum: d must be >= 2");
  if (!(spec.lambda_min > 0.0) || !(spec.lambda_max > spec.lambda_min))
    throw Error(ErrorCode::invalid_argument, "spectrum: need lambda_max > lambda_min > 0");
  if (spec.kind == SpectrumKind::bubble) {
    if (!spec.bubble_range) throw Error(ErrorCode::range, "spectrum: bubble requires a bubble range");
    const auto [first, last] = *spec.bubble_range;
    if (first < 1 || last > spec.d || first > last)
      throw Error(ErrorCode::range, "spectrum: bubble range must lie within [1, d]");
  }
}

/// Descending eigenvalues for a synthetic problem.
template <typename Scalar = double>
Vector<Scalar> make_spectrum(const SpectrumSpec& spec) {
  validate(spec);
  const Index d = spec.d;
  Vector<Scalar> lambda(d);
  const double span = static_cast<double>(d - 1);
  if (spec.kind == SpectrumKind::exponential) {
    const double log_hi = std::log10(spec.lambda_max);
    const double log_lo = std::log10(spec.lambda_min);
    for (Index i = 0; i < d; ++i)
      lambda(i) = static_cast<Scalar>(std::pow(10.0, log_hi + (log_lo - log_hi) * (i / span)));
  } else {
    const double step = (spec.lambda_max - spec.lambda_min) / span;
    for (Index i = 0; i < d; ++i) lambda(i) = static_cast<Scalar>(spec.lambda_max - step * i);
  }
  lambda(0) = static_cast<Scalar>(spec.lambda_max);
  lambda(d - 1) = static_cast<Scalar>(spec.lambda_min);
  if (spec.kind == SpectrumKind::bubble) {
    const auto [first, last] = *spec.bubble_range;
    const Scalar flat = lambda(first - 1);
    for (Index i = first; i < last; ++i) lambda(i) = flat;
  }
  return lambda;
}

/// Eigen-decomposition of a synthetic problem. gaps(i) = lambda(i) - lambda(i+1)
/// and kappa(i) = lambda(0) / lambda(i), both 0-based.
template <typename Scalar = double>
struct GroundTruth {
  Vector<Scalar> lambda;
  Matrix<Scalar> v;
  Vector<Scalar> gaps;
  Vector<Scalar> kappa;

  static GroundTruth from(Vector<Scalar> lambda, Matrix<Scalar> v) {
    GroundTruth t;
    const Index d = lambda.size();
    t.gaps = lambda.head(d - 1) - lambda.tail(d - 1);
    t.kappa = Vector<Scalar>::Constant(d, lambda(0)).cwiseQuotient(lambda);
    t.lambda = std::move(lambda);
    t.v = std::move(v);
    return t;
  }

  Index dim() const { return lambda.size(); }
};

template <typename Scalar = double>
struct SyntheticProblem {
  Matrix<Scalar> m;
  GroundTruth<Scalar> truth;
};

/// M = diag(lambda) when rotate is false, otherwise Q diag(lambda) Q^T for a
/// seeded Haar rotation Q (then truth.v = Q).
template <typename Scalar = double>
SyntheticProblem<Scalar> synthetic_matrix(const SpectrumSpec& spec, bool rotate,
                                          std::uint64_t seed = 0) {
  Vector<Scalar> lambda = make_spectrum<Scalar>(spec);
  const Index d = spec.d;
  SyntheticProblem<Scalar> p;
  if (!rotate) {
    p.m = lambda.asDiagonal();
    p.truth = GroundTruth<Scalar>::from(lambda, Matrix<Scalar>::Identity(d, d));
    return p;
  }
  Matrix<Scalar> q = random_orthogonal<Scalar>(d, seed);
  Matrix<Scalar> m = q * lambda.asDiagonal() * q.transpose();
  p.m = (m + m.transpose()) / Scalar(2);
  p.truth = GroundTruth<Scalar>::from(lambda, std::move(q));
  return p;
}

/// Dense symmetric eigen-decomposition sorted descending.
template <typename Derived>
auto dense_eigen(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(m.eval());
  Vector<Scalar> lambda = es.eigenvalues().reverse();
  Matrix<Scalar> v = es.eigenvectors().rowwise().reverse();
  return GroundTruth<Scalar>::from(std::move(lambda), std::move(v));
}

}  // namespace eigengame
