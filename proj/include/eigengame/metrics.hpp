#pragma once

#include "eigengame/common.hpp"
#include "eigengame/gram.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <vector>

namespace eigengame {

/// arcsin(sqrt(1 - <v, v_hat>^2)) after normalizing both; sign-blind.
/// Evaluated as atan2(|sin|, |cos|) so angles below 1e-8 keep full precision.
template <typename DA, typename DB>
double angular_error(const Eigen::MatrixBase<DA>& v_hat, const Eigen::MatrixBase<DB>& v) {
  const double na = static_cast<double>(v_hat.norm());
  const double nb = static_cast<double>(v.norm());
  if (!(na > 0.0) || !(nb > 0.0)) throw Error(ErrorCode::invalid_argument, "angular_error: zero vector");
  if (v_hat.size() != v.size()) throw Error(ErrorCode::invalid_dimension, "angular_error: size mismatch");
  const VectorXd a = v_hat.template cast<double>() / na;
  const VectorXd b = v.template cast<double>() / nb;
  const double c = std::clamp(a.dot(b), -1.0, 1.0);
  const double s = (a - c * b).norm();
  return std::atan2(s, std::abs(c));
}

template <typename Scalar>
std::vector<double> angular_errors(const Matrix<Scalar>& v_hat, const Matrix<Scalar>& v) {
  std::vector<double> out(static_cast<std::size_t>(v_hat.cols()));
  for (Index i = 0; i < v_hat.cols(); ++i) out[static_cast<std::size_t>(i)] = angular_error(v_hat.col(i), v.col(i));
  return out;
}

/// Largest m with every error among the first m components below tol.
/// Components flagged in `excluded` are skipped: they neither extend nor
/// break the streak.
inline Index longest_streak(const std::vector<double>& errors, double tol,
                            const std::vector<bool>& excluded = {}) {
  if (!(tol > 0.0)) throw Error(ErrorCode::invalid_argument, "longest_streak: tol must be > 0");
  Index streak = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (i < excluded.size() && excluded[i]) continue;
    if (!(errors[i] < tol)) break;
    ++streak;
  }
  return streak;
}

template <typename Scalar>
Index longest_streak(const Matrix<Scalar>& v_hat, const Matrix<Scalar>& v, double tol,
                     const std::vector<bool>& excluded = {}) {
  return longest_streak(angular_errors(v_hat, v.leftCols(v_hat.cols())), tol, excluded);
}

/// 1 - Tr(U* P) / k with U* = V V^+ and P = V_hat V_hat^+.
template <typename Scalar>
double subspace_distance(const Matrix<Scalar>& v_hat, const Matrix<Scalar>& v) {
  if (v_hat.rows() != v.rows() || v_hat.cols() != v.cols())
    throw Error(ErrorCode::invalid_dimension, "subspace_distance: shapes differ");
  const Index k = v.cols();
  auto projector = [k](const Matrix<Scalar>& a, const char* which) {
    Eigen::CompleteOrthogonalDecomposition<Matrix<Scalar>> cod;
    cod.setThreshold(Scalar(1e-10));
    cod.compute(a);
    if (cod.rank() < k)
      throw Error(ErrorCode::rank, std::string("subspace_distance: ") + which + " is rank deficient");
    Matrix<Scalar> p = a * cod.pseudoInverse();
    return p;
  };
  const Matrix<Scalar> u = projector(v, "V");
  const Matrix<Scalar> p = projector(v_hat, "V_hat");
  return 1.0 - static_cast<double>((u * p).trace()) / static_cast<double>(k);
}

/// ||V_hat^T V_rest||_F^2 where V_rest holds the eigenvectors beyond the top k.
template <typename Scalar>
double subspace_leakage(const Matrix<Scalar>& v_hat, const Matrix<Scalar>& v_full) {
  const Index k = v_hat.cols();
  const Index d = v_full.cols();
  if (k >= d) return 0.0;
  return static_cast<double>((v_hat.transpose() * v_full.rightCols(d - k)).squaredNorm());
}

struct Matching {
  /// perm[j] = column of V_hat assigned to ground-truth column j.
  std::vector<Index> perm;
  /// Sign that aligns V_hat[:, perm[j]] with V[:, j].
  std::vector<int> signs;
  double total_error = 0;
};

namespace detail {

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian method
/// with potentials). Returns row_for_col.
inline std::vector<Index> hungarian(const MatrixXd& cost) {
  const Index n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), w(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const Index i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - w[sj];
        if (cur < minv[sj]) {
          minv[sj] = cur;
          way[sj] = j0;
        }
        if (minv[sj] < delta) {
          delta = minv[sj];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) {
          u[static_cast<std::size_t>(p[sj])] += delta;
          w[sj] -= delta;
        } else {
          minv[sj] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> row_for_col(static_cast<std::size_t>(n));
  for (Index j = 1; j <= n; ++j) row_for_col[static_cast<std::size_t>(j - 1)] = p[static_cast<std::size_t>(j)] - 1;
  return row_for_col;
}

}  // namespace detail

/// Assignment of estimated to true columns minimizing the total sign-blind
/// angular error.
template <typename Scalar>
Matching optimal_matching(const Matrix<Scalar>& v_hat, const Matrix<Scalar>& v) {
  if (v_hat.rows() != v.rows() || v_hat.cols() != v.cols())
    throw Error(ErrorCode::invalid_dimension, "optimal_matching: shapes differ");
  const Index k = v.cols();
  MatrixXd cost(k, k);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b) cost(a, b) = angular_error(v_hat.col(a), v.col(b));
  Matching m;
  m.perm = detail::hungarian(cost);
  for (Index j = 0; j < k; ++j) {
    const Index a = m.perm[static_cast<std::size_t>(j)];
    m.signs.push_back(v_hat.col(a).dot(v.col(j)) < Scalar(0) ? -1 : 1);
    m.total_error += cost(a, j);
  }
  return m;
}

template <typename Scalar>
Matrix<Scalar> apply_matching(const Matrix<Scalar>& v_hat, const Matching& m) {
  Matrix<Scalar> out(v_hat.rows(), v_hat.cols());
  for (Index j = 0; j < v_hat.cols(); ++j)
    out.col(j) = Scalar(m.signs[static_cast<std::size_t>(j)]) * v_hat.col(m.perm[static_cast<std::size_t>(j)]);
  return out;
}

template <typename Scalar = double>
struct ScreeData {
  Vector<Scalar> rayleigh;
  Vector<Scalar> penalty;
  /// penalty / rayleigh per column.
  Vector<Scalar> ratio;
  /// rayleigh - penalty, the player utilities.
  Vector<Scalar> utility;
};

/// Per-column Rayleigh quotient and the magnitude of the game penalty
/// sum_{j<i} <v_i, M v_j>^2 / <v_j, M v_j>.
template <typename Scalar>
ScreeData<Scalar> rayleigh_quotients(const Matrix<Scalar>& v_hat, const GramOperator<Scalar>& op) {
  const Matrix<Scalar> r = op.gram(v_hat);
  const Index k = v_hat.cols();
  ScreeData<Scalar> s;
  s.rayleigh = r.diagonal();
  s.penalty = Vector<Scalar>::Zero(k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < i; ++j)
      if (r(j, j) > Scalar(0)) s.penalty(i) += r(i, j) * r(i, j) / r(j, j);
  s.ratio = s.penalty.cwiseQuotient(s.rayleigh.cwiseAbs().cwiseMax(std::numeric_limits<Scalar>::min()));
  s.utility = s.rayleigh - s.penalty;
  return s;
}

struct MetricsRecord {
  std::int64_t iteration = 0;
  double wall_ms = 0;
  Index streak = 0;
  double subspace_distance = 0;
  std::vector<double> angles;
  std::vector<double> rayleigh;
};

template <typename Scalar>
MetricsRecord make_record(std::int64_t iteration, double wall_ms, const Matrix<Scalar>& v_hat,
                          const Matrix<Scalar>& truth_v, const GramOperator<Scalar>& op, double tol,
                          const std::vector<bool>& excluded = {}) {
  MetricsRecord r;
  r.iteration = iteration;
  r.wall_ms = wall_ms;
  const Matrix<Scalar> top = truth_v.leftCols(v_hat.cols());
  r.angles = angular_errors(v_hat, top);
  r.streak = longest_streak(r.angles, tol, excluded);
  r.subspace_distance = subspace_distance(v_hat, top);
  const Vector<Scalar> q = op.gram(v_hat).diagonal();
  r.rayleigh.assign(q.data(), q.data() + q.size());
  return r;
}

inline void write_metrics_header(std::ostream& os, Index k) {
  os << "iter,wall_ms,streak,subspace_dist";
  for (Index i = 1; i <= k; ++i) os << ",theta_" << i;
  for (Index i = 1; i <= k; ++i) os << ",rq_" << i;
  os << '\n';
}

inline void write_metrics_row(std::ostream& os, const MetricsRecord& r) {
  os << r.iteration << ',' << r.wall_ms << ',' << r.streak << ',' << r.subspace_distance;
  for (double a : r.angles) os << ',' << a;
  for (double q : r.rayleigh) os << ',' << q;
  os << '\n';
}

}  // namespace eigengame
