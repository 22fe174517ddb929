#pragma once

#include "eigengame/common.hpp"
#include "eigengame/data_source.hpp"
#include "eigengame/gram.hpp"
#include "eigengame/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace eigengame {

enum class UpdateRule { eigengame, eigengame_r, oja, gha, hebb_deflation, krasulina };

inline const char* to_string(UpdateRule r) {
  switch (r) {
    case UpdateRule::eigengame: return "eigengame";
    case UpdateRule::eigengame_r: return "eigengame-r";
    case UpdateRule::oja: return "oja";
    case UpdateRule::gha: return "gha";
    case UpdateRule::hebb_deflation: return "hebb-deflation";
    case UpdateRule::krasulina: return "krasulina";
  }
  return "unknown";
}

inline UpdateRule parse_rule(const std::string& s) {
  for (auto r : {UpdateRule::eigengame, UpdateRule::eigengame_r, UpdateRule::oja, UpdateRule::gha,
                 UpdateRule::hebb_deflation, UpdateRule::krasulina})
    if (s == to_string(r)) return r;
  throw Error(ErrorCode::invalid_argument, "unknown update rule '" + s + "'");
}

/// sign(sign(diag(R)) + 0.5): +1 for non-negative entries, -1 otherwise.
template <typename Derived>
auto qr_sign_fix(const Eigen::MatrixBase<Derived>& diag_r) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> s(diag_r.size());
  for (Index i = 0; i < diag_r.size(); ++i) {
    const Scalar x = diag_r(i);
    const Scalar sx = x > Scalar(0) ? Scalar(1) : (x < Scalar(0) ? Scalar(-1) : Scalar(0));
    s(i) = sx + Scalar(0.5) > Scalar(0) ? Scalar(1) : Scalar(-1);
  }
  return s;
}

/// Householder QR followed by the sign fix; Q is d x k.
template <typename Scalar>
Matrix<Scalar> orthonormalize(const Matrix<Scalar>& v) {
  const Index d = v.rows();
  const Index k = v.cols();
  if (k > d) throw Error(ErrorCode::invalid_dimension, "orthonormalize: k > d");
  Eigen::HouseholderQR<Matrix<Scalar>> qr(v);
  const Vector<Scalar> diag = qr.matrixQR().diagonal().head(k);
  const Scalar scale = v.colwise().norm().maxCoeff();
  if (!(diag.cwiseAbs().minCoeff() > Scalar(1e-12) * scale))
    throw Error(ErrorCode::orthonormalization, "orthonormalize: columns are rank deficient");
  Matrix<Scalar> q = qr.householderQ() * Matrix<Scalar>::Identity(d, k);
  return q * qr_sign_fix(diag).asDiagonal();
}

/// V <- QS with (Q, R) = QR(V + eta M V).
template <typename Scalar>
Matrix<Scalar> oja_step(const Matrix<Scalar>& v, const GramOperator<Scalar>& op, Scalar eta) {
  return orthonormalize<Scalar>(v + eta * op.apply(v));
}

/// Delta v_i = 2 [M v_i - (v_i^T M v_i) v_i - sum_{j<i} (v_i^T M v_j) v_j].
template <typename Scalar>
Matrix<Scalar> gha_update(const Matrix<Scalar>& v, const GramOperator<Scalar>& op) {
  const Matrix<Scalar> mv = op.apply(v);
  const Matrix<Scalar> r = v.transpose() * mv;
  Matrix<Scalar> upper = r.template triangularView<Eigen::Upper>();
  return Scalar(2) * (mv - v * upper);
}

template <typename Scalar>
Matrix<Scalar> gha_step(const Matrix<Scalar>& v, const GramOperator<Scalar>& op, Scalar eta,
                        bool normalize = false) {
  Matrix<Scalar> out = v + eta * gha_update(v, op);
  if (normalize) out.colwise().normalize();
  return out;
}

/// V <- QR-orthonormalize(V + eta (I - V V^T) M V).
template <typename Scalar>
Matrix<Scalar> krasulina_step(const Matrix<Scalar>& v, const GramOperator<Scalar>& op, Scalar eta) {
  const Matrix<Scalar> mv = op.apply(v);
  const Matrix<Scalar> dir = mv - v * (v.transpose() * mv);
  return orthonormalize<Scalar>(v + eta * dir);
}

template <typename Scalar = double>
struct BaselineState {
  Matrix<Scalar> v_hat;
  UpdateRule rule = UpdateRule::oja;
  Scalar eta = Scalar(1e-3);
  bool gha_normalize = false;
};

/// One step of a simultaneous baseline rule. Hebb deflation is sequential and
/// goes through hebb_deflation_solve instead.
template <typename Scalar>
void step(BaselineState<Scalar>& s, const GramOperator<Scalar>& op) {
  switch (s.rule) {
    case UpdateRule::oja: s.v_hat = oja_step(s.v_hat, op, s.eta); return;
    case UpdateRule::gha: s.v_hat = gha_step(s.v_hat, op, s.eta, s.gha_normalize); return;
    case UpdateRule::krasulina: s.v_hat = krasulina_step(s.v_hat, op, s.eta); return;
    default: throw Error(ErrorCode::invalid_argument, std::string("step: not a simultaneous baseline: ") + to_string(s.rule));
  }
}

struct HebbOptions {
  Index window = 50;
  double rel_tol = 1e-4;
  std::int64_t max_steps_per_component = 100'000;
  std::uint64_t seed = 0;
};

template <typename Scalar = double>
struct HebbResult {
  Matrix<Scalar> v_hat;
  std::vector<std::int64_t> steps;
  std::vector<bool> budget_exhausted;
  std::int64_t total_steps = 0;
};

/// X(I - P P^T) for the learned parents P.
template <typename Scalar>
Matrix<Scalar> deflate(const Matrix<Scalar>& x, const Matrix<Scalar>& parents) {
  if (parents.cols() == 0) return x;
  return x - (x * parents) * parents.transpose();
}

/// Hebb's rule with normalization, one component at a time on data deflated
/// by the components already learned. A component is accepted once its
/// Rayleigh quotient moves by less than rel_tol (relative) over `window`
/// steps, or when the per-component budget runs out.
/// `next_batch` yields the operator of the next minibatch.
template <typename Scalar>
HebbResult<Scalar> hebb_deflation_solve(Index d, Index k, Scalar eta,
                                        const std::function<GramOperator<Scalar>()>& next_batch,
                                        const HebbOptions& options = {}) {
  if (k < 1 || k > d) throw Error(ErrorCode::invalid_dimension, "hebb_deflation_solve: need 1 <= k <= d");
  if (options.window < 1) throw Error(ErrorCode::invalid_argument, "hebb_deflation_solve: window must be >= 1");
  HebbResult<Scalar> res;
  res.v_hat = Matrix<Scalar>::Zero(d, k);
  for (Index i = 0; i < k; ++i) {
    const Matrix<Scalar> parents = res.v_hat.leftCols(i);
    Vector<Scalar> v = sample_unit_sphere<Scalar>(d, derive_seed(options.seed, static_cast<std::uint64_t>(i)));
    std::vector<Scalar> history;
    bool done = false;
    std::int64_t t = 0;
    while (t < options.max_steps_per_component) {
      const auto op = next_batch();
      Vector<Scalar> pv = v;
      if (i > 0) pv -= parents * (parents.transpose() * v);
      Vector<Scalar> mv = op.apply(pv);
      if (i > 0) mv -= parents * (parents.transpose() * mv);
      v += eta * mv;
      const Scalar n = v.norm();
      if (!(n > Scalar(0))) throw Error(ErrorCode::degenerate_step, "hebb_deflation_solve: vector collapsed");
      v /= n;
      ++t;
      Vector<Scalar> q = v;
      if (i > 0) q -= parents * (parents.transpose() * v);
      history.push_back((q.transpose() * op.apply(q))(0, 0));
      const auto h = static_cast<Index>(history.size());
      if (h > options.window) {
        const Scalar now = history.back();
        const Scalar then = history[static_cast<std::size_t>(h - 1 - options.window)];
        if (std::abs(now - then) <= Scalar(options.rel_tol) * std::abs(now)) {
          done = true;
          break;
        }
      }
    }
    res.v_hat.col(i) = v;
    res.steps.push_back(t);
    res.budget_exhausted.push_back(!done);
    res.total_steps += t;
  }
  return res;
}

template <typename Scalar>
HebbResult<Scalar> hebb_deflation_solve(const GramOperator<Scalar>& op, Index k, Scalar eta,
                                        const HebbOptions& options = {}) {
  return hebb_deflation_solve<Scalar>(op.dim(), k, eta, [&op] { return op; }, options);
}

inline HebbResult<double> hebb_deflation_solve(const DataSource& data, Index k, double eta,
                                               const HebbOptions& options = {}) {
  auto stream = data.stream(0);
  return hebb_deflation_solve<double>(
      data.cols(), k, eta, [&stream] { return GramOperator<double>::from_data(stream.next()); },
      options);
}

}  // namespace eigengame
