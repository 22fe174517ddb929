#pragma once

#include "eigengame/common.hpp"
#include "eigengame/gram.hpp"
#include "eigengame/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace eigengame {

/// 1-based player index. Player i has parents 1..i-1.
class PlayerIndex {
 public:
  explicit PlayerIndex(Index i) : i_(i) {
    if (i < 1) throw Error(ErrorCode::range, "PlayerIndex: players are numbered from 1");
  }
  Index value() const { return i_; }
  Index column() const { return i_ - 1; }
  Index parent_count() const { return i_ - 1; }

 private:
  Index i_;
};

enum class Variant { plain, riemannian };

inline const char* to_string(Variant v) { return v == Variant::plain ? "plain" : "riemannian"; }

template <typename Scalar = double>
struct EigenState {
  Matrix<Scalar> v_hat;
  std::int64_t iter = 0;
  Scalar alpha = Scalar(1e-3);
  Variant variant = Variant::riemannian;

  Index dim() const { return v_hat.rows(); }
  Index k() const { return v_hat.cols(); }
};

template <typename Scalar>
void validate(const EigenState<Scalar>& s) {
  if (s.k() < 1 || s.k() > s.dim())
    throw Error(ErrorCode::invalid_dimension, "EigenState: need 1 <= k <= d");
  if (!(s.alpha > Scalar(0))) throw Error(ErrorCode::invalid_argument, "EigenState: alpha must be > 0");
}

namespace detail {

/// Inner products of v against itself and each parent, plus the penalty
/// coefficients <Xv, Xp_j> / <Xp_j, Xp_j>.
template <typename Scalar>
struct PlayerTerms {
  Scalar reward = 0;
  Vector<Scalar> cross;
  Vector<Scalar> parent_norms;
  Vector<Scalar> coef;
};

template <typename Scalar, typename DV, typename DP>
PlayerTerms<Scalar> player_terms(const GramOperator<Scalar>& op, const Eigen::MatrixBase<DV>& v,
                                 const Eigen::MatrixBase<DP>& parents) {
  const Index p = parents.cols();
  if (p > 0 && parents.rows() != v.rows())
    throw Error(ErrorCode::invalid_dimension, "parents and v_hat differ in dimension");
  Matrix<Scalar> stacked(v.rows(), p + 1);
  stacked.col(0) = v;
  if (p > 0) stacked.rightCols(p) = parents;
  const Matrix<Scalar> r = op.gram(stacked);
  PlayerTerms<Scalar> t;
  t.reward = r(0, 0);
  t.cross = r.row(0).tail(p).transpose();
  t.parent_norms = r.diagonal().tail(p);
  const Scalar guard = op.denominator_guard();
  for (Index j = 0; j < p; ++j)
    if (!(t.parent_norms(j) >= guard))
      throw Error(ErrorCode::degenerate_parent,
                  "parent " + std::to_string(j + 1) + " has <Xv,Xv> below the guard");
  t.coef = t.cross.cwiseQuotient(t.parent_norms);
  return t;
}

}  // namespace detail

/// u_i = <Xv, Xv> - sum_j <Xv, Xp_j>^2 / <Xp_j, Xp_j>.
template <typename Scalar, typename DV, typename DP>
Scalar utility(const GramOperator<Scalar>& op, const Eigen::MatrixBase<DV>& v,
               const Eigen::MatrixBase<DP>& parents) {
  const auto t = detail::player_terms(op, v, parents);
  return t.reward - t.cross.cwiseProduct(t.coef).sum();
}

template <typename Scalar>
Scalar utility(const GramOperator<Scalar>& op, const Matrix<Scalar>& v_hat, PlayerIndex i) {
  return utility(op, v_hat.col(i.column()), v_hat.leftCols(i.parent_count()));
}

/// Ambient gradient 2 M [v - sum_j coef_j p_j].
template <typename Scalar, typename DV, typename DP>
Vector<Scalar> grad(const GramOperator<Scalar>& op, const Eigen::MatrixBase<DV>& v,
                    const Eigen::MatrixBase<DP>& parents) {
  const auto t = detail::player_terms(op, v, parents);
  Vector<Scalar> w = v;
  if (parents.cols() > 0) w.noalias() -= parents * t.coef;
  return Scalar(2) * op.apply(w);
}

template <typename Scalar>
Vector<Scalar> grad(const GramOperator<Scalar>& op, const Matrix<Scalar>& v_hat, PlayerIndex i) {
  return grad(op, v_hat.col(i.column()), v_hat.leftCols(i.parent_count()));
}

template <typename DG, typename DV>
auto riemannian_project(const Eigen::MatrixBase<DG>& g, const Eigen::MatrixBase<DV>& v) {
  using Scalar = typename DG::Scalar;
  Vector<Scalar> out = g - g.dot(v) * v;
  return out;
}

/// normalize(v + alpha * direction).
template <typename DV, typename DD>
auto retract(const Eigen::MatrixBase<DV>& v, const Eigen::MatrixBase<DD>& direction,
             typename DV::Scalar alpha) {
  using Scalar = typename DV::Scalar;
  if (!(alpha > Scalar(0))) throw Error(ErrorCode::invalid_argument, "retract: alpha must be > 0");
  Vector<Scalar> w = v + alpha * direction;
  const Scalar n = w.norm();
  if (!(n >= Scalar(1e-300))) throw Error(ErrorCode::degenerate_step, "retract: step collapsed to zero");
  w /= n;
  return w;
}

/// LT(2 I_k - 1_k): 1 on the diagonal, -1 strictly below.
template <typename Scalar = double>
Matrix<Scalar> lt_mask(Index k) {
  Matrix<Scalar> m = Matrix<Scalar>::Zero(k, k);
  for (Index i = 0; i < k; ++i) {
    m(i, i) = 1;
    for (Index j = 0; j < i; ++j) m(i, j) = -1;
  }
  return m;
}

/// One update of column i against the parents in the same state.
template <typename Scalar>
Vector<Scalar> streaming_step(const EigenState<Scalar>& state, PlayerIndex i,
                              const GramOperator<Scalar>& op) {
  if (i.value() > state.k()) throw Error(ErrorCode::range, "streaming_step: player beyond k");
  const auto v = state.v_hat.col(i.column());
  Vector<Scalar> g = grad(op, v, state.v_hat.leftCols(i.parent_count()));
  if (state.variant == Variant::riemannian) g = riemannian_project(g, v);
  return retract(v, g, state.alpha);
}

/// All k columns at once from the same snapshot.
template <typename Scalar>
Matrix<Scalar> vectorized_step(const EigenState<Scalar>& state, const GramOperator<Scalar>& op) {
  const Matrix<Scalar>& v = state.v_hat;
  const Index k = v.cols();
  const Matrix<Scalar> r = op.gram(v);
  const Scalar guard = op.denominator_guard();
  for (Index j = 0; j + 1 < k; ++j)
    if (!(r(j, j) >= guard))
      throw Error(ErrorCode::degenerate_parent,
                  "parent " + std::to_string(j + 1) + " has <Xv,Xv> below the guard");
  Matrix<Scalar> r_norm = r;
  for (Index j = 0; j < k; ++j) r_norm.col(j) /= r(j, j) > Scalar(0) ? r(j, j) : Scalar(1);
  const Matrix<Scalar> weights = r_norm.cwiseProduct(lt_mask<Scalar>(k));
  const Matrix<Scalar> gs = v * weights.transpose();
  Matrix<Scalar> g = Scalar(2) * op.apply(gs);
  if (state.variant == Variant::riemannian) {
    const Vector<Scalar> along = g.cwiseProduct(v).colwise().sum().transpose();
    g -= v * along.asDiagonal();
  }
  Matrix<Scalar> out = v + state.alpha * g;
  for (Index j = 0; j < k; ++j) {
    const Scalar n = out.col(j).norm();
    if (!(n >= Scalar(1e-300)))
      throw Error(ErrorCode::degenerate_step, "vectorized_step: column " + std::to_string(j + 1) +
                                                  " collapsed to zero");
    out.col(j) /= n;
  }
  return out;
}

template <typename Scalar>
void advance(EigenState<Scalar>& state, const GramOperator<Scalar>& op) {
  state.v_hat = vectorized_step(state, op);
  ++state.iter;
}

/// ceil((5/4) * min(grad_norm / 2, rho)^-2), as a real so that overflow is
/// visible to the caller.
inline double iterations_for(double grad_norm, double rho) {
  const double m = std::min(grad_norm / 2.0, rho);
  if (!(m > 0.0)) return std::numeric_limits<double>::infinity();
  return std::ceil(1.25 / (m * m));
}

template <typename Scalar = double>
struct SequentialOptions {
  std::int64_t max_iters = 10'000'000;
  std::optional<Matrix<Scalar>> initial;
  Variant variant = Variant::riemannian;
};

template <typename Scalar = double>
struct SequentialResult {
  EigenState<Scalar> state;
  std::vector<double> computed_iters;
  std::vector<std::int64_t> run_iters;
  std::vector<bool> capped;

  bool any_capped() const {
    for (bool c : capped)
      if (c) return true;
    return false;
  }
};

/// Learns v_1..v_k strictly in sequence with parents frozen, running player
/// i for t_i = iterations_for(||Riemannian grad u_i at v_i^0||, rho_i) steps.
template <typename Scalar>
SequentialResult<Scalar> sequential_solve(const GramOperator<Scalar>& op, Index k,
                                          const std::vector<Scalar>& rho, Scalar alpha,
                                          std::uint64_t seed,
                                          const SequentialOptions<Scalar>& options = {}) {
  const Index d = op.dim();
  if (k < 1 || k > d) throw Error(ErrorCode::invalid_dimension, "sequential_solve: need 1 <= k <= d");
  if (static_cast<Index>(rho.size()) != k)
    throw Error(ErrorCode::invalid_argument, "sequential_solve: need one rho per player");
  for (Scalar r : rho)
    if (!(r > Scalar(0))) throw Error(ErrorCode::invalid_argument, "sequential_solve: rho must be > 0");
  if (!(alpha > Scalar(0))) throw Error(ErrorCode::invalid_argument, "sequential_solve: alpha must be > 0");
  if (options.max_iters < 1) throw Error(ErrorCode::invalid_argument, "sequential_solve: max_iters must be >= 1");

  SequentialResult<Scalar> res;
  res.state.alpha = alpha;
  res.state.variant = options.variant;
  if (options.initial) {
    if (options.initial->rows() != d || options.initial->cols() != k)
      throw Error(ErrorCode::invalid_dimension, "sequential_solve: initial must be d x k");
    res.state.v_hat = options.initial->colwise().normalized();
  } else {
    res.state.v_hat = random_unit_columns<Scalar>(d, k, seed);
  }

  Matrix<Scalar>& v_hat = res.state.v_hat;
  for (Index i = 0; i < k; ++i) {
    const auto parents = v_hat.leftCols(i);
    Vector<Scalar> v = v_hat.col(i);
    const double g0 = static_cast<double>(riemannian_project(grad(op, v, parents), v).norm());
    const double t = iterations_for(g0, static_cast<double>(rho[static_cast<std::size_t>(i)]));
    const bool cap = !(t <= static_cast<double>(options.max_iters));
    const std::int64_t steps = cap ? options.max_iters : static_cast<std::int64_t>(t);
    for (std::int64_t s = 0; s < steps; ++s) {
      Vector<Scalar> g = grad(op, v, parents);
      if (options.variant == Variant::riemannian) g = riemannian_project(g, v);
      v = retract(v, g, alpha);
    }
    v_hat.col(i) = v;
    res.computed_iters.push_back(t);
    res.run_iters.push_back(steps);
    res.capped.push_back(cap);
    res.state.iter += steps;
  }
  return res;
}

template <typename Scalar>
SequentialResult<Scalar> sequential_solve(const GramOperator<Scalar>& op, Index k, Scalar rho,
                                          Scalar alpha, std::uint64_t seed,
                                          const SequentialOptions<Scalar>& options = {}) {
  return sequential_solve(op, k, std::vector<Scalar>(static_cast<std::size_t>(k), rho), alpha, seed,
                          options);
}

template <typename Scalar = double>
struct SolveOptions {
  /// Step size; when unset, 1 / (2 * lambda_max) with lambda_max estimated by
  /// power iteration.
  std::optional<Scalar> alpha;
  Variant variant = Variant::riemannian;
  std::int64_t max_iters = 200'000;
  /// Stop once every Riemannian gradient norm is below grad_tol * lambda_max.
  Scalar grad_tol = Scalar(1e-10);
  std::uint64_t seed = 0;
  std::optional<Matrix<Scalar>> initial;
};

template <typename Scalar = double>
struct SolveResult {
  EigenState<Scalar> state;
  bool converged = false;
  Scalar max_grad_norm = 0;
};

template <typename Scalar>
Scalar power_estimate(const GramOperator<Scalar>& op, std::uint64_t seed, int iters = 100) {
  Vector<Scalar> v = sample_unit_sphere<Scalar>(op.dim(), seed);
  Scalar lambda = 0;
  for (int t = 0; t < iters; ++t) {
    Vector<Scalar> w = op.apply(v);
    const Scalar n = w.norm();
    if (!(n > Scalar(0))) return Scalar(0);
    lambda = v.dot(w);
    v = w / n;
  }
  return std::max(lambda, op.apply(v).norm());
}

template <typename Scalar>
Scalar max_riemannian_grad(const EigenState<Scalar>& state, const GramOperator<Scalar>& op) {
  Scalar worst = 0;
  for (Index i = 1; i <= state.k(); ++i) {
    const PlayerIndex p(i);
    const auto v = state.v_hat.col(p.column());
    worst = std::max(worst, riemannian_project(grad(op, state.v_hat, p), v).norm());
  }
  return worst;
}

/// Full-batch simultaneous ascent (the vectorized update) until the gradient
/// tolerance or the iteration budget is reached.
template <typename Scalar>
SolveResult<Scalar> solve_full_batch(const GramOperator<Scalar>& op, Index k,
                                     const SolveOptions<Scalar>& options = {}) {
  const Index d = op.dim();
  if (k < 1 || k > d) throw Error(ErrorCode::invalid_dimension, "solve_full_batch: need 1 <= k <= d");
  const Scalar lmax = power_estimate(op, derive_seed(options.seed, 0x5eed));
  SolveResult<Scalar> res;
  res.state.variant = options.variant;
  res.state.alpha = options.alpha ? *options.alpha : Scalar(0.5) / std::max(lmax, Scalar(1e-300));
  res.state.v_hat = options.initial ? Matrix<Scalar>(options.initial->colwise().normalized())
                                    : random_unit_columns<Scalar>(d, k, options.seed);
  validate(res.state);
  const Scalar tol = options.grad_tol * std::max(lmax, Scalar(1e-300));
  const std::int64_t check_every = 50;
  for (std::int64_t t = 0; t < options.max_iters; ++t) {
    if (t % check_every == 0) {
      res.max_grad_norm = max_riemannian_grad(res.state, op);
      if (res.max_grad_norm <= tol) {
        res.converged = true;
        return res;
      }
    }
    advance(res.state, op);
  }
  res.max_grad_norm = max_riemannian_grad(res.state, op);
  res.converged = res.max_grad_norm <= tol;
  return res;
}

template <typename Scalar = double>
struct Eigenpairs {
  Vector<Scalar> values;
  Matrix<Scalar> vectors;
};

/// Bottom-k eigenpairs: estimate Lambda_11 with a one-player game, then solve
/// the top-k game on M' = Lambda_11 I - M.
template <typename Scalar>
Eigenpairs<Scalar> smallest_components(const Matrix<Scalar>& m, Index k,
                                       const SolveOptions<Scalar>& options = {}) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::invalid_dimension, "smallest_components: M must be square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-9) * std::max(Scalar(1), m.cwiseAbs().maxCoeff()))
    throw Error(ErrorCode::invalid_argument, "smallest_components: M must be symmetric");
  const auto op = GramOperator<Scalar>::from_matrix(m);
  SolveOptions<Scalar> top = options;
  top.initial.reset();
  const auto first = solve_full_batch(op, 1, top);
  const Scalar lambda11 = op.gram(first.state.v_hat)(0, 0);

  const Index d = m.rows();
  const Matrix<Scalar> shifted = lambda11 * Matrix<Scalar>::Identity(d, d) - m;
  const auto sop = GramOperator<Scalar>::from_matrix(shifted);
  SolveOptions<Scalar> bottom = options;
  bottom.seed = derive_seed(options.seed, 1);
  const auto sol = solve_full_batch(sop, k, bottom);

  Eigenpairs<Scalar> out;
  out.vectors = sol.state.v_hat;
  out.values = Vector<Scalar>::Constant(k, lambda11) - sop.gram(out.vectors).diagonal();
  return out;
}

}  // namespace eigengame
