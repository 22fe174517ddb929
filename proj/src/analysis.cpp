#include "eigengame/analysis.hpp"

#include <algorithm>
#include <iomanip>

namespace eigengame {

namespace {

constexpr double kPi = std::numbers::pi;

GramOperator<double> diag_op(const VectorXd& lambda) {
  return GramOperator<double>::from_matrix(MatrixXd(lambda.asDiagonal()));
}

void check_lambda(const VectorXd& lambda, Index need) {
  if (lambda.size() < need)
    throw Error(ErrorCode::invalid_dimension, "need at least " + std::to_string(need) + " eigenvalues");
}

}  // namespace

NashReport nash_check(const MatrixXd& v_hat, const MatrixXd& m, const NashOptions& options) {
  const Index d = m.rows();
  const Index k = v_hat.cols();
  if (m.cols() != d || v_hat.rows() != d)
    throw Error(ErrorCode::invalid_dimension, "nash_check: shapes differ");
  if (options.probes < 0) throw Error(ErrorCode::invalid_argument, "nash_check: probes must be >= 0");
  const auto op = GramOperator<double>::from_matrix(m);
  const auto truth = dense_eigen(m);

  NashReport rep;
  const Index top = std::min(k + 1, d);
  for (Index j = 0; j + 1 < top; ++j)
    if (truth.lambda(j) - truth.lambda(j + 1) <= 1e-10 * std::abs(truth.lambda(0)))
      rep.repeated_eigenvalues = true;

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  const double angles[] = {1e-3, 1e-2, 0.1};
  rep.verified = true;
  for (Index i = 0; i < k; ++i) {
    const auto parents = v_hat.leftCols(i);
    const VectorXd v = v_hat.col(i);
    const double base = utility(op, v, parents);
    double best_random = -std::numeric_limits<double>::infinity();
    double best_tangent = -std::numeric_limits<double>::infinity();
    for (int p = 0; p < options.probes; ++p) {
      const VectorXd z = sample_unit_sphere<double>(d, rng);
      best_random = std::max(best_random, utility(op, z, parents) - base);
    }
    if (d > 1) {
      for (int t = 0; t < options.tangent_directions; ++t) {
        VectorXd dir(d);
        for (Index r = 0; r < d; ++r) dir(r) = normal(rng);
        dir -= dir.dot(v) * v;
        if (!(dir.norm() > 0)) continue;
        dir.normalize();
        for (double a : angles)
          for (double s : {1.0, -1.0}) {
            const VectorXd z = std::cos(a) * v + std::sin(s * a) * dir;
            best_tangent = std::max(best_tangent, utility(op, z, parents) - base);
          }
      }
    }
    rep.max_random_gain.push_back(best_random);
    rep.max_tangent_gain.push_back(best_tangent);
    rep.max_gain.push_back(std::max(best_random, best_tangent));
    if (!(best_random < -options.margin) && options.probes > 0) rep.verified = false;
    if (!(best_tangent < 0.0) && std::isfinite(best_tangent)) rep.verified = false;
  }
  return rep;
}

void check_tangent(const VectorXd& delta, Index j) {
  if (std::abs(delta.norm() - 1.0) > 1e-12)
    throw Error(ErrorCode::invalid_tangent, "deviation direction " + std::to_string(j + 1) + " is not unit");
  if (std::abs(delta(j)) > 1e-12)
    throw Error(ErrorCode::invalid_tangent,
                "deviation direction " + std::to_string(j + 1) + " is not orthogonal to its eigenvector");
}

VectorXd deviate(Index j, double theta, const VectorXd& delta) {
  VectorXd v = std::sin(theta) * delta;
  v(j) += std::cos(theta);
  return v;
}

SinusoidCoeffs sinusoid_coeffs(Index i, const std::vector<double>& parent_thetas,
                               const MatrixXd& parent_deltas, const VectorXd& delta_i,
                               const VectorXd& lambda) {
  const Index d = lambda.size();
  if (i < 1 || i > d) throw Error(ErrorCode::range, "sinusoid_coeffs: player out of range");
  const Index p = i - 1;
  if (static_cast<Index>(parent_thetas.size()) != p || (p > 0 && parent_deltas.cols() < p) ||
      (p > 0 && parent_deltas.rows() != d) || delta_i.size() != d)
    throw Error(ErrorCode::invalid_dimension, "sinusoid_coeffs: inconsistent shapes");
  const Index ci = i - 1;
  check_tangent(delta_i, ci);
  const double lii = lambda(ci);
  const VectorXd l_di = lambda.cwiseProduct(delta_i);

  SinusoidCoeffs s;
  s.a = delta_i.dot(l_di) - lii;
  s.b = 0;
  s.c = lii;
  for (Index j = 0; j < p; ++j) {
    const VectorXd dj = parent_deltas.col(j);
    check_tangent(dj, j);
    const double th = parent_thetas[static_cast<std::size_t>(j)];
    const double cs = std::cos(th);
    const double sn = std::sin(th);
    const double s2 = std::sin(2.0 * th);
    const double ljj = lambda(j);
    const double den = ljj * cs * cs + dj.dot(lambda.cwiseProduct(dj)) * sn * sn;
    const double di_vj = delta_i(j);
    const double dj_vi = dj(ci);
    const double di_l_dj = l_di.dot(dj);
    s.a -= (ljj * ljj * cs * cs * di_vj * di_vj - lii * lii * sn * sn * dj_vi * dj_vi +
            sn * sn * di_l_dj * di_l_dj) / den;
    s.a -= ljj * s2 * di_vj * di_l_dj / den;
    s.b += (lii * ljj * s2 * dj_vi * di_vj + 2.0 * lii * sn * sn * dj_vi * di_l_dj) / den;
    s.c -= lii * lii * sn * sn * dj_vi * dj_vi / den;
  }
  return s;
}

double direct_utility(Index i, double theta_i, const std::vector<double>& parent_thetas,
                      const MatrixXd& parent_deltas, const VectorXd& delta_i,
                      const VectorXd& lambda) {
  const Index d = lambda.size();
  const Index p = i - 1;
  MatrixXd parents(d, p);
  for (Index j = 0; j < p; ++j)
    parents.col(j) = deviate(j, parent_thetas[static_cast<std::size_t>(j)], parent_deltas.col(j));
  return utility(diag_op(lambda), deviate(i - 1, theta_i, delta_i), parents);
}

double maximizer_angle(double a, double b) {
  if (a == 0.0 && b == 0.0)
    throw Error(ErrorCode::degenerate_landscape, "maximizer_angle: A = B = 0, every angle is optimal");
  if (a == 0.0) return kPi / 4;
  const double r = std::atan(std::abs(b / a));
  return a < 0.0 ? 0.5 * r : 0.5 * (kPi - r);
}

double grid_argmax(const std::function<double(double)>& f, double resolution, double lo, double hi) {
  if (!(resolution > 0.0) || !(hi >= lo))
    throw Error(ErrorCode::invalid_argument, "grid_argmax: bad grid");
  const auto n = static_cast<std::int64_t>(std::floor((hi - lo) / resolution));
  double best_x = lo;
  double best = f(lo);
  for (std::int64_t t = 1; t <= n; ++t) {
    const double x = lo + static_cast<double>(t) * resolution;
    const double y = f(x);
    if (y > best) {
      best = y;
      best_x = x;
    }
  }
  return best_x;
}

double example_curve(double epsilon, double kappa) {
  if (epsilon >= 1.0) throw Error(ErrorCode::boundary, "example_curve: epsilon must be < 1");
  if (epsilon < 0.0) throw Error(ErrorCode::range, "example_curve: epsilon must be >= 0");
  if (!(kappa >= 1.0)) throw Error(ErrorCode::range, "example_curve: kappa must be >= 1");
  const double e2 = epsilon * epsilon;
  const double a = -1.0 + e2 * (kappa + 1.0 / kappa);
  const double b = 2.0 * epsilon * std::sqrt(1.0 - e2);
  return maximizer_angle(a, b);
}

void write_example_sweep(std::ostream& os, double kappa, int points, double max_deg) {
  if (points < 2) throw Error(ErrorCode::invalid_argument, "write_example_sweep: need >= 2 points");
  const double rad = kPi / 180.0;
  os << "epsilon_deg,theta_star_deg\n";
  os << std::setprecision(10);
  for (int n = 0; n < points; ++n) {
    const double deg = max_deg * n / (points - 1);
    const double eps = std::sin(deg * rad);
    if (eps >= 1.0) continue;
    os << deg << ',' << example_curve(eps, kappa) / rad << '\n';
  }
}

ParentThreshold parent_threshold(Index i, const VectorXd& lambda, double c) {
  if (c < 0.0 || c > 1.0 / 16.0) throw Error(ErrorCode::range, "parent_threshold: need 0 <= c <= 1/16");
  if (i < 1 || i >= lambda.size()) throw Error(ErrorCode::range, "parent_threshold: player out of range");
  ParentThreshold t;
  t.child_bound = 8.0 * c;
  if (i == 1) {
    t.epsilon = std::numeric_limits<double>::infinity();
    return t;
  }
  const double gap = lambda(i - 1) - lambda(i);
  if (!(gap > 0.0)) throw Error(ErrorCode::assumption_violated, "parent_threshold: gap g_i must be > 0");
  t.epsilon = c * gap / (static_cast<double>(i - 1) * lambda(0));
  return t;
}

double gha_equivalence_residual(const GramOperator<double>& op, const VectorXd& v, const MatrixXd& parents) {
  const VectorXd mv = op.apply(v);
  const double q = v.dot(mv);
  VectorXd gha = mv - q * v;
  VectorXd game = mv - q * v;
  if (parents.cols() > 0) {
    const MatrixXd mp = op.apply(parents);
    gha -= parents * (mp.transpose() * v);
    game -= op.apply(VectorXd(parents * (parents.transpose() * v)));
  }
  return 2.0 * (gha - game).norm();
}

double gha_equivalence_residual(Index i, const VectorXd& v, const VectorXd& lambda) {
  const Index d = lambda.size();
  if (i < 1 || i > d) throw Error(ErrorCode::range, "gha_equivalence_residual: player out of range");
  const MatrixXd parents = MatrixXd::Identity(d, d).leftCols(i - 1);
  return gha_equivalence_residual(diag_op(lambda), v, parents);
}

double gha_jacobian_asymmetry(const GramOperator<double>& op, const MatrixXd& v_hat, Index i, double step) {
  const Index d = v_hat.rows();
  if (i < 1 || i > v_hat.cols()) throw Error(ErrorCode::range, "gha_jacobian_asymmetry: player out of range");
  const MatrixXd parents = v_hat.leftCols(i - 1);
  const MatrixXd mp = op.apply(parents);
  auto field = [&](const VectorXd& v) {
    const VectorXd mv = op.apply(v);
    VectorXd f = mv - v.dot(mv) * v;
    if (parents.cols() > 0) f -= parents * (mp.transpose() * v);
    return VectorXd(2.0 * f);
  };
  const VectorXd v = v_hat.col(i - 1);
  MatrixXd jac(d, d);
  for (Index c = 0; c < d; ++c) {
    VectorXd hi = v, lo = v;
    hi(c) += step;
    lo(c) -= step;
    jac.col(c) = (field(hi) - field(lo)) / (2.0 * step);
  }
  return (jac - jac.transpose()).norm();
}

double lipschitz_bound(const VectorXd& lambda, Index k) {
  check_lambda(lambda, k + 1);
  const double l11 = lambda(0);
  // kappa_{k-1} with 1-based indices; k = 1 has no such term and uses kappa_1 = 1.
  const double kappa = k >= 2 ? l11 / lambda(k - 2) : 1.0;
  const double gk = lambda(k - 1) - lambda(k);
  return 4.0 * (l11 * static_cast<double>(k) + (1.0 + kappa) * gk / 16.0);
}

Theorem2Constants theorem2_constants(const VectorXd& lambda, Index k, double theta_tol) {
  if (k < 1) throw Error(ErrorCode::invalid_dimension, "theorem2_constants: k must be >= 1");
  check_lambda(lambda, k + 1);
  if (!(theta_tol > 0.0) || theta_tol > 1.0)
    throw Error(ErrorCode::range, "theorem2_constants: need 0 < theta_tol <= 1");
  std::vector<double> g(static_cast<std::size_t>(k + 1));
  for (Index i = 1; i <= k; ++i) {
    g[static_cast<std::size_t>(i)] = lambda(i - 1) - lambda(i);
    if (!(g[static_cast<std::size_t>(i)] > 0.0))
      throw Error(ErrorCode::assumption_violated,
                  "theorem2_constants: gap g_" + std::to_string(i) + " is not positive");
  }
  const double l11 = lambda(0);
  const auto uk = static_cast<std::size_t>(k);
  Theorem2Constants out;
  out.c.assign(uk, 0.0);
  out.rho.assign(uk, 0.0);
  out.t.assign(uk, 0.0);
  const double ck = theta_tol / 16.0;
  out.c[uk - 1] = ck;
  for (Index i = 1; i < k; ++i) {
    // (i-1)! prod_{j=i+1..k} g_j / ((16 L11)^{k-i} (k-1)!) as a running product.
    double ratio = 1.0;
    for (Index j = i + 1; j <= k; ++j) ratio *= g[static_cast<std::size_t>(j)] / (16.0 * l11);
    for (Index n = i; n <= k - 1; ++n) ratio /= static_cast<double>(n);
    out.c[static_cast<std::size_t>(i - 1)] = ratio * ck;
  }
  for (Index i = 1; i < k; ++i) {
    const double gi = g[static_cast<std::size_t>(i)];
    const double gn = g[static_cast<std::size_t>(i + 1)];
    const double cn = out.c[static_cast<std::size_t>(i)];
    out.rho[static_cast<std::size_t>(i - 1)] = gi * gn / (2.0 * kPi * static_cast<double>(i) * l11) * cn;
    const double q = kPi * static_cast<double>(i) * l11 / (gi * gn);
    out.t[static_cast<std::size_t>(i - 1)] = std::ceil(5.0 * q * q / (cn * cn));
  }
  const double gk = g[uk];
  out.rho[uk - 1] = gk * theta_tol / (2.0 * kPi);
  out.t[uk - 1] = std::ceil(5.0 * kPi * kPi / ((theta_tol * gk) * (theta_tol * gk)));
  out.lipschitz = lipschitz_bound(lambda, k);
  out.alpha = 1.0 / (2.0 * out.lipschitz);
  for (double t : out.t) out.total += t;
  return out;
}

double init_probability(Index d, double phi) {
  if (d < 2) throw Error(ErrorCode::invalid_dimension, "init_probability: d must be >= 2");
  const double x = std::sin(phi) * std::sin(phi);
  if (x >= 1.0) return 1.0;
  const double a = 0.5 * static_cast<double>(d - 1);
  const double b = 0.5;
  // Substituting t = u^2 removes the t^{a-1} singularity at 0 for a = 1/2.
  auto f = [a, b](double u) { return 2.0 * std::pow(u, 2.0 * a - 1.0) * std::pow(1.0 - u * u, b - 1.0); };
  const double upper = std::sqrt(x);
  const int n = 4000;
  const double h = upper / n;
  double sum = f(0.0) + f(upper);
  for (int s = 1; s < n; ++s) sum += f(s * h) * (s % 2 ? 4.0 : 2.0);
  const double integral = sum * h / 3.0;
  const double beta = std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
  return integral / beta;
}

VectorXd random_tangent(Index d, Index j, std::mt19937_64& rng) {
  if (d < 2) throw Error(ErrorCode::invalid_dimension, "random_tangent: d must be >= 2");
  std::normal_distribution<double> normal;
  VectorXd v(d);
  do {
    for (Index r = 0; r < d; ++r) v(r) = normal(rng);
    v(j) = 0.0;
  } while (!(v.norm() > 1e-8));
  return v.normalized();
}

}  // namespace eigengame
