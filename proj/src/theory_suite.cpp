#include "eigengame/theory_suite.hpp"

#include "eigengame/analysis.hpp"
#include "eigengame/game.hpp"
#include "eigengame/gram.hpp"
#include "eigengame/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace eigengame {

const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::assumption_violated: return "assumption_violated";
  }
  return "?";
}

bool TheoryReport::passed() const {
  return std::none_of(checks.begin(), checks.end(),
                      [](const TheoryCheck& c) { return c.status == CheckStatus::fail; });
}

namespace {

constexpr double kPi = std::numbers::pi;

TheoryCheck verdict(std::string name, double measured, double threshold, bool ok) {
  return TheoryCheck{std::move(name), ok ? CheckStatus::pass : CheckStatus::fail, measured, threshold, {}};
}

TheoryCheck violated(std::string name, const std::string& why) {
  return TheoryCheck{std::move(name), CheckStatus::assumption_violated, 0, 0, why};
}

bool distinct_prefix(const VectorXd& lambda, Index n) {
  for (Index j = 0; j + 1 < std::min(n + 1, lambda.size()); ++j)
    if (!(lambda(j) > lambda(j + 1))) return false;
  return true;
}

TheoryCheck nash(const VectorXd& lambda, std::uint64_t seed) {
  const Index d = lambda.size();
  const Index k = std::min<Index>(d, 5);
  if (!distinct_prefix(lambda, k)) return violated("nash", "repeated eigenvalues among the top k");
  NashOptions o;
  o.seed = seed;
  const auto rep = nash_check(MatrixXd::Identity(d, d).leftCols(k), MatrixXd(lambda.asDiagonal()), o);
  const double worst = *std::max_element(rep.max_gain.begin(), rep.max_gain.end());
  return verdict("nash", worst, 0.0, rep.verified);
}

TheoryCheck sinusoid(const VectorXd& lam, std::mt19937_64& rng) {
  const Index d = lam.size();
  std::uniform_real_distribution<double> angle(-kPi / 2, kPi / 2);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index i = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(d));
    std::vector<double> thetas;
    MatrixXd deltas(d, i - 1);
    for (Index j = 0; j + 1 < i; ++j) {
      thetas.push_back(angle(rng));
      deltas.col(j) = random_tangent(d, j, rng);
    }
    const VectorXd di = random_tangent(d, i - 1, rng);
    const auto s = sinusoid_coeffs(i, thetas, deltas, di, lam);
    for (int g = 0; g < 100; ++g) {
      const double th = -kPi / 2 + kPi * g / 99.0;
      worst = std::max(worst, std::abs(s.closed_form(th) - direct_utility(i, th, thetas, deltas, di, lam)));
    }
  }
  return verdict("sinusoid_closed_form", worst, 1e-10, worst < 1e-10);
}

TheoryCheck maximizer(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    double a = u(rng);
    const double b = u(rng);
    if (trial % 3 == 0) a = 0.0;
    else if (trial % 3 == 1) a = -std::abs(a);
    else a = std::abs(a);
    const SinusoidCoeffs s{a, b, 0.0};
    const double grid = std::abs(grid_argmax([&](double t) { return s.closed_form(t); }));
    worst = std::max(worst, std::abs(grid - maximizer_angle(a, b)));
  }
  return verdict("maximizer_law", worst, 2e-4, worst < 2e-4);
}

TheoryCheck error_propagation(const VectorXd& lam, std::mt19937_64& rng) {
  const Index d = lam.size();
  const double c = 1.0 / 16.0;
  if (d < 3) return violated("error_propagation", "needs d >= 3");
  const Index top = std::min<Index>(d - 1, 6);
  if (!distinct_prefix(lam, top)) return violated("error_propagation", "non-positive eigengap");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index i = 2 + static_cast<Index>(rng() % static_cast<std::uint64_t>(top - 1));
    const double eps = parent_threshold(i, lam, c).epsilon;
    std::vector<double> thetas;
    MatrixXd deltas(d, i - 1);
    VectorXd di = VectorXd::Zero(d);
    const bool adversarial = trial % 2 == 0;
    for (Index j = 0; j + 1 < i; ++j) {
      // The worst case rotates every parent toward the child's eigenvector.
      thetas.push_back(std::asin(eps * unit(rng)) * (unit(rng) < 0.5 ? -1.0 : 1.0));
      if (adversarial) deltas.col(j) = VectorXd::Unit(d, i - 1);
      else deltas.col(j) = random_tangent(d, j, rng);
      if (adversarial) di(j) = unit(rng);
    }
    if (adversarial && di.norm() > 0) di.normalize();
    else di = random_tangent(d, i - 1, rng);
    const double th = std::abs(grid_argmax(
        [&](double t) { return direct_utility(i, t, thetas, deltas, di, lam); }));
    worst = std::max(worst, th);
  }
  return verdict("error_propagation", worst, 8.0 * c, worst <= 8.0 * c);
}

TheoryCheck gha_equivalence(const VectorXd& lam, std::mt19937_64& rng) {
  const Index d = lam.size();
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index i = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(d));
    worst = std::max(worst, gha_equivalence_residual(i, sample_unit_sphere<double>(d, rng), lam));
  }
  return verdict("gha_equivalence", worst, 1e-12, worst < 1e-12);
}

TheoryCheck gha_asymmetry(const VectorXd& lam, std::uint64_t seed) {
  const Index d = std::min<Index>(lam.size(), 5);
  const Index i = std::min<Index>(d, 3);
  const auto op = GramOperator<double>::from_matrix(MatrixXd(lam.head(d).asDiagonal()));
  const double a = gha_jacobian_asymmetry(op, random_unit_columns(d, i, seed), i);
  return verdict("gha_not_gradient", a, 1e-6, a > 1e-6);
}

TheoryCheck corollary1(const VectorXd& lam, std::uint64_t seed) {
  const Index d = lam.size();
  const Index k = std::min<Index>(d - 1, 5);
  const auto op = GramOperator<double>::from_matrix(MatrixXd(lam.asDiagonal()));
  SolveOptions<double> o;
  o.seed = seed;
  const auto sol = solve_full_batch(op, k, o);
  const MatrixXd eye = MatrixXd::Identity(d, d);
  const auto errs = angular_errors(sol.state.v_hat, MatrixXd(eye.leftCols(k)));
  const double theta = *std::max_element(errs.begin(), errs.end());
  const double leak = subspace_leakage(sol.state.v_hat, eye);
  const double bound = corollary1_bound(k, d, theta);
  TheoryCheck c = verdict("corollary1", leak, bound, leak <= bound);
  if (!distinct_prefix(lam, k)) c.detail = "repeated eigenvalues: individual vectors are not identifiable";
  return c;
}

TheoryCheck theorem2(const VectorXd& lam) {
  const Index k = std::min<Index>(lam.size() - 1, 3);
  try {
    const auto t = theorem2_constants(lam, k, 1.0);
    bool ok = std::isfinite(t.total) && t.alpha > 0;
    for (std::size_t i = 0; i + 1 < t.c.size(); ++i) ok = ok && t.c[i] < t.c[i + 1];
    return verdict("theorem2_constants", t.total, 0.0, ok);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::assumption_violated) return violated("theorem2_constants", e.what());
    throw;
  }
}

}  // namespace

TheoryReport theory_suite(const VectorXd& lambda, std::uint64_t seed) {
  if (lambda.size() < 2) throw Error(ErrorCode::invalid_dimension, "theory_suite: need d >= 2");
  if (!(lambda(0) > 0.0)) throw Error(ErrorCode::invalid_argument, "theory_suite: lambda_1 must be > 0");
  TheoryReport r;
  r.lambda = lambda;
  r.seed = seed;
  const VectorXd unit = lambda / lambda(0);
  const Index small = std::min<Index>(lambda.size(), 8);
  const VectorXd head = unit.head(small);
  std::mt19937_64 rng(seed);
  r.checks.push_back(nash(lambda, derive_seed(seed, 1)));
  r.checks.push_back(sinusoid(head, rng));
  r.checks.push_back(maximizer(rng));
  r.checks.push_back(error_propagation(unit.head(std::min<Index>(lambda.size(), 6)), rng));
  r.checks.push_back(gha_equivalence(head, rng));
  r.checks.push_back(gha_asymmetry(unit, derive_seed(seed, 2)));
  r.checks.push_back(corollary1(lambda, derive_seed(seed, 3)));
  r.checks.push_back(theorem2(lambda));
  return r;
}

TheoryReport theory_suite(const SpectrumSpec& spec, std::uint64_t seed) {
  return theory_suite(make_spectrum<double>(spec), seed);
}

void write_theory_json(std::ostream& os, const TheoryReport& report) {
  nlohmann::json j;
  j["lambda"] = std::vector<double>(report.lambda.data(), report.lambda.data() + report.lambda.size());
  j["seed"] = report.seed;
  j["passed"] = report.passed();
  j["checks"] = nlohmann::json::array();
  for (const auto& c : report.checks) {
    nlohmann::json e{{"name", c.name}, {"status", to_string(c.status)}, {"measured", c.measured},
                     {"threshold", c.threshold}};
    if (!c.detail.empty()) e["detail"] = c.detail;
    j["checks"].push_back(e);
  }
  os << j.dump(2) << '\n';
}

}  // namespace eigengame
