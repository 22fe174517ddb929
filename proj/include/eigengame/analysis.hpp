#pragma once

#include "eigengame/common.hpp"
#include "eigengame/game.hpp"
#include "eigengame/gram.hpp"
#include "eigengame/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <vector>

namespace eigengame {

// Everything here works in the eigenbasis: M = diag(Lambda), v_j = e_j.

struct NashReport {
  /// Largest u_i(z) - u_i(v_hat_i) over all probes, per player.
  std::vector<double> max_gain;
  /// Same, restricted to the random (non-infinitesimal) probes.
  std::vector<double> max_random_gain;
  std::vector<double> max_tangent_gain;
  bool repeated_eigenvalues = false;
  bool verified = false;
};

struct NashOptions {
  int probes = 1000;
  double margin = 0.0;
  int tangent_directions = 8;
  std::uint64_t seed = 0;
};

/// Samples unilateral deviations for each player and reports the best gain.
/// Tangent probes rotate v_hat_i by 1e-3, 1e-2 and 0.1 rad.
NashReport nash_check(const MatrixXd& v_hat, const MatrixXd& m, const NashOptions& options = {});

struct SinusoidCoeffs {
  double a = 0;
  double b = 0;
  double c = 0;

  /// Quadrant-correct phase of the closed form
  /// (1/2)[sqrt(A^2+B^2) cos(2 theta + phi) + A + 2C].
  double phi() const { return std::atan2(b, -a); }
  double value(double theta) const {
    const double s = std::sin(theta);
    return a * s * s - b * std::sin(2.0 * theta) / 2.0 + c;
  }
  double closed_form(double theta) const {
    return 0.5 * (std::hypot(a, b) * std::cos(2.0 * theta + phi()) + a + 2.0 * c);
  }
};

/// Unit tangent direction check: ||delta|| = 1 and <delta, e_j> = 0.
void check_tangent(const VectorXd& delta, Index j);

/// v_hat_j = cos(theta_j) e_j + sin(theta_j) delta_j, j is 0-based.
VectorXd deviate(Index j, double theta, const VectorXd& delta);

/// A, B, C of the utility of player i (1-based) along theta_i, given parent
/// angles theta_j and tangent directions delta_j (columns), with
/// delta_i the child's deviation direction.
SinusoidCoeffs sinusoid_coeffs(Index i, const std::vector<double>& parent_thetas,
                               const MatrixXd& parent_deltas, const VectorXd& delta_i,
                               const VectorXd& lambda);

/// u_i evaluated directly from the utility definition at the deviated vectors.
double direct_utility(Index i, double theta_i, const std::vector<double>& parent_thetas,
                      const MatrixXd& parent_deltas, const VectorXd& delta_i,
                      const VectorXd& lambda);

/// |theta*| maximizing A sin^2 - B sin(2 theta)/2 + C.
double maximizer_angle(double a, double b);

/// argmax of f over [lo, hi] on a uniform grid of the given resolution.
double grid_argmax(const std::function<double(double)>& f, double resolution = 1e-4,
                   double lo = -std::numbers::pi / 2, double hi = std::numbers::pi / 2);

/// Child maximizer when every parent has sin(theta_j) = epsilon in the
/// worst-case direction; kappa = Lambda_11 / Lambda_ii.
double example_curve(double epsilon, double kappa);

/// Rows (parent error in degrees, |theta*| in degrees) for parent angles
/// 0 .. max_deg, as the CSV `epsilon_deg,theta_star_deg`.
void write_example_sweep(std::ostream& os, double kappa, int points = 901, double max_deg = 90.0);

struct ParentThreshold {
  double epsilon = 0;
  double child_bound = 0;
};

/// epsilon_i = c g_i / ((i-1) Lambda_11) and the child bound 8c.
ParentThreshold parent_threshold(Index i, const VectorXd& lambda, double c);

/// ||GHA_i - 2[(I - v v^T) M v - M sum_j (v^T p_j) p_j]|| for arbitrary parents.
double gha_equivalence_residual(const GramOperator<double>& op, const VectorXd& v,
                                const MatrixXd& parents);

/// Same with M = diag(Lambda) and exact parents e_1..e_{i-1}.
double gha_equivalence_residual(Index i, const VectorXd& v, const VectorXd& lambda);

/// ||J - J^T||_F for the finite-difference Jacobian of player i's GHA field
/// with respect to its own vector (parents = first i-1 columns of v_hat).
double gha_jacobian_asymmetry(const GramOperator<double>& op, const MatrixXd& v_hat, Index i,
                              double step = 1e-6);

struct Theorem2Constants {
  std::vector<double> c;
  std::vector<double> rho;
  double lipschitz = 0;
  double alpha = 0;
  std::vector<double> t;
  double total = 0;
};

double lipschitz_bound(const VectorXd& lambda, Index k);

/// Parameter chain for the sequential solver's convergence guarantee.
/// Needs Lambda of length >= k+1 (g_k uses Lambda_{k+1}) and every gap
/// g_1..g_k > 0.
Theorem2Constants theorem2_constants(const VectorXd& lambda, Index k, double theta_tol);

/// I_{sin^2 phi}((d-1)/2, 1/2): probability that a uniform initial vector
/// lies within phi of +-v.
double init_probability(Index d, double phi = std::numbers::pi / 4);

/// k (d - k) theta^2.
inline double corollary1_bound(Index k, Index d, double theta) {
  return static_cast<double>(k) * static_cast<double>(d - k) * theta * theta;
}

/// Random unit vector orthogonal to e_j.
VectorXd random_tangent(Index d, Index j, std::mt19937_64& rng);

}  // namespace eigengame
