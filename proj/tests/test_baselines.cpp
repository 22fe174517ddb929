#include "eigengame/analysis.hpp"
#include "eigengame/baselines.hpp"
#include "eigengame/metrics.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace eigengame;

namespace {

GramOperator<double> diag321() {
  return GramOperator<double>::from_matrix(MatrixXd(VectorXd::LinSpaced(3, 3, 1).asDiagonal()));
}

}  // namespace

TEST(Rules, NamesRoundTrip) {
  for (auto r : {UpdateRule::eigengame, UpdateRule::eigengame_r, UpdateRule::oja, UpdateRule::gha,
                 UpdateRule::hebb_deflation, UpdateRule::krasulina})
    EXPECT_EQ(parse_rule(to_string(r)), r);
  EXPECT_STREQ(to_string(UpdateRule::eigengame_r), "eigengame-r");
  EXPECT_THROW(parse_rule("sanger"), Error);
}

TEST(Oja, SignFix) {
  EXPECT_EQ(qr_sign_fix(Eigen::Vector3d(2, -3, 0)), Eigen::Vector3d(1, -1, 1));
}

TEST(Oja, ZeroStepAndIdempotence) {
  const auto op = diag321();
  const MatrixXd v0 = random_unit_columns(5, 3, 2);
  const auto op5 = GramOperator<double>::from_matrix(MatrixXd::Identity(5, 5));
  const MatrixXd once = oja_step(v0, op5, 0.0);
  const MatrixXd twice = oja_step(once, op5, 0.0);
  EXPECT_LT((once - twice).norm(), 1e-14);
  const MatrixXd eye = MatrixXd::Identity(3, 3);
  EXPECT_LT((oja_step(eye, op, 0.0) - eye).norm(), 1e-15);
}

TEST(Oja, OrthonormalAfterStep) {
  const MatrixXd x = MatrixXd::Random(30, 8);
  const auto op = GramOperator<double>::from_data(x);
  MatrixXd v = random_unit_columns(8, 4, 1);
  for (int t = 0; t < 50; ++t) {
    v = oja_step(v, op, 0.01);
    EXPECT_LT((v.transpose() * v - MatrixXd::Identity(4, 4)).norm(), 1e-10);
  }
}

TEST(Oja, RankDeficient) {
  MatrixXd v(3, 2);
  v << 1, 1, 0, 0, 0, 0;
  try {
    oja_step(v, diag321(), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::orthonormalization);
  }
}

TEST(Oja, ConvergesOnDiag321) {
  const auto op = diag321();
  MatrixXd v = orthonormalize(random_unit_columns(3, 3, 4));
  for (int t = 0; t < 3000; ++t) v = oja_step(v, op, 0.01);
  for (double a : angular_errors(v, MatrixXd(MatrixXd::Identity(3, 3)))) EXPECT_LT(a, std::numbers::pi / 8);
}

TEST(Gha, FixedPoints) {
  const auto op = diag321();
  EXPECT_LT(gha_update(MatrixXd(MatrixXd::Identity(3, 1)), op).norm(), 1e-15);
  EXPECT_LT(gha_update(MatrixXd(MatrixXd::Identity(3, 2)), op).col(1).norm(), 1e-15);
}

TEST(Gha, EqualsProjectedFirstTermWithExactParents) {
  const VectorXd lambda = VectorXd::LinSpaced(6, 6, 1);
  const MatrixXd m = lambda.asDiagonal();
  const auto op = GramOperator<double>::from_matrix(m);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Index i = 1 + static_cast<Index>(s % 5);
    MatrixXd v = MatrixXd::Identity(6, i);
    v.col(i - 1) = sample_unit_sphere(6, s);
    const VectorXd vi = v.col(i - 1);
    VectorXd expect = m * vi - vi.dot(m * vi) * vi;
    for (Index j = 0; j + 1 < i; ++j) expect -= m * (vi.dot(v.col(j)) * v.col(j));
    EXPECT_LT((gha_update(v, op).col(i - 1) - 2.0 * expect).norm(), 1e-12);
  }
}

TEST(Gha, UnnormalizedByDefault) {
  const auto op = diag321();
  const MatrixXd v = random_unit_columns(3, 2, 1);
  const MatrixXd out = gha_step(v, op, 0.5);
  EXPECT_EQ(out, MatrixXd(v + 0.5 * gha_update(v, op)));
  const MatrixXd n = gha_step(v, op, 0.5, true);
  for (Index j = 0; j < 2; ++j) EXPECT_NEAR(n.col(j).norm(), 1.0, 1e-12);
}

TEST(Gha, NotAGradientField) {
  const auto op = GramOperator<double>::from_matrix(MatrixXd(VectorXd::LinSpaced(6, 6, 1).asDiagonal()));
  EXPECT_GT(gha_jacobian_asymmetry(op, random_unit_columns(6, 3, 5), 3), 1e-6);
}

TEST(Krasulina, Fixed) {
  const auto op = diag321();
  const MatrixXd top = MatrixXd::Identity(3, 2);
  EXPECT_LT((krasulina_step(top, op, 0.1) - top).norm(), 1e-14);
  const MatrixXd full = orthonormalize(random_unit_columns(3, 3, 1));
  EXPECT_LT((krasulina_step(full, op, 0.1) - full).norm(), 1e-12);
}

TEST(Krasulina, SubspaceOnDiag321) {
  BaselineState<double> s;
  s.rule = UpdateRule::krasulina;
  s.eta = 0.05;
  s.v_hat = orthonormalize(random_unit_columns(3, 2, 8));
  const auto op = diag321();
  for (int t = 0; t < 2000; ++t) step(s, op);
  EXPECT_LT(subspace_distance(s.v_hat, MatrixXd(MatrixXd::Identity(3, 2))), 0.01);
}

TEST(Hebb, DeflationAnnihilatesParents) {
  const MatrixXd x = MatrixXd::Random(10, 5);
  const MatrixXd p = orthonormalize(random_unit_columns(5, 2, 3));
  EXPECT_LT((deflate(x, p) * p).norm(), 1e-12);
}

TEST(Hebb, SingleComponentIsOja) {
  const auto op = diag321();
  HebbOptions o;
  o.seed = 6;
  const auto r = hebb_deflation_solve(op, 1, 0.05, o);
  VectorXd v = sample_unit_sphere(3, derive_seed(6, 0));
  const MatrixXd m = op.dense();
  for (std::int64_t t = 0; t < r.steps[0]; ++t) {
    v += 0.05 * m * v;
    v.normalize();
  }
  EXPECT_LT((r.v_hat.col(0) - v).norm(), 1e-12);
}

TEST(Hebb, RecoversDiag321) {
  const auto r = hebb_deflation_solve(diag321(), 3, 0.05);
  for (double a : angular_errors(r.v_hat, MatrixXd(MatrixXd::Identity(3, 3)))) EXPECT_LT(a, std::numbers::pi / 8);
  for (bool b : r.budget_exhausted) EXPECT_FALSE(b);
}

TEST(Hebb, BudgetFlag) {
  HebbOptions o;
  o.max_steps_per_component = 3;
  const auto r = hebb_deflation_solve(diag321(), 2, 1e-6, o);
  EXPECT_TRUE(r.budget_exhausted[0]);
  EXPECT_EQ(r.total_steps, 6);
}

TEST(Hebb, FromDataSource) {
  MatrixXd x(3, 3);
  x.setZero();
  x.diagonal() << std::sqrt(3.0), std::sqrt(2.0), 1.0;
  const DataSource ds(x, 3, 1, false, SamplingMode::full_pass);
  const auto r = hebb_deflation_solve(ds, 2, 0.05);
  for (double a : angular_errors(r.v_hat, MatrixXd(MatrixXd::Identity(3, 2)))) EXPECT_LT(a, std::numbers::pi / 8);
}
