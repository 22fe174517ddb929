#include "eigengame/distributed.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>
#include <sstream>

using namespace eigengame;

namespace {

GramOperator<double> diag_op(Index d) {
  return GramOperator<double>::from_matrix(MatrixXd(VectorXd::LinSpaced(d, static_cast<double>(d), 1).asDiagonal()));
}

GroundTruth<double> diag_truth(Index d) {
  GroundTruth<double> t;
  t.lambda = VectorXd::LinSpaced(d, static_cast<double>(d), 1);
  t.v = MatrixXd::Identity(d, d);
  return t;
}

}  // namespace

TEST(Runtime, SinglePlayerMatchesStreamingLoop) {
  const auto op = diag_op(4);
  const MatrixXd v0 = random_unit_columns(4, 1, 3);
  const auto r = run(1, 200, uniform_workers(1, 0.05, Variant::riemannian), op, v0);
  EigenState<double> s;
  s.v_hat = v0;
  s.alpha = 0.05;
  for (int t = 0; t < 200; ++t) s.v_hat.col(0) = streaming_step(s, PlayerIndex(1), op);
  EXPECT_LT((r.final.v_hat - s.v_hat).norm(), 1e-14);
  EXPECT_EQ(r.final.stamps, (std::vector<std::int64_t>{200}));
}

TEST(Runtime, SynchronousEqualsVectorizedReplay) {
  SpectrumSpec spec;
  spec.d = 10;
  spec.lambda_max = 10;
  const auto p = synthetic_matrix(spec, true, 2);
  const auto op = GramOperator<double>::from_matrix(p.m);
  const MatrixXd v0 = random_unit_columns(10, 4, 5);
  for (Variant var : {Variant::plain, Variant::riemannian}) {
    RunOptions o;
    o.threads = 3;
    const auto r = run(4, 1000, uniform_workers(4, 0.01, var), op, v0, o);
    EigenState<double> s;
    s.v_hat = v0;
    s.alpha = 0.01;
    s.variant = var;
    for (int t = 0; t < 1000; ++t) advance(s, op);
    EXPECT_LT((r.final.v_hat - s.v_hat).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Runtime, SnapshotStampsAndIncrementalRuns) {
  const auto op = diag_op(5);
  Runtime rt(3, uniform_workers(3, 0.05, Variant::riemannian), op, random_unit_columns(5, 3, 1));
  rt.run(10);
  EXPECT_EQ(rt.snapshot().stamps, (std::vector<std::int64_t>{10, 10, 10}));
  const auto r = rt.run(7);
  EXPECT_EQ(r.final.stamps, (std::vector<std::int64_t>{17, 17, 17}));
  EXPECT_EQ(rt.snapshot_at(17).v_hat, r.final.v_hat);
  EXPECT_THROW(rt.snapshot_at(3), Error);
}

TEST(Runtime, DeterministicAcrossThreadsAndSchedules) {
  const auto op = diag_op(6);
  const MatrixXd v0 = random_unit_columns(6, 4, 9);
  RunOptions base;
  const auto ref = run(4, 300, uniform_workers(4, 0.02, Variant::riemannian), op, v0, base);
  for (int threads : {1, 2, 4, 8})
    for (Schedule sch : {Schedule::in_order, Schedule::reverse, Schedule::seeded_random}) {
      RunOptions o;
      o.threads = threads;
      o.schedule = sch;
      o.schedule_seed = 77;
      const auto r = run(4, 300, uniform_workers(4, 0.02, Variant::riemannian), op, v0, o);
      EXPECT_EQ(r.final.v_hat, ref.final.v_hat) << threads;
    }
}

TEST(Runtime, MessageCounts) {
  const Index k = 5;
  RunOptions o;
  o.threads = 2;
  const auto r = run(k, 40, uniform_workers(k, 0.01, Variant::riemannian), diag_op(6), random_unit_columns(6, k, 1), o);
  for (Index i = 1; i <= k; ++i) {
    EXPECT_EQ(r.sent[static_cast<std::size_t>(i - 1)], 40 * (k - i));
    EXPECT_EQ(r.received[static_cast<std::size_t>(i - 1)], 40 * (i - 1));
  }
}

TEST(Runtime, BoundedStalenessHonored) {
  for (Index s : {1, 3}) {
    for (Schedule sch : {Schedule::reverse, Schedule::seeded_random}) {
      RunOptions o;
      o.threads = 4;
      o.schedule = sch;
      o.schedule_seed = static_cast<std::uint64_t>(s);
      const auto r = run(4, 500, uniform_workers(4, 0.02, Variant::riemannian, s), diag_op(6),
                         random_unit_columns(6, 4, 2), o);
      for (auto lag : r.max_staleness) EXPECT_LE(lag, s);
      EXPECT_TRUE(r.reads_monotone);
    }
  }
}

TEST(Runtime, ReverseScheduleProducesLag) {
  RunOptions o;
  o.schedule = Schedule::reverse;
  const auto r = run(3, 50, uniform_workers(3, 0.02, Variant::riemannian, 2), diag_op(4),
                     random_unit_columns(4, 3, 2), o);
  EXPECT_GT(r.max_staleness[2], 0);
  EXPECT_LE(r.max_staleness[2], 2);
}

TEST(Runtime, StaleRunConvergesOnDiag321) {
  RunOptions o;
  o.threads = 3;
  o.schedule = Schedule::seeded_random;
  o.schedule_seed = 5;
  o.truth = diag_truth(3);
  o.record_every = 500;
  const auto r = run(3, 3000, uniform_workers(3, 0.05, Variant::riemannian, 1), diag_op(3),
                     random_unit_columns(3, 3, 11), o);
  for (double a : angular_errors(r.final.v_hat, diag_truth(3).v)) EXPECT_LT(a, std::numbers::pi / 8);
  ASSERT_EQ(r.records.size(), 6u);
  EXPECT_EQ(r.records.back().iteration, 3000);
  EXPECT_EQ(r.records.back().streak, 3);
}

TEST(Runtime, WorkerFailurePropagates) {
  RunOptions o;
  o.threads = 3;
  o.step_hook = [](Index player, std::int64_t round) {
    if (player == 2 && round == 5) throw std::runtime_error("disk on fire");
  };
  try {
    run(3, 20, uniform_workers(3, 0.05, Variant::riemannian), diag_op(4), random_unit_columns(4, 3, 1), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::worker_failure);
    EXPECT_NE(std::string(e.what()).find("player 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("disk on fire"), std::string::npos);
  }
}

TEST(Runtime, RoundLog) {
  std::ostringstream log;
  RunOptions o;
  o.round_log = &log;
  run(2, 3, uniform_workers(2, 0.05, Variant::riemannian), diag_op(3), random_unit_columns(3, 2, 1), o);
  std::istringstream in(log.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "round,player,staleness,utility");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 6);
}

TEST(Runtime, Validation) {
  const auto op = diag_op(3);
  EXPECT_THROW(Runtime(4, uniform_workers(4, 0.1, Variant::plain), op, MatrixXd::Ones(3, 4)), Error);
  EXPECT_THROW(Runtime(2, uniform_workers(1, 0.1, Variant::plain), op, MatrixXd::Ones(3, 2)), Error);
  EXPECT_THROW(Runtime(2, uniform_workers(2, 0.0, Variant::plain), op, MatrixXd::Ones(3, 2)), Error);
  RunOptions o;
  o.record_every = 10;
  EXPECT_THROW(Runtime(2, uniform_workers(2, 0.1, Variant::plain), op, MatrixXd::Ones(3, 2), o), Error);
}

TEST(Runtime, MinibatchStreamsPerWorker) {
  SpectrumSpec spec;
  spec.d = 5;
  spec.lambda_max = 5;
  const auto p = synthetic_matrix(spec, true, 0);
  const MatrixXd root = MatrixXd(p.truth.lambda.cwiseSqrt().asDiagonal()) * p.truth.v.transpose();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  MatrixXd z(2000, 5);
  for (Index r = 0; r < 2000; ++r)
    for (Index c = 0; c < 5; ++c) z(r, c) = normal(rng);
  const MatrixXd x = z * root / std::sqrt(2000.0);
  const auto truth = dense_eigen(MatrixXd(x.transpose() * x));
  const DataSource ds(x, 32, 13);
  const MatrixXd v0 = random_unit_columns(5, 2, 4);
  RunOptions o1, o4;
  o4.threads = 4;
  const auto a = run(2, 3000, uniform_workers(2, 0.01, Variant::riemannian), ds, v0, o1);
  const auto b = run(2, 3000, uniform_workers(2, 0.01, Variant::riemannian), ds, v0, o4);
  EXPECT_EQ(a.final.v_hat, b.final.v_hat);
  for (double e : angular_errors(a.final.v_hat, MatrixXd(truth.v.leftCols(2)))) EXPECT_LT(e, std::numbers::pi / 8);
  EXPECT_EQ(a.rejected_batches, (std::vector<std::int64_t>{0, 0}));
}

TEST(Runtime, BatchMissingParentIsSkipped) {
  // Rows are scaled eigenvectors, so a one-row batch sees only one direction.
  const MatrixXd x = VectorXd::LinSpaced(4, 2, 1).asDiagonal();
  const DataSource ds(x, 1, 3);
  MatrixXd v0 = MatrixXd::Zero(4, 2);
  v0(0, 0) = 1;
  v0(1, 1) = 1;
  const auto r = run(2, 200, uniform_workers(2, 0.05, Variant::riemannian), ds, v0);
  EXPECT_EQ(r.rejected_batches[0], 0);
  EXPECT_GT(r.rejected_batches[1], 0);
  EXPECT_LT(r.rejected_batches[1], 200);
  EXPECT_THROW(run(2, 1, uniform_workers(2, 0.05, Variant::riemannian),
                   GramOperator<double>::from_matrix(MatrixXd(VectorXd(Eigen::Vector4d(0, 1, 1, 1)).asDiagonal())), v0),
               Error);
}
