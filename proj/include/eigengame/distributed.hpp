#pragma once

#include "eigengame/common.hpp"
#include "eigengame/data_source.hpp"
#include "eigengame/game.hpp"
#include "eigengame/gram.hpp"
#include "eigengame/linalg.hpp"
#include "eigengame/metrics.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <variant>
#include <vector>

namespace eigengame {

struct WorkerConfig {
  /// 1-based; player i subscribes to players 1..i-1.
  Index player = 1;
  /// Tag for this worker's minibatch stream (ignored for full-batch problems).
  std::uint64_t data_seed = 0;
  /// 0 keeps the DataSource's own batch size.
  Index batch_size = 0;
  double alpha = 1e-3;
  Variant variant = Variant::riemannian;
  /// Rounds a consumed parent snapshot may lag; 0 is the synchronous barrier.
  Index staleness_bound = 0;
};

/// One config per player with shared settings; worker i streams with tag i.
std::vector<WorkerConfig> uniform_workers(Index k, double alpha, Variant variant,
                                          Index staleness_bound = 0, Index batch_size = 0);

/// Full-batch operator or minibatch stream.
using Problem = std::variant<GramOperator<double>, DataSource>;

enum class Schedule {
  /// Runnable workers are picked lowest player first.
  in_order,
  reverse,
  seeded_random,
};

struct RunOptions {
  int threads = 1;
  Schedule schedule = Schedule::in_order;
  std::uint64_t schedule_seed = 0;
  /// Record a MetricsRecord every this many completed rounds (0 = never);
  /// requires `truth`.
  std::int64_t record_every = 0;
  std::optional<GroundTruth<double>> truth;
  double tol = std::numbers::pi / 8;
  /// Components left out of the streak.
  std::vector<bool> excluded;
  /// CSV rows `round,player,staleness,utility`, one per worker round.
  std::ostream* round_log = nullptr;
  /// Called by the worker before each of its rounds (player, round).
  std::function<void(Index, std::int64_t)> step_hook;
};

struct Snapshot {
  MatrixXd v_hat;
  std::vector<std::int64_t> stamps;
};

struct RunResult {
  Snapshot final;
  std::vector<MetricsRecord> records;
  /// Per player totals over the run.
  std::vector<std::int64_t> sent;
  std::vector<std::int64_t> received;
  /// Minibatches skipped because a parent had <Xv, Xv> below the guard.
  std::vector<std::int64_t> rejected_batches;
  /// Largest observed parent lag per player.
  std::vector<std::int64_t> max_staleness;
  /// False if some worker ever read an older parent version after a newer one.
  bool reads_monotone = true;
};

/// In-process broadcast runtime: k workers, each owning one column, exchanging
/// vectors through a board of versioned per-player slots.
class Runtime {
 public:
  Runtime(Index k, std::vector<WorkerConfig> configs, Problem problem, const MatrixXd& initial,
          RunOptions options = {});
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  /// Advances every worker by `rounds` rounds.
  RunResult run(std::int64_t rounds);

  /// Latest publication of every player, with round stamps.
  Snapshot snapshot() const;

  /// The board state at a completed round (every player has published it).
  Snapshot snapshot_at(std::int64_t round) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

inline RunResult run(Index k, std::int64_t rounds, std::vector<WorkerConfig> configs, Problem problem,
                     const MatrixXd& initial, RunOptions options = {}) {
  Runtime rt(k, std::move(configs), std::move(problem), initial, std::move(options));
  return rt.run(rounds);
}

}  // namespace eigengame
