#include "eigengame/distributed.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <random>
#include <thread>

namespace eigengame {

std::vector<WorkerConfig> uniform_workers(Index k, double alpha, Variant variant, Index staleness_bound,
                                          Index batch_size) {
  std::vector<WorkerConfig> out;
  for (Index i = 1; i <= k; ++i)
    out.push_back(WorkerConfig{i, static_cast<std::uint64_t>(i), batch_size, alpha, variant, staleness_bound});
  return out;
}

namespace {

struct Slot {
  std::int64_t stamp = -1;
  VectorXd v;
};

struct Worker {
  WorkerConfig cfg;
  std::vector<Slot> ring;
  std::int64_t done = 0;
  bool running = false;
  std::optional<BatchStream> stream;
  std::vector<std::int64_t> last_read;

  const Slot& at(std::int64_t stamp) const {
    const Slot& s = ring[static_cast<std::size_t>(stamp % static_cast<std::int64_t>(ring.size()))];
    if (s.stamp != stamp)
      throw Error(ErrorCode::range, "round " + std::to_string(stamp) + " of player " +
                                        std::to_string(cfg.player) + " is no longer on the board");
    return s;
  }
  const Slot& latest() const { return at(done); }
  void publish(std::int64_t stamp, VectorXd v) {
    Slot& s = ring[static_cast<std::size_t>(stamp % static_cast<std::int64_t>(ring.size()))];
    s.stamp = stamp;
    s.v = std::move(v);
  }
};

}  // namespace

struct Runtime::Impl {
  Index k = 0;
  Index d = 0;
  std::vector<Worker> workers;
  Problem problem;
  RunOptions options;
  std::optional<GramOperator<double>> full_op;

  mutable std::mutex mu;
  std::condition_variable cv;
  std::int64_t target = 0;
  std::int64_t min_done = 0;
  bool aborted = false;
  Index failed_player = 0;
  std::string failure;
  std::mt19937_64 schedule_rng;
  std::chrono::steady_clock::time_point start;
  RunResult result;

  Impl(Index k_, std::vector<WorkerConfig> configs, Problem p, const MatrixXd& initial, RunOptions o)
      : k(k_), problem(std::move(p)), options(std::move(o)), schedule_rng(options.schedule_seed) {
    if (k < 1) throw Error(ErrorCode::invalid_dimension, "Runtime: k must be >= 1");
    d = std::visit([](const auto& pr) -> Index {
      using T = std::decay_t<decltype(pr)>;
      if constexpr (std::is_same_v<T, DataSource>) return pr.cols();
      else return pr.dim();
    }, problem);
    if (initial.rows() != d || initial.cols() != k)
      throw Error(ErrorCode::invalid_dimension, "Runtime: initial V_hat must be d x k");
    if (k > d) throw Error(ErrorCode::invalid_dimension, "Runtime: k must be <= d");
    if (static_cast<Index>(configs.size()) != k)
      throw Error(ErrorCode::invalid_argument, "Runtime: need exactly one WorkerConfig per player");
    if (options.threads < 1) throw Error(ErrorCode::invalid_argument, "Runtime: threads must be >= 1");
    if (options.record_every > 0 && !options.truth)
      throw Error(ErrorCode::invalid_argument, "Runtime: recording metrics requires ground truth");
    std::sort(configs.begin(), configs.end(),
              [](const WorkerConfig& a, const WorkerConfig& b) { return a.player < b.player; });
    workers.resize(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; ++i) {
      const WorkerConfig& c = configs[static_cast<std::size_t>(i)];
      if (c.player != i + 1) throw Error(ErrorCode::invalid_argument, "Runtime: players must be 1..k");
      if (c.staleness_bound < 0) throw Error(ErrorCode::invalid_argument, "Runtime: staleness_bound must be >= 0");
      if (!(c.alpha > 0.0)) throw Error(ErrorCode::invalid_argument, "Runtime: alpha must be > 0");
      Worker& w = workers[static_cast<std::size_t>(i)];
      w.cfg = c;
      w.ring.resize(static_cast<std::size_t>(c.staleness_bound + 2));
      const double n = initial.col(i).norm();
      if (!(n > 0.0)) throw Error(ErrorCode::invalid_argument, "Runtime: zero initial column");
      w.publish(0, initial.col(i) / n);
      w.last_read.assign(static_cast<std::size_t>(i), -1);
      if (auto* ds = std::get_if<DataSource>(&problem)) {
        const DataSource src = c.batch_size > 0 ? ds->with_batch_size(c.batch_size) : *ds;
        w.stream.emplace(src.stream(c.data_seed));
      }
    }
    if (auto* op = std::get_if<GramOperator<double>>(&problem)) full_op = *op;
    else full_op = GramOperator<double>::from_data(std::get<DataSource>(problem).shared_data());
    result.sent.assign(static_cast<std::size_t>(k), 0);
    result.received.assign(static_cast<std::size_t>(k), 0);
    result.max_staleness.assign(static_cast<std::size_t>(k), 0);
    result.rejected_batches.assign(static_cast<std::size_t>(k), 0);
  }

  bool all_done() const {
    return std::all_of(workers.begin(), workers.end(), [&](const Worker& w) { return w.done >= target; });
  }

  bool eligible(const Worker& w) const {
    const std::int64_t r = w.done + 1;
    return !w.running && r <= target && r <= min_done + w.cfg.staleness_bound + 1;
  }

  int pick() {
    std::vector<int> order(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);
    if (options.schedule == Schedule::reverse) std::reverse(order.begin(), order.end());
    if (options.schedule == Schedule::seeded_random) std::shuffle(order.begin(), order.end(), schedule_rng);
    for (int p : order)
      if (eligible(workers[static_cast<std::size_t>(p)])) return p;
    return -1;
  }

  Snapshot snapshot_at(std::int64_t round) const {
    Snapshot s;
    s.v_hat.resize(d, k);
    for (Index i = 0; i < k; ++i) {
      s.v_hat.col(i) = workers[static_cast<std::size_t>(i)].at(round).v;
      s.stamps.push_back(round);
    }
    return s;
  }

  Snapshot snapshot() const {
    Snapshot s;
    s.v_hat.resize(d, k);
    for (Index i = 0; i < k; ++i) {
      const Slot& slot = workers[static_cast<std::size_t>(i)].latest();
      s.v_hat.col(i) = slot.v;
      s.stamps.push_back(slot.stamp);
    }
    return s;
  }

  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }

  void advance_min_done() {
    std::int64_t m = workers.front().done;
    for (const Worker& w : workers) m = std::min(m, w.done);
    while (min_done < m) {
      ++min_done;
      if (options.record_every > 0 && (min_done % options.record_every == 0 || min_done == target))
        result.records.push_back(make_record(min_done, elapsed_ms(), snapshot_at(min_done).v_hat,
                                             options.truth->v, *full_op, options.tol, options.excluded));
    }
  }

  void worker_loop() {
    std::unique_lock<std::mutex> lk(mu);
    while (true) {
      int p = -1;
      cv.wait(lk, [&] {
        if (aborted || all_done()) return true;
        p = pick();
        return p >= 0;
      });
      if (aborted || p < 0) return;
      Worker& w = workers[static_cast<std::size_t>(p)];
      w.running = true;
      const std::int64_t r = w.done + 1;
      const bool sync = w.cfg.staleness_bound == 0;
      EigenState<double> state;
      state.alpha = w.cfg.alpha;
      state.variant = w.cfg.variant;
      state.iter = r - 1;
      state.v_hat.resize(d, p + 1);
      std::int64_t lag = 0;
      for (int j = 0; j < p; ++j) {
        const Worker& parent = workers[static_cast<std::size_t>(j)];
        const Slot& slot = sync ? parent.at(r - 1) : parent.latest();
        state.v_hat.col(j) = slot.v;
        auto& last = w.last_read[static_cast<std::size_t>(j)];
        if (slot.stamp < last) result.reads_monotone = false;
        last = slot.stamp;
        lag = std::max(lag, (r - 1) - slot.stamp);
      }
      state.v_hat.col(p) = w.latest().v;
      result.received[static_cast<std::size_t>(p)] += p;
      auto& ms = result.max_staleness[static_cast<std::size_t>(p)];
      ms = std::max(ms, lag);
      lk.unlock();

      VectorXd next;
      double u = 0.0;
      bool rejected = false;
      try {
        if (options.step_hook) options.step_hook(p + 1, r);
        const GramOperator<double> op =
            w.stream ? GramOperator<double>::from_data(w.stream->next()) : *full_op;
        try {
          if (options.round_log) u = utility(op, state.v_hat, PlayerIndex(p + 1));
          next = streaming_step(state, PlayerIndex(p + 1), op);
        } catch (const Error& e) {
          // A minibatch that misses a parent's direction is skipped, not fatal.
          if (!w.stream || e.code() != ErrorCode::degenerate_parent) throw;
          next = state.v_hat.col(p);
          rejected = true;
        }
      } catch (const std::exception& e) {
        lk.lock();
        w.running = false;
        if (!aborted) {
          aborted = true;
          failed_player = p + 1;
          failure = e.what();
        }
        cv.notify_all();
        return;
      }

      lk.lock();
      w.publish(r, std::move(next));
      w.done = r;
      w.running = false;
      result.sent[static_cast<std::size_t>(p)] += k - 1 - p;
      if (rejected) ++result.rejected_batches[static_cast<std::size_t>(p)];
      if (options.round_log) *options.round_log << r << ',' << (p + 1) << ',' << lag << ',' << u << '\n';
      advance_min_done();
      cv.notify_all();
    }
  }
};

Runtime::Runtime(Index k, std::vector<WorkerConfig> configs, Problem problem, const MatrixXd& initial,
                 RunOptions options)
    : impl_(std::make_unique<Impl>(k, std::move(configs), std::move(problem), initial, std::move(options))) {}

Runtime::~Runtime() = default;

RunResult Runtime::run(std::int64_t rounds) {
  if (rounds < 0) throw Error(ErrorCode::invalid_argument, "Runtime::run: rounds must be >= 0");
  Impl& s = *impl_;
  {
    std::lock_guard<std::mutex> lk(s.mu);
    if (s.aborted) throw Error(ErrorCode::worker_failure, "Runtime::run: runtime already aborted");
    s.target = s.min_done + rounds;
    s.start = std::chrono::steady_clock::now();
    s.result.records.clear();
    if (s.options.round_log && s.min_done == 0) *s.options.round_log << "round,player,staleness,utility\n";
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < s.options.threads; ++t) pool.emplace_back([&s] { s.worker_loop(); });
  for (auto& th : pool) th.join();
  if (s.aborted)
    throw Error(ErrorCode::worker_failure,
                "worker for player " + std::to_string(s.failed_player) + " failed: " + s.failure);
  s.result.final = s.snapshot();
  return s.result;
}

Snapshot Runtime::snapshot() const {
  std::lock_guard<std::mutex> lk(impl_->mu);
  return impl_->snapshot();
}

Snapshot Runtime::snapshot_at(std::int64_t round) const {
  std::lock_guard<std::mutex> lk(impl_->mu);
  return impl_->snapshot_at(round);
}

}  // namespace eigengame
