#include "eigengame/experiment.hpp"

#include "eigengame/distributed.hpp"
#include "eigengame/game.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace eigengame {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, std::size_t line) {
  throw ParseError("config: bad value '" + value + "' for key '" + key + "'", line, 2);
}

double to_double(const std::string& key, const std::string& value, std::size_t line) {
  const std::string v = trim(value);
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(x)) bad_value(key, value, line);
  return x;
}

std::int64_t to_int(const std::string& key, const std::string& value, std::size_t line) {
  const std::string v = trim(value);
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size()) {
    // Accept integral scientific notation such as 3e4.
    const double y = to_double(key, value, line);
    if (y != std::floor(y) || std::abs(y) > 9e18) bad_value(key, value, line);
    return static_cast<std::int64_t>(y);
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& value, std::size_t line) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, value, line);
}

std::string alpha_tag(double alpha) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", alpha);
  return buf;
}

}  // namespace

void validate(const ExperimentConfig& c) {
  if (c.trials < 1) throw Error(ErrorCode::invalid_argument, "config: trials must be >= 1");
  if (c.rules.empty()) throw Error(ErrorCode::invalid_argument, "config: rule list is empty");
  if (c.alphas.empty()) throw Error(ErrorCode::invalid_argument, "config: alpha list is empty");
  for (double a : c.alphas)
    if (!(a > 0.0)) throw Error(ErrorCode::invalid_argument, "config: alpha must be > 0");
  if (!(c.tol > 0.0 && c.tol < std::numbers::pi / 2))
    throw Error(ErrorCode::range, "config: tolerance must lie in (0, pi/2)");
  if (c.k < 1) throw Error(ErrorCode::invalid_dimension, "config: k must be >= 1");
  if (c.batch_size < 0) throw Error(ErrorCode::invalid_argument, "config: batch must be >= 0");
  if (c.samples < 0) throw Error(ErrorCode::invalid_argument, "config: samples must be >= 0");
  if (c.iters < 0) throw Error(ErrorCode::invalid_argument, "config: iters must be >= 0");
  if (c.record_every < 0) throw Error(ErrorCode::invalid_argument, "config: record_every must be >= 0");
  if (c.threads < 0) throw Error(ErrorCode::invalid_argument, "config: threads must be >= 0");
  if (!c.dataset) {
    validate(c.spectrum);
    if (c.k > c.spectrum.d) throw Error(ErrorCode::invalid_dimension, "config: k must be <= d");
  }
}

void set_config_value(ExperimentConfig& c, const std::string& raw_key, const std::string& value,
                      std::size_t line) {
  const std::string key = trim(raw_key);
  const std::string v = trim(value);
  if (key == "spectrum" || key == "kind") {
    if (v == "linear") c.spectrum.kind = SpectrumKind::linear;
    else if (v == "exponential") c.spectrum.kind = SpectrumKind::exponential;
    else if (v == "bubble") c.spectrum.kind = SpectrumKind::bubble;
    else bad_value(key, value, line);
  } else if (key == "d") {
    c.spectrum.d = to_int(key, v, line);
  } else if (key == "lambda_max") {
    c.spectrum.lambda_max = to_double(key, v, line);
  } else if (key == "lambda_min") {
    c.spectrum.lambda_min = to_double(key, v, line);
  } else if (key == "bubble") {
    const auto dash = v.find('-');
    if (dash == std::string::npos) bad_value(key, value, line);
    c.spectrum.bubble_range = std::make_pair<Index, Index>(to_int(key, v.substr(0, dash), line),
                                                           to_int(key, v.substr(dash + 1), line));
  } else if (key == "rotate") {
    c.rotate = to_bool(key, v, line);
  } else if (key == "dataset") {
    if (v.empty()) c.dataset.reset();
    else c.dataset = v;
  } else if (key == "centered") {
    c.centered = to_bool(key, v, line);
  } else if (key == "k") {
    c.k = to_int(key, v, line);
  } else if (key == "rule" || key == "rules") {
    c.rules.clear();
    try {
      for (const auto& r : split_list(v)) c.rules.push_back(parse_rule(r));
    } catch (const Error&) {
      bad_value(key, value, line);
    }
  } else if (key == "alpha" || key == "alphas") {
    c.alphas.clear();
    for (const auto& a : split_list(v)) c.alphas.push_back(to_double(key, a, line));
  } else if (key == "batch") {
    c.batch_size = to_int(key, v, line);
  } else if (key == "samples") {
    c.samples = to_int(key, v, line);
  } else if (key == "iters") {
    c.iters = to_int(key, v, line);
  } else if (key == "trials") {
    c.trials = static_cast<int>(to_int(key, v, line));
  } else if (key == "seed") {
    c.seed = static_cast<std::uint64_t>(to_int(key, v, line));
  } else if (key == "seed_block") {
    if (v == "reported") c.seed_block = SeedBlock::reported;
    else if (v == "held_out") c.seed_block = SeedBlock::held_out;
    else bad_value(key, value, line);
  } else if (key == "tol" || key == "tol_rad") {
    c.tol = to_double(key, v, line);
  } else if (key == "record_every") {
    c.record_every = to_int(key, v, line);
  } else if (key == "out") {
    c.out_dir = v;
  } else if (key == "threads") {
    c.threads = static_cast<int>(to_int(key, v, line));
  } else if (key == "gha_normalize") {
    c.gha_normalize = to_bool(key, v, line);
  } else if (key == "exclude_bubble") {
    c.exclude_bubble = to_bool(key, v, line);
  } else if (key == "hebb_window") {
    c.hebb.window = to_int(key, v, line);
  } else if (key == "hebb_rel_tol") {
    c.hebb.rel_tol = to_double(key, v, line);
  } else if (key == "hebb_max_steps") {
    c.hebb.max_steps_per_component = to_int(key, v, line);
  } else {
    throw ParseError("config: unknown key '" + key + "'", line, 1);
  }
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("config: ") + e.what(), 1, e.byte);
    }
    if (!j.is_object()) throw ParseError("config: JSON config must be an object", 1, 1);
    for (const auto& [key, val] : j.items()) {
      std::string s;
      if (val.is_string()) {
        s = val.get<std::string>();
      } else if (val.is_array()) {
        for (const auto& item : val) {
          if (!s.empty()) s += ',';
          s += item.is_string() ? item.get<std::string>() : item.dump();
        }
      } else {
        s = val.dump();
      }
      set_config_value(c, key, s, 0);
    }
    return c;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected key = value", no, 1);
    set_config_value(c, line.substr(0, eq), line.substr(eq + 1), no);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::uint64_t trial_seed(std::uint64_t base, SeedBlock block, int trial) {
  const std::uint64_t b = derive_seed(base, block == SeedBlock::reported ? 0x7e90 : 0x4e1d);
  return derive_seed(b, static_cast<std::uint64_t>(trial));
}

ResolvedProblem resolve_problem(const ExperimentConfig& c, std::uint64_t data_seed) {
  if (c.dataset) {
    const MatrixXd x = read_matrix(*c.dataset, format_from_path(*c.dataset));
    const Index batch = c.batch_size > 0 ? c.batch_size : x.rows();
    DataSource ds(x, batch, data_seed, c.centered);
    if (c.k > ds.cols()) throw Error(ErrorCode::invalid_dimension, "config: k must be <= d");
    auto full = GramOperator<double>::from_data(ds.shared_data());
    auto truth = dense_eigen(full.dense());
    std::optional<DataSource> data;
    if (c.batch_size > 0) data = ds;
    return ResolvedProblem{std::move(full), std::move(truth), std::move(data), {}};
  }
  auto p = synthetic_matrix(c.spectrum, c.rotate, c.seed);
  std::vector<bool> excluded;
  if (c.spectrum.kind == SpectrumKind::bubble && c.exclude_bubble) {
    excluded.assign(static_cast<std::size_t>(c.k), false);
    const auto [first, last] = *c.spectrum.bubble_range;
    for (Index i = first; i <= last && i <= c.k; ++i) excluded[static_cast<std::size_t>(i - 1)] = true;
  }
  if (c.batch_size > 0) {
    // Streams draw Gaussian rows; the target is the sample Gram matrix.
    const Index n = c.samples > 0 ? c.samples : std::max<Index>(1000, 20 * c.spectrum.d);
    const auto g = generate_data(c.spectrum, c.rotate, c.seed, GenMode::gaussian, n);
    DataSource ds(g.x, c.batch_size, data_seed);
    auto full = GramOperator<double>::from_data(ds.shared_data());
    auto truth = dense_eigen(full.dense());
    return ResolvedProblem{std::move(full), std::move(truth), std::move(ds), std::move(excluded)};
  }
  return ResolvedProblem{GramOperator<double>::from_matrix(p.m), std::move(p.truth), std::nullopt,
                         std::move(excluded)};
}

ArmResult run_arm(const ExperimentConfig& c, UpdateRule rule, double alpha, int trial) {
  ArmResult arm;
  arm.rule = rule;
  arm.alpha = alpha;
  arm.trial = trial;
  arm.seed = trial_seed(c.seed, c.seed_block, trial);
  const ResolvedProblem pr = resolve_problem(c, derive_seed(arm.seed, 0xda7a));
  const Index d = pr.full.dim();
  const MatrixXd init = random_unit_columns(d, c.k, derive_seed(arm.seed, 0x1417));
  const auto start = std::chrono::steady_clock::now();
  auto ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };
  auto record = [&](std::int64_t it, const MatrixXd& v) {
    arm.records.push_back(make_record(it, ms(), v, pr.truth.v, pr.full, c.tol, pr.excluded));
  };
  auto due = [&](std::int64_t t) { return t == c.iters || (c.record_every > 0 && t % c.record_every == 0); };

  record(0, init);
  if (rule == UpdateRule::eigengame || rule == UpdateRule::eigengame_r) {
    const Variant variant = rule == UpdateRule::eigengame ? Variant::plain : Variant::riemannian;
    RunOptions opts;
    opts.record_every = c.record_every > 0 ? c.record_every : std::max<std::int64_t>(c.iters, 1);
    opts.truth = pr.truth;
    opts.tol = c.tol;
    opts.excluded = pr.excluded;
    Problem problem = pr.data ? Problem(*pr.data) : Problem(pr.full);
    Runtime rt(c.k, uniform_workers(c.k, alpha, variant), std::move(problem), init, opts);
    RunResult res = rt.run(c.iters);
    for (auto& r : res.records) arm.records.push_back(std::move(r));
    arm.v_hat = res.final.v_hat;
  } else if (rule == UpdateRule::hebb_deflation) {
    HebbOptions ho = c.hebb;
    ho.seed = derive_seed(arm.seed, 0x1417);
    ho.max_steps_per_component =
        std::min<std::int64_t>(ho.max_steps_per_component, std::max<std::int64_t>(c.iters / c.k, 1));
    HebbResult<double> res;
    if (pr.data) {
      auto stream = pr.data->stream(0);
      res = hebb_deflation_solve<double>(
          d, c.k, alpha, [&stream] { return GramOperator<double>::from_data(stream.next()); }, ho);
    } else {
      res = hebb_deflation_solve(pr.full, c.k, alpha, ho);
    }
    arm.v_hat = res.v_hat;
    record(c.iters, arm.v_hat);
  } else {
    BaselineState<double> s;
    s.rule = rule;
    s.eta = alpha;
    s.gha_normalize = c.gha_normalize;
    s.v_hat = rule == UpdateRule::gha ? init : orthonormalize(init);
    std::optional<BatchStream> stream;
    if (pr.data) stream.emplace(pr.data->stream(0));
    for (std::int64_t t = 1; t <= c.iters; ++t) {
      if (stream) step(s, GramOperator<double>::from_data(stream->next()));
      else step(s, pr.full);
      if (due(t)) {
        // Krasulina only targets the subspace; its columns are matched first.
        if (rule == UpdateRule::krasulina) {
          const MatrixXd top = pr.truth.v.leftCols(c.k);
          record(t, apply_matching(s.v_hat, optimal_matching(s.v_hat, top)));
        } else {
          record(t, s.v_hat);
        }
      }
    }
    arm.v_hat = s.v_hat;
  }
  return arm;
}

std::vector<AggregateRow> aggregate(const std::vector<ArmResult>& arms) {
  struct Acc {
    AggregateRow row;
    std::vector<double> streaks;
    std::vector<double> dists;
  };
  std::vector<Acc> accs;
  for (const auto& arm : arms) {
    for (const auto& r : arm.records) {
      auto it = std::find_if(accs.begin(), accs.end(), [&](const Acc& a) {
        return a.row.rule == arm.rule && a.row.alpha == arm.alpha && a.row.iteration == r.iteration;
      });
      if (it == accs.end()) {
        accs.push_back(Acc{});
        it = std::prev(accs.end());
        it->row.rule = arm.rule;
        it->row.alpha = arm.alpha;
        it->row.iteration = r.iteration;
      }
      it->streaks.push_back(static_cast<double>(r.streak));
      it->dists.push_back(r.subspace_distance);
    }
  }
  auto mean_se = [](const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double mean = 0;
    for (double v : x) mean += v;
    mean /= n;
    if (x.size() < 2) return std::make_pair(mean, 0.0);
    double ss = 0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::make_pair(mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n));
  };
  std::vector<AggregateRow> out;
  for (auto& a : accs) {
    a.row.trials = static_cast<int>(a.streaks.size());
    std::tie(a.row.streak_mean, a.row.streak_stderr) = mean_se(a.streaks);
    std::tie(a.row.subspace_mean, a.row.subspace_stderr) = mean_se(a.dists);
    out.push_back(a.row);
  }
  return out;
}

std::map<std::string, double> select_alpha(const std::vector<AggregateRow>& rows) {
  std::map<std::string, const AggregateRow*> final_row;
  std::map<std::pair<std::string, double>, const AggregateRow*> last;
  for (const auto& r : rows) {
    auto& slot = last[{to_string(r.rule), r.alpha}];
    if (!slot || r.iteration > slot->iteration) slot = &r;
  }
  for (const auto& [key, r] : last) {
    auto& best = final_row[key.first];
    if (!best) {
      best = r;
      continue;
    }
    const bool better = r->streak_mean > best->streak_mean ||
                        (r->streak_mean == best->streak_mean &&
                         (r->subspace_mean < best->subspace_mean ||
                          (r->subspace_mean == best->subspace_mean && r->alpha < best->alpha)));
    if (better) best = r;
  }
  std::map<std::string, double> out;
  for (const auto& [rule, r] : final_row) out[rule] = r->alpha;
  return out;
}

std::string arm_filename(UpdateRule rule, double alpha, int trial) {
  return std::string("arm_") + to_string(rule) + "_alpha" + alpha_tag(alpha) + "_trial" + std::to_string(trial) +
         ".csv";
}

void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
  os << "rule,alpha,iter,trials,streak_mean,streak_stderr,subspace_mean,subspace_stderr\n";
  os.precision(17);
  for (const auto& r : rows)
    os << to_string(r.rule) << ',' << r.alpha << ',' << r.iteration << ',' << r.trials << ',' << r.streak_mean
       << ',' << r.streak_stderr << ',' << r.subspace_mean << ',' << r.subspace_stderr << '\n';
}

ExperimentReport run_experiment(const ExperimentConfig& c) {
  validate(c);
  namespace fs = std::filesystem;
  fs::create_directories(c.out_dir);
  if (c.dataset && !fs::exists(*c.dataset)) throw Error(ErrorCode::io, "dataset not found: " + *c.dataset);

  struct Job {
    UpdateRule rule;
    double alpha;
    int trial;
  };
  std::vector<Job> jobs;
  for (UpdateRule r : c.rules)
    for (double a : c.alphas)
      for (int t = 0; t < c.trials; ++t) jobs.push_back({r, a, t});

  ExperimentReport report;
  report.arms.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto work = [&] {
    while (true) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        ArmResult arm = run_arm(c, jobs[j].rule, jobs[j].alpha, jobs[j].trial);
        std::ofstream os(fs::path(c.out_dir) / arm_filename(arm.rule, arm.alpha, arm.trial));
        os.precision(17);
        write_metrics_header(os, c.k);
        for (const auto& r : arm.records) write_metrics_row(os, r);
        report.arms[j] = std::move(arm);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
        next = jobs.size();
      }
    }
  };
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const int n_threads = std::min<int>(c.threads > 0 ? c.threads : hw, static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);

  report.aggregate = aggregate(report.arms);
  report.best_alpha = select_alpha(report.aggregate);
  {
    std::ofstream os(fs::path(c.out_dir) / "aggregate.csv");
    write_aggregate_csv(os, report.aggregate);
  }
  nlohmann::json s;
  s["k"] = c.k;
  s["iters"] = c.iters;
  s["trials"] = c.trials;
  s["tol"] = c.tol;
  s["seed"] = c.seed;
  s["seed_block"] = c.seed_block == SeedBlock::reported ? "reported" : "held_out";
  s["selection"] = "final mean streak, then final subspace distance, then smaller alpha";
  for (const auto& [rule, a] : report.best_alpha) s["best_alpha"][rule] = a;
  for (const auto& r : report.aggregate) {
    nlohmann::json& arm = s["final"][to_string(r.rule)][alpha_tag(r.alpha)];
    if (!arm.contains("iter") || arm["iter"].get<std::int64_t>() < r.iteration) {
      arm["iter"] = r.iteration;
      arm["streak_mean"] = r.streak_mean;
      arm["streak_stderr"] = r.streak_stderr;
      arm["subspace_mean"] = r.subspace_mean;
      arm["subspace_stderr"] = r.subspace_stderr;
    }
  }
  std::ofstream(fs::path(c.out_dir) / "summary.json") << s.dump(2) << '\n';
  return report;
}

void write_scree_csv(std::ostream& os, const MatrixXd& v_hat, const GramOperator<double>& op) {
  if (v_hat.rows() != op.dim())
    throw Error(ErrorCode::invalid_dimension, "scree: checkpoint dimension does not match the data");
  const auto s = rayleigh_quotients(v_hat, op);
  os << "component,rayleigh,utility,penalty,penalty_ratio\n";
  os.precision(17);
  for (Index i = 0; i < v_hat.cols(); ++i)
    os << (i + 1) << ',' << s.rayleigh(i) << ',' << s.utility(i) << ',' << s.penalty(i) << ',' << s.ratio(i)
       << '\n';
}

GeneratedData generate_data(const SpectrumSpec& spec, bool rotate, std::uint64_t seed, GenMode mode,
                            Index samples) {
  auto p = synthetic_matrix(spec, rotate, seed);
  const MatrixXd root = p.truth.lambda.cwiseSqrt().asDiagonal() * p.truth.v.transpose();
  if (mode == GenMode::exact) return GeneratedData{root, std::move(p.truth)};
  if (samples < 1) throw Error(ErrorCode::invalid_argument, "generate_data: samples must be >= 1");
  std::mt19937_64 rng(derive_seed(seed, 0x9a55));
  std::normal_distribution<double> normal;
  MatrixXd z(samples, spec.d);
  for (Index r = 0; r < samples; ++r)
    for (Index j = 0; j < spec.d; ++j) z(r, j) = normal(rng);
  return GeneratedData{z * root / std::sqrt(static_cast<double>(samples)), std::move(p.truth)};
}

}  // namespace eigengame
