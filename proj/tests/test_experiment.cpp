#include "eigengame/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace eigengame;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir(const std::string& name) {
  const char* env = std::getenv("EG_TMP");
  fs::path p = env ? fs::path(env) : fs::temp_directory_path() / "eg_tests";
  p /= "experiment";
  p /= name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.spectrum.d = 8;
  c.spectrum.lambda_max = 8;
  c.k = 3;
  c.iters = 200;
  c.record_every = 50;
  c.out_dir = out.string();
  c.threads = 4;
  return c;
}

}  // namespace

TEST(Config, FlatText) {
  const auto c = parse_config(
      "# sweep\n"
      "spectrum = bubble\n"
      "d = 30\n"
      "bubble = 5-9\n"
      "k = 12\n"
      "rules = eigengame-r, oja\n"
      "alphas = 1e-3, 1e-4   # two rates\n"
      "trials = 3\n"
      "seed_block = held_out\n");
  EXPECT_EQ(c.spectrum.kind, SpectrumKind::bubble);
  EXPECT_EQ(c.spectrum.d, 30);
  EXPECT_EQ(c.spectrum.bubble_range->first, 5);
  EXPECT_EQ(c.spectrum.bubble_range->second, 9);
  EXPECT_EQ(c.k, 12);
  EXPECT_EQ(c.rules, (std::vector<UpdateRule>{UpdateRule::eigengame_r, UpdateRule::oja}));
  EXPECT_EQ(c.alphas, (std::vector<double>{1e-3, 1e-4}));
  EXPECT_EQ(c.trials, 3);
  EXPECT_EQ(c.seed_block, SeedBlock::held_out);
}

TEST(Config, Json) {
  const auto c = parse_config(R"({"k": 4, "rules": ["gha", "krasulina"], "alphas": [0.1, 0.01], "rotate": true})");
  EXPECT_EQ(c.k, 4);
  EXPECT_EQ(c.rules, (std::vector<UpdateRule>{UpdateRule::gha, UpdateRule::krasulina}));
  EXPECT_EQ(c.alphas, (std::vector<double>{0.1, 0.01}));
  EXPECT_TRUE(c.rotate);
}

TEST(Config, ErrorsCarryLineAndField) {
  try {
    parse_config("k = 3\nalpha = fast\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.column(), 2u);
  }
  try {
    parse_config("k = 3\n\nlearning_rate = 1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3u);
    EXPECT_EQ(e.column(), 1u);
  }
  EXPECT_THROW(parse_config("rule = sanger\n"), ParseError);
  EXPECT_THROW(parse_config("{\"k\": }"), ParseError);
}

TEST(Config, Validation) {
  ExperimentConfig c;
  c.k = 60;
  EXPECT_THROW(validate(c), Error);
  c.k = 5;
  c.alphas.clear();
  EXPECT_THROW(validate(c), Error);
}

TEST(Seeds, BlocksDisjoint) {
  std::set<std::uint64_t> reported, held;
  for (int t = 0; t < 100; ++t) {
    reported.insert(trial_seed(7, SeedBlock::reported, t));
    held.insert(trial_seed(7, SeedBlock::held_out, t));
  }
  EXPECT_EQ(reported.size(), 100u);
  for (auto s : held) EXPECT_EQ(reported.count(s), 0u);
}

TEST(Experiment, SingleTrialHasZeroStderr) {
  auto c = small_config(tmp_dir("single"));
  const auto rep = run_experiment(c);
  ASSERT_FALSE(rep.aggregate.empty());
  for (const auto& r : rep.aggregate) {
    EXPECT_EQ(r.trials, 1);
    EXPECT_EQ(r.streak_stderr, 0.0);
    EXPECT_EQ(r.subspace_stderr, 0.0);
  }
}

TEST(Experiment, SweepWritesEveryArm) {
  const auto out = tmp_dir("sweep");
  auto c = small_config(out);
  c.rules = {UpdateRule::eigengame_r, UpdateRule::oja, UpdateRule::gha, UpdateRule::krasulina};
  c.alphas = {1e-1, 3e-2, 1e-2, 3e-3};
  c.trials = 2;
  const auto rep = run_experiment(c);
  EXPECT_EQ(rep.arms.size(), 32u);
  int arm_files = 0;
  for (const auto& e : fs::directory_iterator(out))
    if (e.path().filename().string().rfind("arm_", 0) == 0) ++arm_files;
  EXPECT_EQ(arm_files, 32);
  EXPECT_TRUE(fs::exists(out / "aggregate.csv"));
  EXPECT_TRUE(fs::exists(out / "summary.json"));
  EXPECT_EQ(rep.best_alpha.size(), 4u);
  const auto rows = read_csv(out / arm_filename(UpdateRule::oja, 1e-2, 1));
  EXPECT_EQ(rows.front()[0], "iter");
  EXPECT_EQ(rows.size(), 1u + 5u);
}

TEST(Experiment, AggregateRecomputableFromArmFiles) {
  const auto out = tmp_dir("recompute");
  auto c = small_config(out);
  c.rules = {UpdateRule::eigengame_r, UpdateRule::oja};
  c.alphas = {5e-2, 1e-2};
  c.trials = 3;
  run_experiment(c);
  std::map<std::string, std::vector<double>> streaks, dists;
  for (UpdateRule r : c.rules)
    for (double a : c.alphas)
      for (int t = 0; t < c.trials; ++t) {
        const auto rows = read_csv(out / arm_filename(r, a, t));
        for (std::size_t i = 1; i < rows.size(); ++i) {
          std::ostringstream key;
          key << to_string(r) << '|' << a << '|' << rows[i][0];
          streaks[key.str()].push_back(std::stod(rows[i][2]));
          dists[key.str()].push_back(std::stod(rows[i][3]));
        }
      }
  auto stats = [](const std::vector<double>& x) {
    double m = 0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double ss = 0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::make_pair(m, std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size())));
  };
  const auto agg = read_csv(out / "aggregate.csv");
  ASSERT_EQ(agg.size(), 1u + streaks.size());
  for (std::size_t i = 1; i < agg.size(); ++i) {
    std::ostringstream key;
    key << agg[i][0] << '|' << std::stod(agg[i][1]) << '|' << agg[i][2];
    ASSERT_TRUE(streaks.count(key.str())) << key.str();
    const auto [sm, se] = stats(streaks[key.str()]);
    const auto [dm, de] = stats(dists[key.str()]);
    EXPECT_NEAR(std::stod(agg[i][4]), sm, 1e-12);
    EXPECT_NEAR(std::stod(agg[i][5]), se, 1e-12);
    EXPECT_NEAR(std::stod(agg[i][6]), dm, 1e-12);
    EXPECT_NEAR(std::stod(agg[i][7]), de, 1e-12);
  }
}

TEST(Experiment, RerunIsIdenticalExceptWallTime) {
  auto run_into = [](const std::string& name) {
    const auto out = tmp_dir(name);
    auto c = small_config(out);
    c.rules = {UpdateRule::eigengame, UpdateRule::hebb_deflation, UpdateRule::krasulina};
    c.alphas = {2e-2};
    c.trials = 2;
    c.batch_size = 4;
    run_experiment(c);
    return out;
  };
  const auto a = run_into("rerun_a"), b = run_into("rerun_b");
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const auto name = e.path().filename();
    if (name.extension() != ".csv") {
      std::ifstream fa(e.path()), fb(b / name);
      std::stringstream sa, sb;
      sa << fa.rdbuf();
      sb << fb.rdbuf();
      EXPECT_EQ(sa.str(), sb.str()) << name;
      continue;
    }
    auto ra = read_csv(e.path()), rb = read_csv(b / name);
    ASSERT_EQ(ra.size(), rb.size()) << name;
    const bool has_wall = ra.front().size() > 1 && ra.front()[1] == "wall_ms";
    for (std::size_t i = 0; i < ra.size(); ++i) {
      if (has_wall && i > 0) ra[i][1] = rb[i][1] = "";
      EXPECT_EQ(ra[i], rb[i]) << name << " row " << i;
    }
    ++compared;
  }
  EXPECT_EQ(compared, 7u);
}

TEST(Experiment, AlphaSelection) {
  std::vector<AggregateRow> rows;
  auto add = [&](double alpha, std::int64_t it, double streak, double dist) {
    AggregateRow r;
    r.rule = UpdateRule::oja;
    r.alpha = alpha;
    r.iteration = it;
    r.streak_mean = streak;
    r.subspace_mean = dist;
    rows.push_back(r);
  };
  add(1e-2, 100, 9, 0.5);
  add(1e-2, 200, 3, 0.5);
  add(1e-3, 200, 5, 0.4);
  add(1e-4, 200, 5, 0.2);
  add(1e-5, 200, 5, 0.2);
  EXPECT_EQ(select_alpha(rows).at("oja"), 1e-5);
}

TEST(Scree, ExactEigenvectors) {
  const VectorXd lam = VectorXd::LinSpaced(4, 4, 1);
  const auto op = GramOperator<double>::from_matrix(MatrixXd(lam.asDiagonal()));
  std::ostringstream os;
  write_scree_csv(os, MatrixXd::Identity(4, 3), op);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "component,rayleigh,utility,penalty,penalty_ratio");
  for (int i = 0; i < 3; ++i) {
    std::getline(in, line);
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    EXPECT_EQ(v[1], lam(i));
    EXPECT_EQ(v[2], v[1]);
    EXPECT_EQ(v[3], 0.0);
  }
  try {
    write_scree_csv(os, MatrixXd::Identity(5, 2), op);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_dimension);
  }
}

TEST(GenData, ExactGramMatchesSpectrum) {
  SpectrumSpec spec;
  spec.d = 6;
  spec.lambda_max = 6;
  const auto g = generate_data(spec, true, 4);
  const MatrixXd gram = g.x.transpose() * g.x;
  EXPECT_LT((gram - g.truth.v * g.truth.lambda.asDiagonal() * g.truth.v.transpose()).norm(), 1e-12);
  EXPECT_LT((dense_eigen(gram).lambda - g.truth.lambda).norm(), 1e-12);
}

TEST(GenData, GaussianCovarianceApproaches) {
  SpectrumSpec spec;
  spec.d = 4;
  spec.lambda_max = 4;
  const auto g = generate_data(spec, false, 2, GenMode::gaussian, 200000);
  EXPECT_EQ(g.x.rows(), 200000);
  const MatrixXd gram = g.x.transpose() * g.x;
  EXPECT_LT((gram - MatrixXd(g.truth.lambda.asDiagonal())).cwiseAbs().maxCoeff(), 0.1);
}

TEST(Experiment, DatasetTruthFromDenseSolve) {
  const auto out = tmp_dir("dataset");
  SpectrumSpec spec;
  spec.d = 6;
  spec.lambda_max = 6;
  const auto g = generate_data(spec, true, 1);
  write_matrix_csv((out / "x.csv").string(), g.x);
  auto c = small_config(out / "run");
  c.dataset = (out / "x.csv").string();
  c.rules = {UpdateRule::oja};
  c.alphas = {0.05};
  c.iters = 2000;
  const auto rep = run_experiment(c);
  EXPECT_EQ(rep.arms[0].records.back().streak, 3);
  c.dataset = (out / "missing.csv").string();
  EXPECT_THROW(run_experiment(c), Error);
}
