#pragma once

#include "eigengame/baselines.hpp"
#include "eigengame/common.hpp"
#include "eigengame/data_source.hpp"
#include "eigengame/gram.hpp"
#include "eigengame/linalg.hpp"
#include "eigengame/metrics.hpp"

#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace eigengame {

enum class SeedBlock {
  /// Trials reported in results.
  reported,
  /// Disjoint seeds for choosing the learning rate.
  held_out,
};

struct ExperimentConfig {
  /// Synthetic problem; ignored when `dataset` is set.
  SpectrumSpec spectrum;
  bool rotate = false;
  std::optional<std::string> dataset;
  bool centered = false;
  Index k = 10;
  std::vector<UpdateRule> rules{UpdateRule::eigengame_r};
  std::vector<double> alphas{1e-3};
  /// 0 = full batch.
  Index batch_size = 0;
  /// Gaussian rows drawn for synthetic minibatch streams (0 = max(1000, 20 d)).
  Index samples = 0;
  std::int64_t iters = 1000;
  int trials = 1;
  std::uint64_t seed = 0;
  SeedBlock seed_block = SeedBlock::reported;
  double tol = std::numbers::pi / 8;
  std::int64_t record_every = 100;
  std::string out_dir = "out";
  /// Arms run concurrently on this many threads (0 = hardware concurrency).
  int threads = 0;
  bool gha_normalize = false;
  HebbOptions hebb;
  /// Exclude bubble indices from the streak.
  bool exclude_bubble = true;
};

void validate(const ExperimentConfig& c);

/// Applies `key = value` to the config; throws ParseError(field 2) on a bad
/// value and ParseError(field 1) on an unknown key.
void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value,
                      std::size_t line = 0);

/// Flat `key = value` text ('#' starts a comment), or a JSON object when the
/// first non-blank character is '{'.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Seed of trial `trial` in the given block.
std::uint64_t trial_seed(std::uint64_t base, SeedBlock block, int trial);

struct ArmResult {
  UpdateRule rule = UpdateRule::eigengame_r;
  double alpha = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::vector<MetricsRecord> records;
  MatrixXd v_hat;
};

struct AggregateRow {
  UpdateRule rule = UpdateRule::eigengame_r;
  double alpha = 0;
  std::int64_t iteration = 0;
  int trials = 0;
  double streak_mean = 0;
  double streak_stderr = 0;
  double subspace_mean = 0;
  double subspace_stderr = 0;
};

struct ExperimentReport {
  std::vector<ArmResult> arms;
  std::vector<AggregateRow> aggregate;
  /// Best step size per rule name.
  std::map<std::string, double> best_alpha;
};

/// The problem an experiment runs on, resolved from its config.
struct ResolvedProblem {
  GramOperator<double> full;
  GroundTruth<double> truth;
  /// Set when batches are streamed.
  std::optional<DataSource> data;
  std::vector<bool> excluded;
};

ResolvedProblem resolve_problem(const ExperimentConfig& c, std::uint64_t data_seed);

ArmResult run_arm(const ExperimentConfig& c, UpdateRule rule, double alpha, int trial);

/// Means and standard errors over trials per (rule, alpha, iteration).
std::vector<AggregateRow> aggregate(const std::vector<ArmResult>& arms);

/// Best alpha per rule: highest final mean streak, then lowest final subspace
/// distance, then the smaller alpha.
std::map<std::string, double> select_alpha(const std::vector<AggregateRow>& rows);

/// Runs every (rule, alpha, trial) arm and writes arm CSVs, aggregate.csv and
/// summary.json into out_dir.
ExperimentReport run_experiment(const ExperimentConfig& c);

std::string arm_filename(UpdateRule rule, double alpha, int trial);
void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows);

/// `component,rayleigh,utility,penalty,penalty_ratio`.
void write_scree_csv(std::ostream& os, const MatrixXd& v_hat, const GramOperator<double>& op);

enum class GenMode {
  /// d x d rows with X^T X = M exactly.
  exact,
  /// n Gaussian samples with covariance M.
  gaussian,
};

/// Sample matrix for a synthetic spectrum plus its ground truth.
struct GeneratedData {
  MatrixXd x;
  GroundTruth<double> truth;
};

GeneratedData generate_data(const SpectrumSpec& spec, bool rotate, std::uint64_t seed,
                            GenMode mode = GenMode::exact, Index samples = 0);

}  // namespace eigengame
