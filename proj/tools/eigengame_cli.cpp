// eigengame: command line entry point.
//
//   eigengame run     --config exp.cfg --rule eigengame,oja --alpha 1e-3,1e-4 --out out/
//   eigengame theory  --spectrum linear --d 3 --lambda-max 3 --lambda-min 1 --out out/
//   eigengame scree   --checkpoint out/checkpoint_eigengame-r.bin --config exp.cfg
//   eigengame gen-data --d 20 --rotate --out data/

#include "eigengame/analysis.hpp"
#include "eigengame/checkpoint.hpp"
#include "eigengame/experiment.hpp"
#include "eigengame/theory_suite.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace eg = eigengame;
namespace fs = std::filesystem;

namespace {

struct SpectrumArgs {
  std::string kind = "linear";
  eg::Index d = 50;
  double lambda_max = 1000;
  double lambda_min = 1;
  std::string bubble;

  void add(CLI::App* app) {
    app->add_option("--spectrum", kind, "linear | exponential | bubble")->capture_default_str();
    app->add_option("--d", d, "dimension")->capture_default_str();
    app->add_option("--lambda-max", lambda_max)->capture_default_str();
    app->add_option("--lambda-min", lambda_min)->capture_default_str();
    app->add_option("--bubble", bubble, "1-based index range, e.g. 10-19");
  }

  eg::SpectrumSpec spec() const {
    eg::ExperimentConfig c;
    eg::set_config_value(c, "spectrum", kind);
    c.spectrum.d = d;
    c.spectrum.lambda_max = lambda_max;
    c.spectrum.lambda_min = lambda_min;
    if (!bubble.empty()) eg::set_config_value(c, "bubble", bubble);
    return c.spectrum;
  }
};

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EigenGame: top-k PCA as a k-player game"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run an experiment sweep (rule x alpha x trial)");
  std::string config_path;
  std::vector<std::string> rules, alphas, sets;
  eg::Index k = 0, batch = -1;
  std::int64_t iters = -1;
  int trials = 0;
  std::int64_t seed = -1;
  double tol = 0;
  std::string out;
  bool centered = false;
  run->add_option("--config", config_path, "key = value or JSON config file");
  run->add_option("--k", k);
  run->add_option("--rule", rules, "eigengame, eigengame-r, oja, gha, hebb-deflation, krasulina")->delimiter(',');
  run->add_option("--alpha", alphas, "step size(s)")->delimiter(',');
  run->add_option("--batch", batch, "minibatch size (0 = full batch)");
  run->add_option("--iters", iters);
  run->add_option("--trials", trials);
  run->add_option("--seed", seed);
  run->add_option("--tol-rad", tol, "streak tolerance in radians");
  run->add_option("--out", out, "output directory");
  run->add_flag("--centered", centered, "mean-center the dataset");
  run->add_option("--set", sets, "extra key=value config override (repeatable)");

  // theory
  auto* theory = app.add_subcommand("theory", "run the analysis checks and write theory.json");
  SpectrumArgs th_spec;
  th_spec.d = 3;
  th_spec.lambda_max = 3;
  th_spec.lambda_min = 1;
  th_spec.add(theory);
  std::vector<double> th_lambda;
  std::uint64_t th_seed = 0;
  std::string th_out = "out";
  double kappa = 10;
  theory->add_option("--lambda", th_lambda, "explicit descending eigenvalues")->delimiter(',');
  theory->add_option("--seed", th_seed)->capture_default_str();
  theory->add_option("--out", th_out)->capture_default_str();
  theory->add_option("--kappa", kappa, "condition number for the example sweep")->capture_default_str();

  // scree
  auto* scree = app.add_subcommand("scree", "Rayleigh quotients and penalties of a checkpoint");
  std::string ckpt, sc_config, sc_out;
  std::vector<std::string> sc_sets;
  bool sc_centered = false;
  scree->add_option("--checkpoint", ckpt)->required();
  scree->add_option("--config", sc_config, "problem definition (dataset or spectrum)");
  scree->add_option("--set", sc_sets, "key=value override (repeatable)");
  scree->add_flag("--centered", sc_centered);
  scree->add_option("--out", sc_out, "CSV path (default stdout)");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic sample matrix and its ground truth");
  SpectrumArgs gen_spec;
  gen_spec.add(gen);
  bool rotate = false;
  std::string mode = "exact", format = "csv", gen_out = "data";
  eg::Index samples = 1000;
  std::uint64_t gen_seed = 0;
  gen->add_flag("--rotate", rotate, "random orthogonal eigenbasis");
  gen->add_option("--mode", mode, "exact (X^T X = M) | gaussian")->capture_default_str();
  gen->add_option("--samples", samples, "rows for gaussian mode")->capture_default_str();
  gen->add_option("--format", format, "csv | binary")->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--out", gen_out)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      eg::ExperimentConfig c = config_path.empty() ? eg::ExperimentConfig{} : eg::load_config(config_path);
      for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw eg::Error(eg::ErrorCode::invalid_argument, "--set expects key=value");
        eg::set_config_value(c, s.substr(0, eq), s.substr(eq + 1));
      }
      if (k > 0) c.k = k;
      if (!rules.empty()) eg::set_config_value(c, "rules", join(rules));
      if (!alphas.empty()) eg::set_config_value(c, "alphas", join(alphas));
      if (batch >= 0) c.batch_size = batch;
      if (iters >= 0) c.iters = iters;
      if (trials > 0) c.trials = trials;
      if (seed >= 0) c.seed = static_cast<std::uint64_t>(seed);
      if (tol > 0) c.tol = tol;
      if (!out.empty()) c.out_dir = out;
      if (centered) c.centered = true;
      const auto rep = eg::run_experiment(c);
      for (const auto& [rule, a] : rep.best_alpha) {
        for (const auto& arm : rep.arms)
          if (arm.trial == 0 && arm.alpha == a && rule == eg::to_string(arm.rule)) {
            eg::Checkpoint cp{arm.v_hat, c.iters, a, arm.rule == eg::UpdateRule::eigengame ? "plain" : "riemannian",
                              arm.seed};
            eg::save_checkpoint((fs::path(c.out_dir) / ("checkpoint_" + rule + ".bin")).string(), cp);
          }
        std::cout << rule << ": best alpha " << a << '\n';
      }
      std::cout << "wrote " << rep.arms.size() << " arm files to " << c.out_dir << '\n';
    } else if (theory->parsed()) {
      const eg::VectorXd lambda = th_lambda.empty()
                                      ? eg::make_spectrum<double>(th_spec.spec())
                                      : eg::VectorXd(Eigen::Map<const eg::VectorXd>(
                                            th_lambda.data(), static_cast<eg::Index>(th_lambda.size())));
      const auto rep = eg::theory_suite(lambda, th_seed);
      fs::create_directories(th_out);
      std::ofstream js(fs::path(th_out) / "theory.json");
      eg::write_theory_json(js, rep);
      std::ofstream sweep(fs::path(th_out) / "example_sweep.csv");
      eg::write_example_sweep(sweep, kappa);
      for (const auto& ch : rep.checks)
        std::cout << ch.name << ": " << eg::to_string(ch.status) << " (" << ch.measured << " vs " << ch.threshold
                  << ")\n";
      return rep.passed() ? 0 : 1;
    } else if (scree->parsed()) {
      eg::ExperimentConfig c = sc_config.empty() ? eg::ExperimentConfig{} : eg::load_config(sc_config);
      for (const auto& s : sc_sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw eg::Error(eg::ErrorCode::invalid_argument, "--set expects key=value");
        eg::set_config_value(c, s.substr(0, eq), s.substr(eq + 1));
      }
      if (sc_centered) c.centered = true;
      c.batch_size = 0;
      const auto cp = eg::load_checkpoint(ckpt);
      c.k = std::min<eg::Index>(c.k, cp.v_hat.cols());
      const auto pr = eg::resolve_problem(c, 0);
      if (sc_out.empty()) {
        eg::write_scree_csv(std::cout, cp.v_hat, pr.full);
      } else {
        std::ofstream os(sc_out);
        eg::write_scree_csv(os, cp.v_hat, pr.full);
      }
    } else if (gen->parsed()) {
      const auto gm = mode == "gaussian" ? eg::GenMode::gaussian : eg::GenMode::exact;
      if (mode != "gaussian" && mode != "exact")
        throw eg::Error(eg::ErrorCode::invalid_argument, "--mode must be exact or gaussian");
      const auto data = eg::generate_data(gen_spec.spec(), rotate, gen_seed, gm, samples);
      fs::create_directories(gen_out);
      const fs::path dir(gen_out);
      if (format == "binary") eg::write_matrix_binary((dir / "data.bin").string(), data.x);
      else eg::write_matrix_csv((dir / "data.csv").string(), data.x);
      eg::write_matrix_csv((dir / "truth_lambda.csv").string(), eg::MatrixXd(data.truth.lambda));
      eg::write_matrix_csv((dir / "truth_v.csv").string(), data.truth.v);
      std::cout << "wrote " << data.x.rows() << " x " << data.x.cols() << " samples to " << gen_out << '\n';
    }
  } catch (const eg::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const eg::Error& e) {
    std::cerr << "error (" << eg::to_string(e.code()) << "): " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
