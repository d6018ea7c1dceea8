// netmarl command-line front end: run, sweep-baseline, estimate-decay, validate.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "netmarl/decay.hpp"
#include "netmarl/harness/config.hpp"
#include "netmarl/harness/experiment.hpp"
#include "netmarl/harness/validate.hpp"

namespace fs = std::filesystem;
using namespace netmarl;
using namespace netmarl::harness;

namespace {

int cmd_run(const std::string& config, const std::optional<std::uint64_t>& seed, const std::optional<std::string>& out,
            const std::optional<std::size_t>& replicates) {
  ExperimentConfig cfg = load_config(config);
  if (seed) cfg.seed = *seed;
  if (replicates) cfg.replicates = *replicates;
  const fs::path dir = resolve_out_dir(cfg, out);
  const auto res = run_experiment(cfg, dir);
  for (const auto& rep : res.replicates) {
    std::printf("%s trailing mean return %s\n", rep.run_id.c_str(), format_double(rep.trailing_mean).c_str());
    for (const auto& w : rep.warnings) std::fprintf(stderr, "warning (%s): %s\n", rep.run_id.c_str(), w.c_str());
  }
  if (res.baseline)
    std::printf("aloha best p_empty %s mean return %s\n", format_double(res.baseline->best_point().p_empty).c_str(),
                format_double(res.baseline->best_point().mean).c_str());
  std::printf("artifacts in %s\n", dir.string().c_str());
  return 0;
}

int cmd_sweep(const std::string& config, const std::optional<std::uint64_t>& seed, const std::optional<std::string>& out,
              const std::vector<double>& grid, const std::optional<std::size_t>& rollouts) {
  ExperimentConfig cfg = load_config(config);
  if (seed) cfg.seed = *seed;
  if (!grid.empty()) cfg.baseline_grid = grid;
  if (rollouts) cfg.baseline_rollouts = *rollouts;
  if (cfg.baseline_grid.empty())
    for (int k = 0; k <= 10; ++k) cfg.baseline_grid.push_back(k / 10.0);
  const Stream root(cfg.seed);
  const EnvInstance env = build_env(cfg.env, root.split(stream_tag::kEnv));
  const auto rec = sweep_baseline(env, cfg.baseline_grid, cfg.baseline_rollouts, root.split(stream_tag::kEval));
  std::ostringstream csv;
  csv << "p_empty,mean_return,stderr,best\n";
  for (std::size_t k = 0; k < rec.points.size(); ++k) {
    const auto& p = rec.points[k];
    csv << format_double(p.p_empty) << ',' << format_double(p.mean) << ',' << format_double(p.stderr_) << ','
        << (k == rec.best ? 1 : 0) << '\n';
  }
  if (out || std::getenv("NETMARL_OUT_DIR")) {
    const fs::path dir = resolve_out_dir(cfg, out);
    fs::create_directories(dir);
    harness::detail::write_text(dir / "baseline.csv", csv.str());
  }
  std::cout << csv.str();
  return 0;
}

int cmd_decay(const std::optional<std::string>& config, const std::string& env_kind, int h, int w, int agent,
              int kappa_max, std::size_t samples, std::uint64_t seed, const std::optional<std::string>& out) {
  ExperimentConfig cfg;
  if (config) {
    cfg = load_config(*config);
  } else {
    cfg.env.kind = env_kind;
    cfg.env.h = h;
    cfg.env.w = w;
    if (env_kind == "sis") cfg.sac.beta = 1;
  }
  const EnvInstance env = build_env(cfg.env, Stream(cfg.seed).split(stream_tag::kEnv));
  const AgentGraph& g = env.mdp->graph();
  const LinkDistribution& dist = env.mdp->link_distribution();
  const double gamma = env.mdp->gamma();
  const int beta = cfg.sac.beta;
  if (agent < 0 || agent >= static_cast<int>(g.size())) throw std::invalid_argument("estimate-decay: agent out of range");
  const auto bounds = applicable_bounds(g, dist, gamma, beta);
  std::ostringstream csv;
  csv << "kappa,mc_mean,mc_stderr,exp_bound,near_exp_bound\n";
  const Stream root = Stream(seed).split(stream_tag::kLinks);
  for (int kappa = 0; kappa <= kappa_max; ++kappa) {
    const auto xs = sample_spread_times(g, dist, beta, agent, kappa, default_spread_horizon(kappa, gamma), samples,
                                        root.split(static_cast<std::uint64_t>(kappa)));
    const auto e = estimate_mu(xs, gamma);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    // The near-exponential bound at kappa + 1 covers X(kappa).
    csv << kappa << ',' << format_double(e.mean_gamma_x) << ',' << format_double(e.stderr_gamma_x) << ','
        << format_double(bounds.exponential ? (*bounds.exponential)(kappa) : nan) << ','
        << format_double(bounds.near_exponential ? (*bounds.near_exponential)(kappa + 1.0) : nan) << '\n';
  }
  if (out) {
    fs::create_directories(fs::path(*out).parent_path().empty() ? fs::path(".") : fs::path(*out).parent_path());
    harness::detail::write_text(*out, csv.str());
  }
  std::cout << csv.str();
  return 0;
}

int cmd_validate(const std::string& suite, const std::optional<std::string>& out, const std::string& configs) {
  ValidateOptions opt;
  if (out) opt.out_dir = *out;
  else if (const char* v = std::getenv("NETMARL_OUT_DIR"); v && *v) opt.out_dir = v;
  opt.acceptance.config_dir = configs;
  fs::create_directories(opt.out_dir);
  const auto rep = validate(suite, opt);
  for (const auto& c : rep.checks)
    std::printf("%-5s %-12s %-45s measured=%.6g threshold=%.6g %s\n", c.passed ? "PASS" : "FAIL", c.suite.c_str(),
                c.name.c_str(), c.measured, c.threshold, c.detail.c_str());
  harness::detail::write_text(opt.out_dir / "validation_report.json", rep.to_json().dump(2) + "\n");
  std::printf("%zu checks, %zu failed; report in %s\n", rep.checks.size(), rep.failures(),
              (opt.out_dir / "validation_report.json").string().c_str());
  return rep.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"netmarl: scalable actor-critic for networked agents"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> replicates, rollouts;
  auto* run = app.add_subcommand("run", "train SAC (and the baseline sweep, if configured) and write artifacts");
  run->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out", out, "output directory (overrides NETMARL_OUT_DIR and the config)");
  run->add_option("--replicates", replicates, "override the replicate count");

  std::vector<double> grid;
  auto* sweep = app.add_subcommand("sweep-baseline", "evaluate localized ALOHA over a p_empty grid");
  sweep->add_option("--config", config, "experiment config (JSON, wireless)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--seed", seed, "override the config seed");
  sweep->add_option("--out", out, "directory for baseline.csv");
  sweep->add_option("--grid", grid, "p_empty values (default: config grid, else 0, 0.1, ..., 1)")->delimiter(',');
  sweep->add_option("--rollouts", rollouts, "evaluation rollouts per grid point");

  std::optional<std::string> decay_config, decay_out;
  std::string env_kind = "wireless";
  int h = 5, w = 5, agent = 0, kappa_max = 5;
  std::size_t samples = 10000;
  std::uint64_t decay_seed = 0;
  auto* decay = app.add_subcommand("estimate-decay", "Monte-Carlo E[gamma^X(kappa)] against the closed-form bounds");
  decay->add_option("--config", decay_config, "take graph, links, gamma and beta from a config");
  decay->add_option("--env", env_kind, "environment when no config is given")->check(CLI::IsMember({"wireless", "sis"}));
  decay->add_option("--grid-h", h, "grid height")->check(CLI::PositiveNumber);
  decay->add_option("--grid-w", w, "grid width")->check(CLI::PositiveNumber);
  decay->add_option("--agent", agent, "agent index");
  decay->add_option("--kappa-max", kappa_max, "largest kappa")->check(CLI::NonNegativeNumber);
  decay->add_option("--samples", samples, "spread samples per kappa")->check(CLI::PositiveNumber);
  decay->add_option("--seed", decay_seed, "sampling seed");
  decay->add_option("--out", decay_out, "CSV output file (also printed)");

  std::string suite, configs = "configs";
  std::optional<std::string> validate_out;
  auto* val = app.add_subcommand("validate", "run invariant checks and acceptance fixtures");
  val->add_option("--suite", suite, "netmdp, decay, stochapprox, tdq, sac, envs, harness or acceptance (default: all)");
  val->add_option("--out", validate_out, "scratch and report directory");
  val->add_option("--configs", configs, "directory holding wireless_5x5.json (acceptance suite)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, seed, out, replicates);
    if (*sweep) return cmd_sweep(config, seed, out, grid, rollouts);
    if (*decay) return cmd_decay(decay_config, env_kind, h, w, agent, kappa_max, samples, decay_seed, decay_out);
    if (*val) return cmd_validate(suite, validate_out, configs);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
