#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "netmarl/harness/experiment.hpp"
#include "netmarl/harness/validate.hpp"

using namespace netmarl;
using namespace netmarl::harness;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("netmarl_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* kTabular = R"({
  "env": {"kind": "tabular", "gamma": 0.7, "graph": "path", "agents": 3,
          "local_states": 2, "local_actions": 2,
          "links": {"kind": "static_local", "alpha1": 1, "alpha2": 1}},
  "sac": {"kappa": 1, "beta": 0, "T": 200, "M": 4, "H": 2, "t0": 8, "eta": 1.0},
  "evaluation": {"rollouts": 5, "trailing_window": 2},
  "replicates": 2,
  "seed": 7
})";

// Isolated user with a certain, always-refilled single-slot queue.
EnvInstance lone_user(double gamma) {
  envs::WirelessConfig wc;
  wc.topology.num_aps = 1;
  wc.topology.user_aps = {{0}};
  wc.d = 1;
  wc.q = 1.0;
  wc.gamma = gamma;
  wc.ap_success = {1.0};
  Stream rng(0);
  auto inst = envs::build_wireless(wc, rng);
  EnvInstance env;
  env.kind = "wireless";
  env.mdp = inst.mdp;
  env.wireless = inst.dynamics;
  return env;
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  const auto cfg = parse_config(kTabular);
  EXPECT_EQ(cfg.env.kind, "tabular");
  EXPECT_EQ(cfg.env.agents, 3);
  EXPECT_EQ(cfg.sac.T, 200u);
  EXPECT_EQ(cfg.sac.t0, 8.0);
  EXPECT_EQ(cfg.replicates, 2u);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.eval_rollouts, 5u);
  EXPECT_TRUE(cfg.baseline_grid.empty());

  const auto sis = parse_config(R"({"env": {"kind": "sis"}, "sac": {"H": 3}})");
  EXPECT_EQ(sis.sac.beta, 1);
  EXPECT_EQ(sis.sac.t0, 12.0);
}

TEST(Config, UnknownKeyNamesItsLine) {
  const std::string msg = config_error("{\n  \"env\": {\"kind\": \"sis\"},\n  \"sac\": {\n    \"kapa\": 2\n  }\n}");
  EXPECT_NE(msg.find("cfg.json:4:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("kapa"), std::string::npos) << msg;
}

TEST(Config, WrongTypeNamesItsLine) {
  const std::string msg = config_error("{\n  \"env\": {\"kind\": \"sis\"},\n\n  \"sac\": {\"T\": \"many\"}\n}");
  EXPECT_NE(msg.find("cfg.json:4:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("/sac/T"), std::string::npos) << msg;
}

TEST(Config, MalformedJsonNamesItsLine) {
  const std::string msg = config_error("{\n  \"env\": {\"kind\": \"sis\"},\n  \"sac\": {\"T\": 5,,}\n}");
  EXPECT_NE(msg.find("cfg.json:3:"), std::string::npos) << msg;
}

TEST(Config, RangeErrors) {
  EXPECT_NE(config_error(R"({"env": {"kind": "sis", "gamma": 1.0}})").find("/env/gamma"), std::string::npos);
  EXPECT_NE(config_error(R"({"env": {"kind": "maze"}})").find("/env/kind"), std::string::npos);
  EXPECT_NE(config_error(R"({"env": {"kind": "sis"}, "baseline": {"p_empty_grid": [0.5]}})").find("/baseline"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"env": {"kind": "wireless"}, "baseline": {"p_empty_grid": [0.5, 1.5]}})")
                .find("/baseline/p_empty_grid/1"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"env": {"kind": "sis"}, "sac": {"H": 4, "t0": 1}})").find("/sac/t0"), std::string::npos);
  EXPECT_NE(config_error(R"({"env": {"kind": "sis"}, "sac": {"K2": 0}})").find("/sac/K2"), std::string::npos);
  EXPECT_NE(config_error(R"({"sac": {}})").find("/env"), std::string::npos);
}

TEST(Config, MissingFileIsAConfigError) {
  EXPECT_THROW(load_config("/nonexistent/netmarl.json"), ConfigError);
}

TEST(Baseline, SinglePointGrid) {
  const auto env = lone_user(0.7);
  const auto rec = sweep_baseline(env, {0.3}, 50, Stream(1));
  ASSERT_EQ(rec.points.size(), 1u);
  EXPECT_EQ(rec.best, 0u);
}

TEST(Baseline, LoneUserPrefersAlwaysSending) {
  const double gamma = 0.7;
  const auto env = lone_user(gamma);
  const auto rec = sweep_baseline(env, {1.0, 0.0}, 400, Stream(2));
  EXPECT_EQ(rec.best_point().p_empty, 0.0);
  EXPECT_EQ(rec.points[0].mean, 0.0);

  // Dense solve of the infinite-horizon return, and the closed form under uniform s(0).
  const GlobalModel model(*env.mdp);
  const double exact = exact_return(model, envs::AlohaPolicy(env.wireless, 0.0));
  EXPECT_NEAR(exact, 0.5 * (1.0 + gamma) / (1.0 - gamma), 1e-9);
  // Rollouts are truncated at gamma^H < 1e-3, so allow that tail plus sampling error.
  const double tail = std::pow(gamma, static_cast<double>(eval_horizon(gamma))) / (1.0 - gamma);
  EXPECT_NEAR(rec.best_point().mean, exact, tail + 4.0 * rec.best_point().stderr_ + 1e-12);
}

TEST(Baseline, TiesGoToSmallerPEmpty) {
  const auto env = lone_user(0.7);
  const auto rec = sweep_baseline(env, {1.0, 1.0, 1.0}, 10, Stream(3));
  EXPECT_EQ(rec.best, 0u);
  EXPECT_THROW(sweep_baseline(env, {}, 10, Stream(3)), std::invalid_argument);
}

TEST(Evaluation, HorizonRule) {
  EXPECT_EQ(eval_horizon(0.7), 20u);
  EXPECT_LT(std::pow(0.9, static_cast<double>(eval_horizon(0.9))), 1e-3);
  EXPECT_GE(std::pow(0.9, static_cast<double>(eval_horizon(0.9) - 1)), 1e-3);
}

TEST(Output, FormatDoubleRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678}) EXPECT_EQ(std::stod(format_double(x)), x);
  EXPECT_EQ(format_double(std::nan("")), "nan");
}

TEST(Experiment, ZeroIterationsWritesHeaderAndManifest) {
  auto cfg = parse_config(kTabular);
  cfg.sac.M = 0;
  const auto dir = scratch_dir("m0");
  const auto res = run_experiment(cfg, dir);
  EXPECT_EQ(slurp(dir / "metrics.csv"), std::string(kMetricsHeader) + "\n");
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  for (const auto& rep : res.replicates)
    for (const auto& th : rep.theta)
      for (double v : th) EXPECT_EQ(v, 0.0);
}

TEST(Experiment, RerunIsByteIdentical) {
  const auto cfg = parse_config(kTabular);
  const auto a = scratch_dir("rerun_a"), b = scratch_dir("rerun_b");
  run_experiment(cfg, a);
  run_experiment(cfg, b);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++files;
    EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path().filename();
  }
  EXPECT_EQ(files, 4u);  // metrics, manifest, two checkpoints
}

TEST(Experiment, ThreadedRunMatchesSerial) {
  const auto cfg = parse_config(kTabular);
  const auto a = scratch_dir("serial"), b = scratch_dir("threaded");
  run_experiment(cfg, a);
  setenv("NETMARL_THREADS", "2", 1);
  run_experiment(cfg, b);
  unsetenv("NETMARL_THREADS");
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
}

TEST(Experiment, MetricsRowsAndManifestContents) {
  const auto cfg = parse_config(kTabular);
  const auto dir = scratch_dir("manifest");
  const auto res = run_experiment(cfg, dir);
  ASSERT_TRUE(res.oracle_available);

  std::istringstream csv(slurp(dir / "metrics.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, kMetricsHeader);
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 8) << line;
    EXPECT_EQ(line.find("nan"), std::string::npos) << line;  // oracle columns are filled
  }
  EXPECT_EQ(rows, cfg.replicates * cfg.sac.M);

  const json man = json::parse(slurp(dir / "manifest.json"));
  for (const char* key : {"tool", "version", "seed", "config", "resolved", "sampled_parameters", "evaluation", "oracle",
                          "replicate_results", "artifacts"})
    EXPECT_TRUE(man.contains(key)) << key;
  EXPECT_EQ(man["seed"], 7);
  EXPECT_EQ(man["config"], cfg.source);
  EXPECT_EQ(man["resolved"]["t0"], 8.0);
  EXPECT_EQ(man["oracle"], "exact");
  EXPECT_EQ(man["evaluation"]["horizon"], 20);
  EXPECT_EQ(man["sampled_parameters"]["tables"].size(), 3u);
  EXPECT_EQ(man["replicate_results"].size(), 2u);

  // The trailing mean covers the last two iterations of each replicate.
  const auto& r0 = res.replicates[0];
  EXPECT_NEAR(r0.trailing_mean, 0.5 * (r0.rows[2].it.return_estimate + r0.rows[3].it.return_estimate), 1e-12);
}

TEST(Experiment, CheckpointRoundTrip) {
  const auto cfg = parse_config(kTabular);
  const auto dir = scratch_dir("checkpoint");
  const auto res = run_experiment(cfg, dir);
  const json ck = json::parse(slurp(dir / "checkpoint_r1.json"));
  const auto env = build_env(cfg.env, Stream(cfg.seed).split(stream_tag::kEnv));
  LocalizedPolicy pol(env.mdp->graph(), env.mdp->state_sizes(), env.mdp->action_sizes(), cfg.sac.beta);
  load_checkpoint(ck, pol);
  EXPECT_EQ(pol.parameters(), res.replicates[1].theta);

  LocalizedPolicy wrong_beta(env.mdp->graph(), env.mdp->state_sizes(), env.mdp->action_sizes(), 1);
  EXPECT_THROW(load_checkpoint(ck, wrong_beta), std::invalid_argument);
  json bad = ck;
  bad["version"] = 99;
  EXPECT_THROW(load_checkpoint(bad, pol), std::invalid_argument);
}

TEST(Experiment, OutDirPrecedence) {
  auto cfg = parse_config(kTabular);
  cfg.out_dir = "from_config";
  unsetenv("NETMARL_OUT_DIR");
  EXPECT_EQ(resolve_out_dir(cfg, std::nullopt), "from_config");
  setenv("NETMARL_OUT_DIR", "from_env", 1);
  EXPECT_EQ(resolve_out_dir(cfg, std::nullopt), "from_env");
  EXPECT_EQ(resolve_out_dir(cfg, std::string("from_cli")), "from_cli");
  unsetenv("NETMARL_OUT_DIR");
}

TEST(Experiment, WirelessRunWritesBaseline) {
  const auto cfg = parse_config(R"({
    "env": {"kind": "wireless", "grid": [1, 2], "life_span": 1},
    "sac": {"kappa": 1, "T": 50, "M": 2, "H": 2, "t0": 8, "eta": 1.0},
    "baseline": {"p_empty_grid": [0.0, 0.5, 1.0], "rollouts": 20},
    "evaluation": {"rollouts": 3},
    "seed": 3
  })");
  const auto dir = scratch_dir("wireless");
  const auto res = run_experiment(cfg, dir);
  ASSERT_TRUE(res.baseline.has_value());
  std::istringstream csv(slurp(dir / "baseline.csv"));
  std::string line;
  std::size_t rows = 0, best = 0;
  std::getline(csv, line);
  EXPECT_EQ(line, "p_empty,mean_return,stderr,best");
  while (std::getline(csv, line)) {
    ++rows;
    best += line.back() == '1';
  }
  EXPECT_EQ(rows, 3u);
  EXPECT_EQ(best, 1u);
  const json man = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(man["sampled_parameters"]["ap_success"].size(), 6u);
  EXPECT_EQ(man["baseline"]["points"].size(), 3u);
}

TEST(Validate, CorruptedKernelRowIsNamed) {
  envs::TabularConfig tc{AgentGraph::path(3), {2, 2, 2}, {2, 2, 2}};
  Stream rng(21);
  const auto mdp = envs::random_tabular_mdp(tc, rng);
  auto tables = static_cast<const TableDynamics&>(mdp->dynamics()).tables();
  const auto clean = check_kernel_normalization(mdp->state_sizes(), mdp->action_sizes(), tables);
  EXPECT_TRUE(clean.passed) << clean.detail;

  // Scale row 3 of agent 1's first kernel so it sums to 0.9.
  auto& rows = tables[1].kernel.begin()->second;
  const double s = rows[6] + rows[7];
  rows[6] *= 0.9 / s;
  rows[7] *= 0.9 / s;
  const auto bad = check_kernel_normalization(mdp->state_sizes(), mdp->action_sizes(), tables);
  EXPECT_FALSE(bad.passed);
  EXPECT_NEAR(bad.measured, 0.1, 1e-12);
  EXPECT_NE(bad.detail.find("agent 1"), std::string::npos) << bad.detail;
  EXPECT_NE(bad.detail.find("row 3"), std::string::npos) << bad.detail;
  EXPECT_NE(bad.detail.find("0.9"), std::string::npos) << bad.detail;
}

TEST(Validate, SelectorRunsOnlyThatSuite) {
  ValidateOptions opt;
  opt.out_dir = scratch_dir("validate");
  const auto rep = validate("decay", opt);
  ASSERT_FALSE(rep.checks.empty());
  for (const auto& c : rep.checks) EXPECT_EQ(c.suite, "decay");
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.to_json()["checks"].size(), rep.checks.size());
  EXPECT_THROW(validate("nonesuch", opt), std::invalid_argument);
}

TEST(Validate, EmptySelectorCoversEverySuite) {
  std::vector<std::string> names;
  for (const auto& [name, fn] : suites()) names.push_back(name);
  EXPECT_EQ(names, (std::vector<std::string>{"netmdp", "decay", "stochapprox", "tdq", "sac", "envs", "harness",
                                             "acceptance"}));
}

TEST(Validate, FailuresAreCounted) {
  ValidationReport rep;
  rep.checks.push_back(make_check("x", "a", true, 0, 0));
  rep.checks.push_back(make_check("x", "b", false, 1, 0));
  EXPECT_EQ(rep.failures(), 1u);
  EXPECT_FALSE(rep.ok());
  EXPECT_FALSE(rep.to_json()["passed"].get<bool>());
}
