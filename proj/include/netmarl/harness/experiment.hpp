#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "netmarl/envs/sis.hpp"
#include "netmarl/envs/tabular.hpp"
#include "netmarl/envs/wireless.hpp"
#include "netmarl/harness/config.hpp"
#include "netmarl/oracle.hpp"
#include "netmarl/sac.hpp"

namespace netmarl::harness {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kCheckpointVersion = 1;

struct EnvInstance {
  std::string kind;
  std::shared_ptr<const NetworkedMDP> mdp;
  std::shared_ptr<const envs::WirelessDynamics> wireless;  ///< set for wireless only
  json sampled;                                            ///< every randomly drawn parameter
};

/// Builds the environment; random parameters come from `rng` only.
inline EnvInstance build_env(const EnvSpec& spec, Stream rng) {
  EnvInstance out;
  out.kind = spec.kind;
  if (spec.kind == "wireless") {
    envs::WirelessConfig wc;
    wc.topology = envs::WirelessTopology::grid(spec.h, spec.w, spec.users_per_cell);
    wc.d = spec.life_span;
    wc.q = spec.arrival_prob;
    wc.gamma = spec.gamma;
    wc.ap_success = spec.ap_success;
    auto inst = envs::build_wireless(wc, rng);
    out.mdp = inst.mdp;
    out.wireless = inst.dynamics;
    out.sampled["ap_success"] = inst.ap_success;
    out.sampled["ap_success_given"] = !spec.ap_success.empty();
  } else if (spec.kind == "sis") {
    envs::SpreadConfig sc;
    sc.graph = AgentGraph::grid(static_cast<std::size_t>(spec.h), static_cast<std::size_t>(spec.w));
    sc.gamma = spec.gamma;
    sc.initial_infection = spec.initial_infection;
    sc.params = spec.sis_params;
    auto inst = envs::build_sis(sc, rng);
    out.mdp = inst.mdp;
    json ps = json::array();
    for (const auto& p : inst.params)
      ps.push_back({{"c_s", p.c_s}, {"c_a", p.c_a}, {"p_r", p.p_r}, {"p_h", p.p_h}, {"p_m", p.p_m}, {"p_l", p.p_l}});
    out.sampled["agent_params"] = ps;
    out.sampled["agent_params_given"] = !spec.sis_params.empty();
  } else if (spec.kind == "tabular") {
    const auto n = static_cast<std::size_t>(spec.agents);
    AgentGraph g = spec.graph == "grid" ? AgentGraph::grid(static_cast<std::size_t>(spec.h), static_cast<std::size_t>(spec.w))
                                        : AgentGraph::path(n);
    const std::size_t m = g.size();
    envs::TabularConfig tc{std::move(g), std::vector<int>(m, spec.local_states), std::vector<int>(m, spec.local_actions)};
    tc.links = spec.links == "geometric" ? LinkDistribution::geometric(spec.link_c, spec.link_lambda)
                                         : LinkDistribution::static_local(spec.alpha1, spec.alpha2);
    tc.gamma = spec.gamma;
    out.mdp = envs::random_tabular_mdp(tc, rng);
    const auto& tables = static_cast<const TableDynamics&>(out.mdp->dynamics()).tables();
    json agents = json::array();
    for (const auto& t : tables) {
      json a{{"kernel", json::array()}, {"reward", json::array()}};
      for (const auto& [sig, rows] : t.kernel) a["kernel"].push_back({{"signature", sig}, {"rows", rows}});
      for (const auto& [sig, r] : t.reward) a["reward"].push_back({{"signature", sig}, {"values", r}});
      agents.push_back(std::move(a));
    }
    out.sampled["tables"] = std::move(agents);
  } else {
    throw ConfigError("unknown environment kind '" + spec.kind + "'");
  }
  return out;
}

/// Evaluation rollouts stop once gamma^t < 1e-3.
inline std::size_t eval_horizon(double gamma) {
  if (gamma <= 0.0) return 1;
  return static_cast<std::size_t>(std::ceil(std::log(1e-3) / std::log(gamma)));
}

struct ReturnEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/**
 * Mean of per-agent-averaged discounted returns over fresh rollouts from
 * s(0) ~ pi_0; rollout k uses rng.split(k).
 */
inline ReturnEstimate evaluate_policy(const NetworkedMDP& mdp, const JointPolicy& policy, std::size_t rollouts,
                                      const Stream& rng) {
  const std::size_t n = mdp.num_agents(), horizon = eval_horizon(mdp.gamma());
  const LinkSampler& sampler = mdp.link_sampler();
  ActiveLinkSetPair fixed, drawn;
  if (sampler.deterministic()) {
    Stream unused;
    fixed = sampler.sample(unused);
  }
  std::vector<int> a(n), next(n);
  std::vector<double> r(n);
  StepScratch scratch;
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t k = 0; k < rollouts; ++k) {
    const Stream er = rng.split(k);
    std::vector<int> s = mdp.sample_initial(er.split(stream_tag::kInitial));
    double g = 1.0, ret = 0.0;
    for (std::size_t t = 0; t < horizon; ++t, g *= mdp.gamma()) {
      policy.sample_joint(s, er.split(stream_tag::kAction, t), a);
      const ActiveLinkSetPair* links = &fixed;
      if (!sampler.deterministic()) {
        Stream lr = er.split(stream_tag::kLinks, t);
        drawn = sampler.sample(lr);
        links = &drawn;
      }
      mdp.step(s, a, *links, er.split(stream_tag::kTransition, t), next, r, scratch);
      double m = 0.0;
      for (double x : r) m += x;
      ret += g * m / static_cast<double>(n);
      s.swap(next);
    }
    sum += ret;
    sumsq += ret * ret;
  }
  ReturnEstimate out;
  const double N = static_cast<double>(rollouts);
  out.mean = sum / N;
  out.stderr_ = rollouts > 1 ? std::sqrt(std::max(0.0, sumsq / N - out.mean * out.mean) / (N - 1.0)) : 0.0;
  return out;
}

struct BaselinePoint {
  double p_empty = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct BaselineRecord {
  std::vector<BaselinePoint> points;
  std::size_t best = 0;
  const BaselinePoint& best_point() const { return points.at(best); }
};

/**
 * Evaluates localized ALOHA at every grid point with common random numbers
 * and returns the argmax of the mean return; ties go to the smaller p_empty.
 */
inline BaselineRecord sweep_baseline(const EnvInstance& env, const std::vector<double>& grid, std::size_t rollouts,
                                     const Stream& rng) {
  if (!env.wireless) throw std::invalid_argument("sweep_baseline: the aloha baseline needs a wireless environment");
  if (grid.empty()) throw std::invalid_argument("sweep_baseline: empty grid");
  BaselineRecord rec;
  for (double p : grid) {
    const envs::AlohaPolicy pol(env.wireless, p);
    const auto est = evaluate_policy(*env.mdp, pol, rollouts, rng);
    rec.points.push_back({p, est.mean, est.stderr_});
  }
  for (std::size_t k = 1; k < rec.points.size(); ++k) {
    const auto& b = rec.points[rec.best];
    const auto& c = rec.points[k];
    if (c.mean > b.mean || (c.mean == b.mean && c.p_empty < b.p_empty)) rec.best = k;
  }
  return rec;
}

struct MetricsRow {
  std::string run_id;
  std::uint64_t seed = 0;
  IterationMetrics it;
  double wall_ms = 0.0;
};

struct ReplicateResult {
  std::string run_id;
  std::vector<MetricsRow> rows;
  std::vector<std::vector<double>> theta;
  std::vector<std::string> warnings;
  double trailing_mean = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentResult {
  std::vector<ReplicateResult> replicates;
  std::optional<BaselineRecord> baseline;
  bool oracle_available = false;
  std::filesystem::path out_dir;
  json manifest;
};

/// "%.17g" keeps every double round-trippable and the text locale-independent.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline const char* kMetricsHeader =
    "run_id,seed,m,t_total,return_estimate,return_exact,grad_norm,max_critic_residual,wall_ms";

inline std::string metrics_line(const MetricsRow& r) {
  std::ostringstream os;
  os << r.run_id << ',' << r.seed << ',' << r.it.m << ',' << r.it.t_total << ',' << format_double(r.it.return_estimate)
     << ',' << format_double(r.it.return_exact) << ',' << format_double(r.it.grad_norm) << ','
     << format_double(r.it.max_critic_residual) << ',' << format_double(r.wall_ms);
  return os.str();
}

inline json checkpoint_json(const std::string& run_id, std::uint64_t seed, std::size_t m, int beta,
                            const std::vector<std::vector<double>>& theta) {
  return {{"format", "netmarl-checkpoint"}, {"version", kCheckpointVersion}, {"run_id", run_id}, {"seed", seed},
          {"outer_iterations", m}, {"beta", beta}, {"theta", theta}};
}

/// Restores theta from a checkpoint written by run_experiment; shapes must match.
inline void load_checkpoint(const json& ck, LocalizedPolicy& policy) {
  if (ck.value("format", "") != "netmarl-checkpoint" || ck.value("version", 0) != kCheckpointVersion)
    throw std::invalid_argument("checkpoint: unsupported format or version");
  if (ck.at("beta").get<int>() != policy.beta()) throw std::invalid_argument("checkpoint: beta mismatch");
  const auto theta = ck.at("theta").get<std::vector<std::vector<double>>>();
  if (theta.size() != policy.num_agents()) throw std::invalid_argument("checkpoint: agent count mismatch");
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (theta[i].size() != policy.theta(static_cast<int>(i)).size())
      throw std::invalid_argument("checkpoint: theta shape mismatch for agent " + std::to_string(i));
    policy.theta(static_cast<int>(i)) = theta[i];
  }
}

/// Environment overrides: NETMARL_THREADS (replicate workers), NETMARL_OUT_DIR (output directory).
inline std::size_t thread_count() {
  if (const char* v = std::getenv("NETMARL_THREADS")) {
    const long n = std::strtol(v, nullptr, 10);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  return 1;
}

inline std::string resolve_out_dir(const ExperimentConfig& cfg, const std::optional<std::string>& cli) {
  if (cli) return *cli;
  if (const char* v = std::getenv("NETMARL_OUT_DIR"); v && *v) return v;
  return cfg.out_dir;
}

namespace detail {

/// sup over agents and global (s, a) of |Q_hat_i(z_i(s, a)) - Q_i^theta(s, a)|.
inline double critic_sup_error(const GlobalModel& model, const JointPolicy& policy,
                               const std::vector<TruncatedQTable>& tables) {
  const auto qs = exact_local_q_all(model, policy);
  const std::size_t n = model.mdp().num_agents();
  std::vector<int> s(n), a(n);
  double worst = 0.0;
  const Eigen::Index A = model.num_actions();
  for (Eigen::Index z = 0; z < model.num_states() * A; ++z) {
    model.states().values(static_cast<std::uint64_t>(z / A), s);
    model.actions().values(static_cast<std::uint64_t>(z % A), a);
    for (std::size_t i = 0; i < n; ++i)
      worst = std::max(worst, std::abs(tables[i].get(tables[i].codec().encode(s, a)) - qs[i].q(z)));
  }
  return worst;
}

inline ReplicateResult run_replicate(const ExperimentConfig& cfg, const EnvInstance& env, const GlobalModel* model,
                                     std::size_t r) {
  ReplicateResult res;
  res.run_id = "r" + std::to_string(r);
  const Stream rep = Stream(cfg.seed).split(stream_tag::kReplicate, r);
  SACConfig sac = cfg.sac;
  sac.seed = rep.key();
  const NetworkedMDP& mdp = *env.mdp;
  LocalizedPolicy policy(mdp.graph(), mdp.state_sizes(), mdp.action_sizes(), sac.beta);
  auto clock_start = std::chrono::steady_clock::now();

  TrainingCallbacks cb;
  cb.on_critic = [&](std::size_t m, const LocalizedPolicy& pol, const std::vector<TruncatedQTable>& tables,
                     const Trajectory&, IterationMetrics& it) {
    it.return_estimate = evaluate_policy(mdp, pol, cfg.eval_rollouts, rep.split(stream_tag::kEval, m)).mean;
    if (model) {
      it.return_exact = exact_return(*model, pol);
      it.max_critic_residual = critic_sup_error(*model, pol, tables);
    }
  };
  cb.on_iteration = [&](const IterationMetrics& it, const LocalizedPolicy&) {
    MetricsRow row{res.run_id, cfg.seed, it, 0.0};
    if (cfg.record_wall_time)
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - clock_start).count();
    res.rows.push_back(std::move(row));
  };
  const TrainingRecord rec = train(mdp, policy, sac, cb);
  res.warnings = rec.warnings;
  res.theta = policy.parameters();
  if (!res.rows.empty()) {
    const std::size_t w = std::min(cfg.trailing_window, res.rows.size());
    double s = 0.0;
    for (std::size_t k = res.rows.size() - w; k < res.rows.size(); ++k) s += res.rows[k].it.return_estimate;
    res.trailing_mean = s / static_cast<double>(w);
  }
  return res;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

}  // namespace detail

/**
 * Runs every replicate of SAC (and the baseline sweep when configured) and
 * writes metrics.csv, baseline.csv, manifest.json and one checkpoint per
 * replicate into out_dir. Replicates may run on NETMARL_THREADS workers;
 * output is assembled in replicate order, so artifacts are identical for
 * identical (config, seed).
 */
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  ExperimentResult result;
  result.out_dir = out_dir;
  std::filesystem::create_directories(out_dir);
  const Stream root(cfg.seed);
  const EnvInstance env = build_env(cfg.env, root.split(stream_tag::kEnv));

  std::unique_ptr<GlobalModel> model;
  std::string oracle_note = "disabled";
  if (cfg.oracle) {
    try {
      model = std::make_unique<GlobalModel>(*env.mdp);
      oracle_note = "exact";
    } catch (const OracleCapExceeded& e) {
      oracle_note = std::string("unavailable: ") + e.what();
    }
  }
  result.oracle_available = model != nullptr;

  if (!cfg.baseline_grid.empty())
    result.baseline = sweep_baseline(env, cfg.baseline_grid, cfg.baseline_rollouts, root.split(stream_tag::kEval));

  result.replicates.resize(cfg.replicates);
  const std::size_t workers = std::min(thread_count(), cfg.replicates);
  if (workers <= 1) {
    for (std::size_t r = 0; r < cfg.replicates; ++r) result.replicates[r] = detail::run_replicate(cfg, env, model.get(), r);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t r = w; r < cfg.replicates; r += workers)
            result.replicates[r] = detail::run_replicate(cfg, env, model.get(), r);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::ostringstream csv;
  csv << kMetricsHeader << '\n';
  for (const auto& rep : result.replicates)
    for (const auto& row : rep.rows) csv << metrics_line(row) << '\n';
  detail::write_text(out_dir / "metrics.csv", csv.str());

  if (result.baseline) {
    std::ostringstream b;
    b << "p_empty,mean_return,stderr,best\n";
    for (std::size_t k = 0; k < result.baseline->points.size(); ++k) {
      const auto& p = result.baseline->points[k];
      b << format_double(p.p_empty) << ',' << format_double(p.mean) << ',' << format_double(p.stderr_) << ','
        << (k == result.baseline->best ? 1 : 0) << '\n';
    }
    detail::write_text(out_dir / "baseline.csv", b.str());
  }

  json reps = json::array();
  for (const auto& rep : result.replicates) {
    reps.push_back({{"run_id", rep.run_id},
                    {"seed_key", Stream(cfg.seed).split(stream_tag::kReplicate, &rep - result.replicates.data()).key()},
                    {"trailing_mean_return", rep.trailing_mean},
                    {"warnings", rep.warnings}});
    if (cfg.checkpoints)
      detail::write_text(out_dir / ("checkpoint_" + rep.run_id + ".json"),
                         checkpoint_json(rep.run_id, cfg.seed, cfg.sac.M, cfg.sac.beta, rep.theta).dump(1) + "\n");
  }
  json& man = result.manifest;
  man["tool"] = "netmarl";
  man["version"] = kVersion;
  man["seed"] = cfg.seed;
  man["config"] = cfg.source;
  man["resolved"] = {{"env_kind", cfg.env.kind},
                     {"gamma", cfg.env.gamma},
                     {"kappa", cfg.sac.kappa},
                     {"beta", cfg.sac.beta},
                     {"T", cfg.sac.T},
                     {"M", cfg.sac.M},
                     {"H", cfg.sac.H},
                     {"t0", cfg.sac.t0},
                     {"eta", cfg.sac.eta},
                     {"warm_start", cfg.sac.warm_start},
                     {"replicates", cfg.replicates},
                     {"reward_bound", env.mdp->reward_bound()},
                     {"agents", env.mdp->num_agents()}};
  man["sampled_parameters"] = env.sampled;
  man["evaluation"] = {{"estimator", "fresh rollouts from s(0) ~ pi_0 on the eval stream, per-agent-averaged discounted return"},
                       {"horizon", eval_horizon(cfg.env.gamma)},
                       {"horizon_rule", "ceil(ln(1e-3) / ln(gamma))"},
                       {"rollouts_per_iteration", cfg.eval_rollouts},
                       {"trailing_window", cfg.trailing_window},
                       {"policy_evaluated", "theta(m), the policy that generated iteration m's inner loop"}};
  man["oracle"] = oracle_note;
  man["replicate_results"] = reps;
  if (result.baseline) {
    json pts = json::array();
    for (const auto& p : result.baseline->points)
      pts.push_back({{"p_empty", p.p_empty}, {"mean", p.mean}, {"stderr", p.stderr_}});
    man["baseline"] = {{"kind", "aloha"},
                       {"rollouts", cfg.baseline_rollouts},
                       {"points", pts},
                       {"best_p_empty", result.baseline->best_point().p_empty},
                       {"best_mean", result.baseline->best_point().mean}};
  }
  man["artifacts"] = {{"metrics", "metrics.csv"}, {"checkpoints", cfg.checkpoints}, {"wall_time_recorded", cfg.record_wall_time}};
  detail::write_text(out_dir / "manifest.json", man.dump(2) + "\n");
  return result;
}

}  // namespace netmarl::harness
