#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "netmarl/decay.hpp"
#include "netmarl/envs/tabular.hpp"
#include "netmarl/harness/experiment.hpp"
#include "netmarl/harness/fixtures.hpp"
#include "netmarl/markov.hpp"
#include "netmarl/oracle.hpp"
#include "netmarl/sac.hpp"
#include "netmarl/stochapprox.hpp"
#include "netmarl/tdq.hpp"

namespace netmarl::harness {

struct AcceptanceOptions {
  std::filesystem::path out_dir = "acceptance_out";
  std::filesystem::path config_dir = "configs";  ///< holds wireless_5x5.json for C8
};

/**
 * One criterion's outcome. `artifact` is the criterion's deterministic
 * output (seeded measurements, never timings); it is written to
 * <out>/cN.json and compared byte-for-byte by C9.
 */
struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
  json artifact;
  double seconds = 0.0;
};

inline CriterionResult make_result(int id, std::string name) {
  CriterionResult r;
  r.id = id;
  r.name = std::move(name);
  return r;
}

namespace accept {

inline std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline double sup_dist(std::span<const double> a, std::span<const double> b) {
  double out = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) out = std::max(out, std::abs(a[k] - b[k]));
  return out;
}

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

/// 3-agent path, 2x2 local spaces, static-local(1,1) links, gamma=0.7, softmax theta ~ U(-1,1).
struct CriticFixture {
  std::shared_ptr<const NetworkedMDP> mdp;
  std::unique_ptr<LocalizedPolicy> policy;
  std::unique_ptr<GlobalModel> model;
};

inline CriticFixture critic_fixture(std::uint64_t seed) {
  CriticFixture f;
  envs::TabularConfig cfg{AgentGraph::path(3), {2, 2, 2}, {2, 2, 2}};
  cfg.links = LinkDistribution::static_local(1, 1);
  cfg.gamma = 0.7;
  const Stream root(seed);
  Stream er = root.split(stream_tag::kEnv);
  f.mdp = envs::random_tabular_mdp(cfg, er);
  f.policy = std::make_unique<LocalizedPolicy>(f.mdp->graph(), f.mdp->state_sizes(), f.mdp->action_sizes(), 0);
  Stream pr = root.split(stream_tag::kAction);
  for (int i = 0; i < 3; ++i)
    for (double& x : f.policy->theta(i)) x = pr.uniform(-1.0, 1.0);
  f.model = std::make_unique<GlobalModel>(*f.mdp);
  return f;
}

struct CriticRun {
  std::vector<double> agent_error;  ///< sup over (s, a) per agent
  std::vector<double> sigma_prime;
  std::vector<std::uint64_t> table_size;
  double H = 0.0, t0 = 0.0, K1 = 0.0, K2 = 0.0;
};

/// Learns truncated critics at radius kappa with H = 2/((1-gamma) sigma'), t0 = max(4H, 2 K2 ln T).
inline CriticRun learn_critics(const CriticFixture& f, int kappa, std::size_t T, std::uint64_t seed) {
  CriticRun out;
  const auto rep = stationary_and_mixing(*f.model, *f.policy, kappa);
  out.sigma_prime = rep.sigma_prime;
  out.K1 = rep.mixing.K1;
  out.K2 = rep.mixing.K2;
  const double sp = *std::min_element(rep.sigma_prime.begin(), rep.sigma_prime.end());
  const double gamma = f.mdp->gamma();
  SACConfig sc;
  sc.kappa = kappa;
  sc.T = T;
  sc.H = out.H = minimum_H(sp, gamma);
  sc.t0 = out.t0 = schedule_t0(sc.H, out.K2, static_cast<double>(T));
  auto tables = make_critic_tables(*f.mdp, kappa);
  run_inner_loop(*f.mdp, *f.policy, sc, tables, Stream(seed).split(stream_tag::kOuter));
  const auto qs = exact_local_q_all(*f.model, *f.policy);
  const std::size_t n = f.mdp->num_agents();
  out.agent_error.assign(n, 0.0);
  std::vector<int> s(n), a(n);
  const Eigen::Index A = f.model->num_actions();
  for (Eigen::Index z = 0; z < f.model->num_states() * A; ++z) {
    f.model->states().values(static_cast<std::uint64_t>(z / A), s);
    f.model->actions().values(static_cast<std::uint64_t>(z % A), a);
    for (std::size_t i = 0; i < n; ++i)
      out.agent_error[i] =
          std::max(out.agent_error[i], std::abs(tables[i].get(tables[i].codec().encode(s, a)) - qs[i].q(z)));
  }
  for (const auto& t : tables) out.table_size.push_back(t.size());
  return out;
}

}  // namespace accept

inline CriterionResult criterion_c1() {
  CriterionResult res = make_result(1, "oracle critic recovery");
  const double gamma = 0.7, r_bar = 1.0;
  res.threshold = 0.05 * r_bar / (1.0 - gamma);
  int ok = 0;
  double worst = 0.0;
  json seeds = json::array();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto f = accept::critic_fixture(seed);
    const auto run = accept::learn_critics(f, 2, 200000, seed);
    const double err = *std::max_element(run.agent_error.begin(), run.agent_error.end());
    worst = std::max(worst, err);
    ok += err <= res.threshold;
    seeds.push_back({{"seed", seed}, {"sup_error", err}, {"H", run.H}, {"t0", run.t0}});
  }
  res.measured = worst;
  res.passed = ok >= 9;
  res.detail = std::to_string(ok) + "/10 seeds within threshold";
  res.artifact = {{"kappa", 2}, {"T", 200000}, {"seeds", seeds}};
  return res;
}

inline CriterionResult criterion_c2() {
  CriterionResult res = make_result(2, "truncation error within mu envelope");
  const std::size_t T = 200000, samples = 10000;
  const double gamma = 0.7, r_bar = 1.0;
  int ok = 0;
  double worst_ratio = 0.0;
  json seeds = json::array();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto f = accept::critic_fixture(seed);
    const auto run = accept::learn_critics(f, 1, T, seed);
    bool seed_ok = true;
    json agents = json::array();
    for (std::size_t i = 0; i < f.mdp->num_agents(); ++i) {
      const auto xs = sample_spread_times(f.mdp->graph(), f.mdp->link_distribution(), 0, static_cast<int>(i), 1,
                                          default_spread_horizon(1, gamma), samples,
                                          Stream(seed).split(stream_tag::kLinks, i));
      const double mu = estimate_mu(xs, gamma).mu;
      const auto b = bound_constants(td_bound_inputs(r_bar, gamma, run.H, run.t0, static_cast<double>(T), run.K1,
                                                     run.K2, run.sigma_prime[i],
                                                     static_cast<double>(run.table_size[i]), 0.1));
      const double envelope = b.envelope(static_cast<double>(T)) + r_bar * mu / (1.0 - gamma);
      seed_ok = seed_ok && run.agent_error[i] <= envelope;
      worst_ratio = std::max(worst_ratio, run.agent_error[i] / envelope);
      agents.push_back({{"sup_error", run.agent_error[i]}, {"mu_hat", mu}, {"envelope", envelope}});
    }
    ok += seed_ok;
    seeds.push_back({{"seed", seed}, {"agents", agents}});
  }
  res.measured = worst_ratio;
  res.threshold = 1.0;
  res.passed = ok == 10;
  res.detail = std::to_string(ok) + "/10 seeds dominated; measured is max error/envelope";
  res.artifact = {{"kappa", 1}, {"T", T}, {"spread_samples", samples}, {"seeds", seeds}};
  return res;
}

inline CriterionResult criterion_c3() {
  CriterionResult res = make_result(3, "TD aggregation bound");
  const double gamma = 0.8;
  const std::size_t T = 100000;
  const AggregationMap h({0, 0, 1, 1, 2, 2, 3, 3, 4, 4}, 5);
  int ok = 0;
  double worst_ratio = 0.0;
  json seeds = json::array();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Stream rng = Stream(seed).split(stream_tag::kEnv);
    const auto mrp = random_mrp(10, gamma, rng);
    const Eigen::VectorXd V = value_iteration(mrp);
    const auto quality = abstraction_quality(accept::to_vec(V), h);
    const Eigen::VectorXd d = stationary_distribution(mrp.P);
    const auto mix = estimate_mixing(mrp.P, d, 200);
    const double sp = class_mass_minimum(h, accept::to_vec(d));
    const double H = minimum_H(sp, gamma), t0 = schedule_t0(H, mix.K2, static_cast<double>(T));
    const double theta_cap = mrp.r_bar / (1.0 - gamma);
    bool logged_ok = true;
    LearningOptions opt;
    opt.sigma_prime = sp;
    for (std::size_t t = 1000; t <= T; t += 1000) opt.log_steps.push_back(t);
    opt.on_log = [&](std::size_t, const std::vector<double>& theta) {
      for (double x : theta) logged_ok = logged_ok && std::abs(x) <= theta_cap;
    };
    const auto run = td0_aggregated(mrp, h, {H, t0}, T, Stream(seed).split(stream_tag::kOuter), opt);
    std::vector<double> lifted(10);
    for (std::size_t i = 0; i < 10; ++i) lifted[i] = run.theta[static_cast<std::size_t>(h(i))];
    const double err = accept::sup_dist(lifted, accept::to_vec(V));
    const auto b = bound_constants(td_bound_inputs(mrp.r_bar, gamma, H, t0, static_cast<double>(T), mix.K1, mix.K2,
                                                   sp, 5.0, 0.1));
    const double bound = b.envelope(static_cast<double>(T)) + quality.zeta / (1.0 - gamma);
    const bool seed_ok = err <= bound && logged_ok && run.max_abs_theta <= theta_cap;
    ok += seed_ok;
    worst_ratio = std::max(worst_ratio, err / bound);
    seeds.push_back({{"seed", seed},
                     {"sup_error", err},
                     {"bound", bound},
                     {"zeta", quality.zeta},
                     {"max_abs_theta", run.max_abs_theta},
                     {"theta_cap", theta_cap}});
  }
  res.measured = worst_ratio;
  res.threshold = 1.0;
  res.passed = ok == 10;
  res.detail = std::to_string(ok) + "/10 seeds within bound and theta cap; measured is max error/bound";
  res.artifact = {{"T", T}, {"seeds", seeds}};
  return res;
}

inline CriterionResult criterion_c4() {
  CriterionResult res = make_result(4, "Q-learning aggregation target identity");
  const double gamma = 0.7;
  const std::size_t T = 1000000;
  const AggregationMap psi1({0, 1, 2, 0, 1, 2}, 3);
  const auto psi2 = AggregationMap::identity(2);
  const auto h = pair_aggregation(psi1, psi2);
  int ok = 0;
  double worst_identity = 0.0, worst_iterate = 0.0, worst_final = 0.0;
  json seeds = json::array();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Stream rng = Stream(seed).split(stream_tag::kEnv);
    const auto mdp = random_mdp(6, 2, gamma, rng);
    const auto d = accept::to_vec(mdp.behavior_stationary());
    const auto target = fixed_point(bellman_optimality_operator(mdp), h, d, WeightVector::ones(6), 1e-13).x;
    const Eigen::VectorXd Qpsi = value_iteration(build_aggregated_mdp(mdp, psi1, psi2, d), 1e-13);
    const double identity = accept::sup_dist(target, accept::to_vec(Qpsi));

    const Eigen::VectorXd Q = value_iteration(mdp);
    const double eps = abstraction_quality(accept::to_vec(Q), h).epsilon_qstar;
    const double sp = class_mass_minimum(h, d);
    Eigen::MatrixXd Psa(12, 12);
    for (int z = 0; z < 12; ++z)
      for (int s2 = 0; s2 < 6; ++s2)
        for (int a2 = 0; a2 < 2; ++a2) Psa(z, s2 * 2 + a2) = mdp.P(z, s2) * mdp.behavior(s2, a2);
    const auto mix = estimate_mixing(Psa, stationary_distribution(Psa), 200);
    const double H = minimum_H(sp, gamma), t0 = schedule_t0(H, mix.K2, static_cast<double>(T));
    const auto run = q_learning_aggregated(mdp, psi1, psi2, {H, t0}, T, Stream(seed).split(stream_tag::kOuter));
    const double iterate_gap = accept::sup_dist(run.theta, target);
    std::vector<double> lifted(12);
    for (std::size_t z = 0; z < 12; ++z) lifted[z] = run.theta[static_cast<std::size_t>(h(z))];
    const double final_err = accept::sup_dist(lifted, accept::to_vec(Q));
    const auto b = bound_constants(td_bound_inputs(mdp.r_bar, gamma, H, t0, static_cast<double>(T), mix.K1, mix.K2, sp,
                                                   6.0, 0.1));
    const double final_bound = b.envelope(static_cast<double>(T)) + 2.0 * eps / (1.0 - gamma);
    const double iterate_tol = 0.05 * mdp.r_bar / (1.0 - gamma);
    const bool seed_ok = identity <= 1e-8 && iterate_gap <= iterate_tol && final_err <= final_bound;
    ok += seed_ok;
    worst_identity = std::max(worst_identity, identity);
    worst_iterate = std::max(worst_iterate, iterate_gap / iterate_tol);
    worst_final = std::max(worst_final, final_err / final_bound);
    seeds.push_back({{"seed", seed},
                     {"identity_gap", identity},
                     {"iterate_gap", iterate_gap},
                     {"iterate_tolerance", iterate_tol},
                     {"final_error", final_err},
                     {"final_bound", final_bound}});
  }
  res.measured = worst_iterate;
  res.threshold = 1.0;
  res.passed = ok == 5;
  res.detail = std::to_string(ok) + "/5 fixtures pass; identity gap " + accept::fmt(worst_identity) +
               ", final error/bound " + accept::fmt(worst_final) + "; measured is iterate gap/tolerance";
  res.artifact = {{"T", T}, {"seeds", seeds}};
  return res;
}

inline CriterionResult criterion_c5() {
  CriterionResult res = make_result(5, "contraction and norm properties");
  Stream rng = Stream(5).split(stream_tag::kEnv);
  std::size_t violations = 0, checks = 0;
  double worst_factor = 0.0;
  auto random_map = [&](std::size_t n, int m) {
    std::vector<int> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i < static_cast<std::size_t>(m) ? static_cast<int>(i) : static_cast<int>(rng.below(m));
    return AggregationMap(v, m);
  };
  // Contraction of Pi F Phi in the unweighted sup norm, and the Pi / Phi norm facts under random weights.
  auto check_fixture = [&](const ContractionOperator& F, const AggregationMap& h, const std::vector<double>& d) {
    const std::size_t m = h.m();
    const auto ones = WeightVector::ones(m);
    auto T = [&](const std::vector<double>& x) { return project_pi(h, d, F.apply(lift(h, x))); };
    for (int rep = 0; rep < 1000; ++rep) {
      std::vector<double> x(m), y(m), din(m), dout(m), w(m), ground(h.n());
      for (std::size_t j = 0; j < m; ++j) {
        x[j] = rng.uniform(-10, 10);
        y[j] = rng.uniform(-10, 10);
        w[j] = 0.1 + rng.uniform();
      }
      for (double& g : ground) g = rng.uniform(-10, 10);
      const auto tx = T(x), ty = T(y);
      for (std::size_t j = 0; j < m; ++j) {
        din[j] = x[j] - y[j];
        dout[j] = tx[j] - ty[j];
      }
      const double factor = weighted_norm(dout, ones) / weighted_norm(din, ones);
      worst_factor = std::max(worst_factor, factor);
      const WeightVector v(w);
      violations += factor > F.gamma + 1e-12;
      violations += weighted_norm(project_pi(h, d, ground), v) > weighted_norm(ground, v, h) + 1e-12;
      violations += std::abs(weighted_norm(lift(h, x), v, h) - weighted_norm(x, v)) > 1e-12;
      checks += 3;
    }
  };
  for (int k = 0; k < 3; ++k) {
    const auto mrp = random_mrp(8, 0.75, rng);
    check_fixture(td_operator(mrp), random_map(8, 3), accept::to_vec(stationary_distribution(mrp.P)));
  }
  for (int k = 0; k < 2; ++k) {
    const auto mdp = random_mdp(6, 2, 0.7, rng);
    check_fixture(bellman_optimality_operator(mdp), pair_aggregation(random_map(6, 3), AggregationMap::identity(2)),
                  accept::to_vec(mdp.behavior_stationary()));
  }
  res.measured = static_cast<double>(violations);
  res.threshold = 0.0;
  res.passed = violations == 0;
  res.detail = std::to_string(checks) + " checks over 5 fixtures; worst contraction factor " + accept::fmt(worst_factor);
  res.artifact = {{"checks", checks}, {"violations", violations}, {"worst_factor", worst_factor}};
  return res;
}

inline CriterionResult criterion_c6() {
  CriterionResult res = make_result(6, "decay sandwich");
  const double gamma = 0.7;
  const std::size_t samples = 10000;
  const AgentGraph g = AgentGraph::grid(6, 6);
  const std::vector<int> agents = {0, 14};  // corner and interior
  std::size_t failures = 0;
  double worst_ratio = 0.0;
  json rows = json::array();

  const auto sl = LinkDistribution::static_local(1, 1);
  const auto exp_b = *applicable_bounds(g, sl, gamma, 0).exponential;
  for (int i : agents)
    for (int kappa = 1; kappa <= 5; ++kappa) {
      const auto xs = sample_spread_times(g, sl, 0, i, kappa, default_spread_horizon(kappa, gamma), samples,
                                          Stream(6).split(stream_tag::kLinks, static_cast<std::uint64_t>(i * 16 + kappa)));
      bool lower_ok = true;
      for (const auto& x : xs)
        if (!x.unreachable) lower_ok = lower_ok && static_cast<double>(x.x) >= (kappa - 1.0) / 1.0;
      const auto e = estimate_mu(xs, gamma);
      const double bound = exp_b(kappa);
      const bool ok = lower_ok && e.mean_gamma_x <= bound + 3.0 * e.stderr_gamma_x;
      failures += !ok;
      worst_ratio = std::max(worst_ratio, e.mean_gamma_x / bound);
      rows.push_back({{"links", "static_local"}, {"agent", i}, {"kappa", kappa}, {"mc_mean", e.mean_gamma_x},
                      {"mc_stderr", e.stderr_gamma_x}, {"bound", bound}, {"lower_bound_holds", lower_ok}});
    }

  const auto geo = LinkDistribution::geometric(1.0, 0.5);
  const auto near_b = *applicable_bounds(g, geo, gamma, 0).near_exponential;
  for (int i : agents)
    for (int kappa = 2; kappa <= 5; ++kappa) {
      const auto xs = sample_spread_times(g, geo, 0, i, kappa - 1, default_spread_horizon(kappa - 1, gamma), samples,
                                          Stream(6).split(stream_tag::kTransition, static_cast<std::uint64_t>(i * 16 + kappa)));
      const auto e = estimate_mu(xs, gamma);
      const double bound = near_b(kappa);
      const bool ok = e.mean_gamma_x <= bound + 3.0 * e.stderr_gamma_x;
      failures += !ok;
      worst_ratio = std::max(worst_ratio, e.mean_gamma_x / bound);
      rows.push_back({{"links", "geometric"}, {"agent", i}, {"kappa", kappa}, {"mc_mean", e.mean_gamma_x},
                      {"mc_stderr", e.stderr_gamma_x}, {"bound", bound}});
    }
  res.measured = worst_ratio;
  res.threshold = 1.0;
  res.passed = failures == 0;
  res.detail = std::to_string(rows.size() - failures) + "/" + std::to_string(rows.size()) +
               " (agent, kappa) cells dominated; measured is max MC mean/bound";
  res.artifact = {{"samples", samples}, {"rows", rows}};
  return res;
}

inline CriterionResult criterion_c7() {
  CriterionResult res = make_result(7, "gradient fidelity");
  const double gamma = 0.95;
  const auto mdp = toggle_mdp(AgentGraph::path(2), gamma);
  LocalizedPolicy pol(mdp->graph(), {2, 2}, {2, 2}, 1);
  const GlobalModel model(*mdp);
  const int kappa = mdp->graph().diameter();
  const auto rep = stationary_and_mixing(model, pol, kappa);
  const double sp = *std::min_element(rep.sigma_prime.begin(), rep.sigma_prime.end());
  SACConfig cfg;
  cfg.kappa = kappa;
  cfg.T = 10000;
  cfg.H = minimum_H(sp, gamma);
  cfg.t0 = schedule_t0(cfg.H, rep.mixing.K2, static_cast<double>(cfg.T));

  const int loops = 200;
  std::vector<std::vector<double>> mean(2, std::vector<double>(pol.theta(0).size(), 0.0));
  for (int k = 0; k < loops; ++k) {
    auto tables = make_critic_tables(*mdp, kappa);
    const auto tr = run_inner_loop(*mdp, pol, cfg, tables, Stream(7).split(stream_tag::kOuter, static_cast<std::uint64_t>(k)));
    for (int i = 0; i < 2; ++i) {
      const auto g = actor_gradient(tr, tables, pol, mdp->graph(), kappa, i, gamma);
      for (std::size_t p = 0; p < g.size(); ++p) mean[static_cast<std::size_t>(i)][p] += g[p] / loops;
    }
  }
  double err = 0.0, norm = 0.0;
  const double eps = 1e-4;
  json fd_grad = json::array();
  for (int i = 0; i < 2; ++i)
    for (std::size_t p = 0; p < pol.theta(i).size(); ++p) {
      const double saved = pol.theta(i)[p];
      pol.theta(i)[p] = saved + eps;
      const double up = exact_return(model, pol);
      pol.theta(i)[p] = saved - eps;
      const double down = exact_return(model, pol);
      pol.theta(i)[p] = saved;
      const double fd = (up - down) / (2.0 * eps);
      fd_grad.push_back(fd);
      const double diff = mean[static_cast<std::size_t>(i)][p] - fd;
      err += diff * diff;
      norm += fd * fd;
    }
  const double rel = std::sqrt(err / norm);

  // Softmax log-gradient against central differences at random parameters.
  LocalizedPolicy probe(AgentGraph::path(2), {2, 2}, {2, 3}, 1);
  Stream rng = Stream(7).split(stream_tag::kAction);
  for (int i = 0; i < 2; ++i)
    for (double& v : probe.theta(i)) v = rng.uniform(-2, 2);
  double worst_log = 0.0;
  const double h = 1e-5;
  for (int i = 0; i < 2; ++i)
    for (std::size_t s = 0; s < probe.neighborhood_states(i); ++s)
      for (int a = 0; a < probe.action_count(i); ++a) {
        const auto grad = probe.log_policy_gradient(i, s, a);
        for (std::size_t k = 0; k < grad.size(); ++k) {
          const double saved = probe.theta(i)[k];
          probe.theta(i)[k] = saved + h;
          const double up = probe.log_probability(i, s, a);
          probe.theta(i)[k] = saved - h;
          const double down = probe.log_probability(i, s, a);
          probe.theta(i)[k] = saved;
          worst_log = std::max(worst_log, std::abs((up - down) / (2.0 * h) - grad[k]));
        }
      }
  res.measured = rel;
  res.threshold = 0.05;
  res.passed = rel <= 0.05 && worst_log <= 1e-6;
  res.detail = "relative L2 error over " + std::to_string(loops) + " inner loops; log-gradient max |diff| " +
               accept::fmt(worst_log) + " (tol 1e-6)";
  res.artifact = {{"mean_gradient", mean}, {"fd_gradient", fd_grad}, {"relative_error", rel},
                  {"log_gradient_max_diff", worst_log}, {"H", cfg.H}, {"t0", cfg.t0}};
  return res;
}

/// C8 writes one run directory per seed under out_dir/c8/seed_S.
inline CriterionResult criterion_c8(const AcceptanceOptions& opt, const std::filesystem::path& out_dir) {
  CriterionResult res = make_result(8, "wireless grid: SAC beats tuned ALOHA");
  const auto base = load_config((opt.config_dir / "wireless_5x5.json").string());
  const auto start = std::chrono::steady_clock::now();
  int wins = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  json seeds = json::array();
  for (std::uint64_t seed = 11; seed <= 15; ++seed) {
    ExperimentConfig cfg = base;
    cfg.seed = seed;
    const auto run = run_experiment(cfg, out_dir / "c8" / ("seed_" + std::to_string(seed)));
    const double sac = run.replicates.at(0).trailing_mean;
    const double aloha = run.baseline->best_point().mean;
    wins += sac > aloha;
    worst_margin = std::min(worst_margin, sac - aloha);
    seeds.push_back({{"seed", seed}, {"sac_trailing_mean", sac}, {"aloha_best", aloha},
                     {"aloha_best_p_empty", run.baseline->best_point().p_empty}});
  }
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  res.measured = wins;
  res.threshold = 4;
  res.passed = wins >= 4 && minutes <= 30.0;
  res.detail = std::to_string(wins) + "/5 seeds won, smallest margin " + accept::fmt(worst_margin) + ", runtime " +
               accept::fmt(minutes) + " min (limit 30), M=" + std::to_string(base.sac.M);
  res.artifact = {{"M", base.sac.M}, {"T", base.sac.T}, {"eta", base.sac.eta}, {"seeds", seeds}};
  return res;
}

namespace accept {

inline void write_artifact(const std::filesystem::path& dir, const CriterionResult& r) {
  std::filesystem::create_directories(dir);
  detail::write_text(dir / ("c" + std::to_string(r.id) + ".json"), r.artifact.dump(1) + "\n");
}

/// Runs C1..C8, writing artifacts under `dir`.
inline std::vector<CriterionResult> run_primary(const AcceptanceOptions& opt, const std::filesystem::path& dir,
                                                const std::function<void(const CriterionResult&)>& on_result) {
  std::vector<std::function<CriterionResult()>> fns = {
      criterion_c1, criterion_c2, criterion_c3, criterion_c4, criterion_c5, criterion_c6, criterion_c7,
      [&] { return criterion_c8(opt, dir); }};
  std::vector<CriterionResult> out;
  for (auto& fn : fns) {
    const auto start = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r.id = static_cast<int>(out.size()) + 1;
      r.name = "criterion " + std::to_string(r.id);
      r.passed = false;
      r.detail = std::string("error: ") + e.what();
      r.artifact = {{"error", e.what()}};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_artifact(dir, r);
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  }
  return out;
}

/// Relative paths of every regular file under root, sorted.
inline std::vector<std::filesystem::path> file_list(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::exists(root)) return out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(std::filesystem::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace accept

/// Reruns C1..C8 into a second tree and compares every artifact file byte-for-byte.
inline CriterionResult criterion_c9(const AcceptanceOptions& opt, const std::filesystem::path& first,
                                    const std::filesystem::path& second) {
  CriterionResult res = make_result(9, "determinism across reruns");
  std::filesystem::remove_all(second);
  accept::run_primary(opt, second, nullptr);
  const auto a = accept::file_list(first), b = accept::file_list(second);
  std::size_t mismatched = 0;
  std::string first_diff;
  if (a != b) {
    mismatched = std::max(a.size(), b.size());
    first_diff = "file lists differ";
  } else {
    for (const auto& rel : a)
      if (accept::read_file(first / rel) != accept::read_file(second / rel)) {
        if (first_diff.empty()) first_diff = rel.string();
        ++mismatched;
      }
  }
  res.measured = static_cast<double>(mismatched);
  res.threshold = 0.0;
  res.passed = mismatched == 0 && !a.empty();
  res.detail = std::to_string(a.size()) + " files compared" + (first_diff.empty() ? "" : ", first mismatch: " + first_diff);
  res.artifact = {{"files", a.size()}, {"mismatched", mismatched}};
  return res;
}

/**
 * Runs all nine criteria. Artifacts of the first pass go to out_dir/run1,
 * the rerun for C9 to out_dir/run2; a timing-bearing summary goes to
 * out_dir/acceptance_report.json.
 */
inline std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt,
                                                   const std::function<void(const CriterionResult&)>& on_result = {}) {
  const auto run1 = opt.out_dir / "run1", run2 = opt.out_dir / "run2";
  std::filesystem::remove_all(run1);
  auto results = accept::run_primary(opt, run1, on_result);
  const auto start = std::chrono::steady_clock::now();
  CriterionResult c9;
  try {
    c9 = criterion_c9(opt, run1, run2);
  } catch (const std::exception& e) {
    c9 = make_result(9, "determinism across reruns");
    c9.detail = std::string("error: ") + e.what();
  }
  c9.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (on_result) on_result(c9);
  results.push_back(std::move(c9));

  json report = json::array();
  for (const auto& r : results)
    report.push_back({{"criterion", r.id}, {"name", r.name}, {"passed", r.passed}, {"measured", r.measured},
                      {"threshold", r.threshold}, {"detail", r.detail}, {"seconds", r.seconds}});
  detail::write_text(opt.out_dir / "acceptance_report.json", report.dump(2) + "\n");
  return results;
}

}  // namespace netmarl::harness
