#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "netmarl/decay.hpp"
#include "netmarl/envs/sis.hpp"
#include "netmarl/envs/tabular.hpp"
#include "netmarl/envs/wireless.hpp"
#include "netmarl/harness/acceptance.hpp"
#include "netmarl/harness/experiment.hpp"
#include "netmarl/harness/fixtures.hpp"
#include "netmarl/markov.hpp"
#include "netmarl/sac.hpp"
#include "netmarl/stochapprox.hpp"
#include "netmarl/tdq.hpp"

namespace netmarl::harness {

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<CheckResult> checks;

  std::size_t failures() const {
    std::size_t n = 0;
    for (const auto& c : checks) n += !c.passed;
    return n;
  }
  bool ok() const { return failures() == 0; }

  json to_json() const {
    json arr = json::array();
    for (const auto& c : checks)
      arr.push_back({{"suite", c.suite}, {"name", c.name}, {"passed", c.passed}, {"measured", c.measured},
                     {"threshold", c.threshold}, {"detail", c.detail}});
    return {{"passed", ok()}, {"failures", failures()}, {"checks", arr}};
  }
};

inline CheckResult make_check(std::string suite, std::string name, bool passed, double measured, double threshold,
                              std::string detail = {}) {
  CheckResult c;
  c.suite = std::move(suite);
  c.name = std::move(name);
  c.passed = passed;
  c.measured = measured;
  c.threshold = threshold;
  c.detail = std::move(detail);
  return c;
}

/// Every kernel row must be a probability vector; measured is the largest |row sum - 1|.
inline CheckResult check_kernel_normalization(std::span<const int> state_sizes, std::span<const int> action_sizes,
                                              std::span<const TableDynamics::AgentTables> tables) {
  double worst = 0.0;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const auto width = static_cast<std::size_t>(state_sizes[i]);
    for (const auto& [sig, rows] : tables[i].kernel)
      for (std::size_t c = 0; c + width <= rows.size(); c += width) {
        double sum = 0.0;
        for (std::size_t k = 0; k < width; ++k) sum += rows[c + k];
        worst = std::max(worst, std::abs(sum - 1.0));
      }
  }
  const KernelCheck check = TableDynamics::validate(state_sizes, action_sizes, tables);
  return make_check("netmdp", "kernel_normalization", check.ok, worst, 1e-12, check.ok ? "all rows sum to 1" : check.message);
}

struct ValidateOptions {
  std::filesystem::path out_dir = "validate_out";  ///< scratch space for harness and acceptance artifacts
  AcceptanceOptions acceptance;
};

namespace checks {

inline std::vector<CheckResult> netmdp(const ValidateOptions&) {
  std::vector<CheckResult> out;
  envs::TabularConfig cfg{AgentGraph::path(3), {2, 3, 2}, {2, 2, 3}};
  cfg.links = LinkDistribution::geometric(1.0, 0.5);
  Stream rng(101);
  const auto mdp = envs::random_tabular_mdp(cfg, rng);
  const auto& tables = static_cast<const TableDynamics&>(mdp->dynamics()).tables();
  out.push_back(check_kernel_normalization(mdp->state_sizes(), mdp->action_sizes(), tables));

  LocalizedPolicy pol(mdp->graph(), mdp->state_sizes(), mdp->action_sizes(), 1);
  Stream pr(102);
  for (std::size_t i = 0; i < 3; ++i)
    for (double& v : pol.theta(static_cast<int>(i))) v = pr.uniform(-2, 2);
  double row_err = 0.0, fd_err = 0.0;
  for (int i = 0; i < 3; ++i)
    for (std::size_t s = 0; s < pol.neighborhood_states(i); ++s) {
      double sum = 0.0;
      for (double p : pol.probabilities(i, s)) sum += p;
      row_err = std::max(row_err, std::abs(sum - 1.0));
      for (int a = 0; a < pol.action_count(i); ++a) {
        const auto grad = pol.log_policy_gradient(i, s, a);
        for (std::size_t k = 0; k < grad.size(); ++k) {
          const double saved = pol.theta(i)[k], h = 1e-5;
          pol.theta(i)[k] = saved + h;
          const double up = pol.log_probability(i, s, a);
          pol.theta(i)[k] = saved - h;
          const double down = pol.log_probability(i, s, a);
          pol.theta(i)[k] = saved;
          fd_err = std::max(fd_err, std::abs((up - down) / (2 * h) - grad[k]));
        }
      }
    }
  out.push_back(make_check("netmdp", "policy_rows_sum_to_one", row_err <= 1e-12, row_err, 1e-12));
  out.push_back(make_check("netmdp", "log_gradient_matches_central_differences", fd_err <= 1e-6, fd_err, 1e-6));

  const AgentGraph g = AgentGraph::grid(4, 4);
  const auto dist = LinkDistribution::geometric(1.0, 0.5);
  Stream lr(103);
  std::size_t missing = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto L = dist.sample(g, lr);
    for (int i = 0; i < 16; ++i) missing += !L.ls.contains(i, i) + !L.lr.contains(i, i);
  }
  out.push_back(make_check("netmdp", "link_sets_contain_self_loops", missing == 0, static_cast<double>(missing), 0.0));

  std::size_t bad_states = 0;
  Stream sr(104);
  auto s = mdp->sample_initial(sr.split(0));
  for (std::size_t t = 0; t < 500; ++t) {
    std::vector<int> a(3);
    for (std::size_t i = 0; i < 3; ++i) a[i] = static_cast<int>(sr.below(static_cast<std::uint64_t>(mdp->action_sizes()[i])));
    Stream links = sr.split(1, t);
    const auto L = mdp->sample_links(links);
    auto [next, r] = mdp->step(s, a, L, sr.split(2, t));
    for (std::size_t i = 0; i < 3; ++i) {
      bad_states += next[i] < 0 || next[i] >= mdp->state_sizes()[i];
      bad_states += std::abs(r[i]) > mdp->reward_bound() + 1e-12;
    }
    s = next;
  }
  out.push_back(make_check("netmdp", "steps_stay_in_range", bad_states == 0, static_cast<double>(bad_states), 0.0,
                           "states in S_i and |r_i| <= r_bar over 500 steps"));
  return out;
}

inline std::vector<CheckResult> decay(const ValidateOptions&) {
  std::vector<CheckResult> out;
  const double gamma = 0.7;
  const AgentGraph g = AgentGraph::grid(5, 5);
  std::size_t lower_violations = 0;
  for (int a1 = 1; a1 <= 2; ++a1)
    for (int a2 = 0; a2 <= 2; ++a2)
      for (int kappa = 0; kappa <= 5; ++kappa) {
        const auto xs = sample_spread_times(g, LinkDistribution::static_local(a1, a2), 0, 12, kappa, 200, 3,
                                            Stream(static_cast<std::uint64_t>(kappa)));
        for (const auto& x : xs)
          if (!x.unreachable) lower_violations += static_cast<double>(x.x) < (kappa - a2) / static_cast<double>(a1);
      }
  out.push_back(make_check("decay", "static_local_lower_bound", lower_violations == 0,
                           static_cast<double>(lower_violations), 0.0));

  const AgentGraph g6 = AgentGraph::grid(6, 6);
  double worst = 0.0, mu_range = 0.0;
  const auto sl = LinkDistribution::static_local(1, 1);
  const auto b = *applicable_bounds(g6, sl, gamma, 0).exponential;
  for (int kappa = 1; kappa <= 5; ++kappa) {
    const auto xs = sample_spread_times(g6, sl, 0, 14, kappa, default_spread_horizon(kappa, gamma), 200, Stream(105));
    const auto e = estimate_mu(xs, gamma);
    worst = std::max(worst, e.mean_gamma_x / b(kappa));
    if (e.mu < 0.0 || e.mu > 1.0 / (1.0 - gamma)) mu_range += 1.0;
  }
  out.push_back(make_check("decay", "exponential_bound_dominates", worst <= 1.0, worst, 1.0, "MC mean / bound"));
  out.push_back(make_check("decay", "mu_within_range", mu_range == 0.0, mu_range, 0.0, "0 <= mu <= 1/(1-gamma)"));

  const auto geo = LinkDistribution::geometric(1.0, 0.5);
  const auto nb = *applicable_bounds(g6, geo, gamma, 0).near_exponential;
  double worst_geo = 0.0;
  for (int kappa = 2; kappa <= 5; ++kappa) {
    const auto xs = sample_spread_times(g6, geo, 0, 14, kappa - 1, default_spread_horizon(kappa - 1, gamma), 500,
                                        Stream(106));
    const auto e = estimate_mu(xs, gamma);
    worst_geo = std::max(worst_geo, (e.mean_gamma_x - 3.0 * e.stderr_gamma_x) / nb(kappa));
  }
  out.push_back(make_check("decay", "near_exponential_bound_dominates", worst_geo <= 1.0, worst_geo, 1.0,
                           "(MC mean - 3 SE) / bound"));
  return out;
}

inline std::vector<CheckResult> stochapprox(const ValidateOptions&) {
  std::vector<CheckResult> out;
  Stream rng(107);
  const auto mrp = random_mrp(8, 0.75, rng);
  const AggregationMap h({0, 1, 2, 0, 1, 2, 0, 1}, 3);
  const auto F = td_operator(mrp);
  const Eigen::VectorXd dv = stationary_distribution(mrp.P);
  const std::vector<double> d(dv.data(), dv.data() + dv.size());
  const auto ones = WeightVector::ones(3);
  double factor = 0.0, pi_excess = 0.0, phi_gap = 0.0;
  for (int rep = 0; rep < 300; ++rep) {
    std::vector<double> x(3), y(3), w(3), ground(8), din(3), dout(3);
    for (std::size_t j = 0; j < 3; ++j) {
      x[j] = rng.uniform(-10, 10);
      y[j] = rng.uniform(-10, 10);
      w[j] = 0.1 + rng.uniform();
    }
    for (double& e : ground) e = rng.uniform(-10, 10);
    const auto tx = project_pi(h, d, F.apply(lift(h, x))), ty = project_pi(h, d, F.apply(lift(h, y)));
    for (std::size_t j = 0; j < 3; ++j) {
      din[j] = x[j] - y[j];
      dout[j] = tx[j] - ty[j];
    }
    factor = std::max(factor, weighted_norm(dout, ones) / weighted_norm(din, ones));
    const WeightVector v(w);
    pi_excess = std::max(pi_excess, weighted_norm(project_pi(h, d, ground), v) - weighted_norm(ground, v, h));
    phi_gap = std::max(phi_gap, std::abs(weighted_norm(lift(h, x), v, h) - weighted_norm(x, v)));
  }
  out.push_back(make_check("stochapprox", "projected_operator_contracts", factor <= F.gamma + 1e-12, factor, F.gamma));
  out.push_back(make_check("stochapprox", "projection_non_expansive", pi_excess <= 1e-12, pi_excess, 1e-12,
                           "max ||Pi y||_v - ||y||_v"));
  out.push_back(make_check("stochapprox", "lift_is_isometric", phi_gap <= 1e-12, phi_gap, 1e-12));

  const auto id = AggregationMap::identity(8);
  const auto fp = fixed_point(F, id, d, WeightVector::ones(8), 1e-11);
  const Eigen::VectorXd V = evaluate_dense(mrp.P, mrp.expected_reward(), mrp.gamma);
  double gap = 0.0;
  for (int i = 0; i < 8; ++i) gap = std::max(gap, std::abs(fp.x[static_cast<std::size_t>(i)] - V(i)));
  out.push_back(make_check("stochapprox", "identity_fixed_point_is_value", gap <= 1e-9, gap, 1e-9));
  return out;
}

inline std::vector<CheckResult> tdq(const ValidateOptions&) {
  std::vector<CheckResult> out;
  Stream rng(108);
  const double gamma = 0.8;
  const auto mdp = random_mdp(6, 2, gamma, rng);
  const AggregationMap psi1({0, 1, 2, 0, 1, 2}, 3);
  const auto psi2 = AggregationMap::identity(2);
  const Eigen::VectorXd dv = mdp.behavior_stationary();
  const std::vector<double> d(dv.data(), dv.data() + dv.size());
  const auto theta =
      fixed_point(bellman_optimality_operator(mdp), pair_aggregation(psi1, psi2), d, WeightVector::ones(6), 1e-13).x;
  const Eigen::VectorXd Qpsi = value_iteration(build_aggregated_mdp(mdp, psi1, psi2, d), 1e-13);
  double gap = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) gap = std::max(gap, std::abs(theta[k] - Qpsi(static_cast<Eigen::Index>(k))));
  out.push_back(make_check("tdq", "aggregated_target_identity", gap <= 1e-8, gap, 1e-8));

  const auto mrp = random_mrp(10, gamma, rng);
  const AggregationMap h({0, 0, 1, 1, 2, 2, 3, 3, 4, 4}, 5);
  const auto res = td0_aggregated(mrp, h, {10.0, 40.0}, 20000, Stream(109));
  const double cap = mrp.r_bar / (1.0 - gamma);
  out.push_back(make_check("tdq", "td_iterates_bounded", res.max_abs_theta <= cap, res.max_abs_theta, cap,
                           "sup_t ||theta(t)||_inf <= r_bar/(1-gamma)"));
  const auto q = q_learning_aggregated(mdp, psi1, psi2, {10.0, 40.0}, 20000, Stream(110));
  const double qcap = mdp.r_bar / (1.0 - gamma);
  out.push_back(make_check("tdq", "q_iterates_bounded", q.max_abs_theta <= qcap, q.max_abs_theta, qcap));
  return out;
}

inline std::vector<CheckResult> sac(const ValidateOptions&) {
  std::vector<CheckResult> out;
  const double gamma = 0.9;
  const auto mdp = toggle_mdp(AgentGraph::path(3), gamma);
  LocalizedPolicy pol(mdp->graph(), mdp->state_sizes(), mdp->action_sizes(), 1);
  SACConfig cfg;
  cfg.kappa = 1;
  cfg.T = 2000;
  cfg.H = 4;
  cfg.t0 = 16;
  auto tables = make_critic_tables(*mdp, 1);
  const auto tr = run_inner_loop(*mdp, pol, cfg, tables, Stream(111));
  double biggest = 0.0;
  for (const auto& t : tables) biggest = std::max(biggest, t.max_abs());
  const double cap = mdp->reward_bound() / (1.0 - gamma);
  out.push_back(make_check("sac", "critic_entries_bounded", biggest <= cap, biggest, cap,
                           "step sizes <= 1 keep every entry within r_bar/(1-gamma)"));

  auto stale = make_critic_tables(*mdp, 1);
  bool rejected = false;
  try {
    actor_gradient(tr, stale, pol, mdp->graph(), 1, 0, gamma);
  } catch (const std::invalid_argument&) {
    rejected = true;
  }
  out.push_back(make_check("sac", "gradient_rejects_foreign_critic", rejected, rejected ? 1.0 : 0.0, 1.0));

  const auto before = pol.parameters();
  std::vector<std::vector<double>> zero;
  for (const auto& th : before) zero.emplace_back(th.size(), 0.0);
  actor_step(pol, zero, 3, 10.0);
  out.push_back(make_check("sac", "zero_gradient_is_fixed_point", pol.parameters() == before, 0.0, 0.0));
  return out;
}

inline std::vector<CheckResult> envs(const ValidateOptions&) {
  std::vector<CheckResult> out;
  envs::WirelessConfig wc;
  wc.topology = envs::WirelessTopology::grid(3, 3, 1);
  Stream env(112);
  const auto w = envs::build_wireless(wc, env);
  Stream unused;
  const auto L = w.mdp->sample_links(unused);
  const std::size_t n = w.mdp->num_agents();
  std::size_t bad = 0, collisions = 0;
  Stream rng(113);
  auto s = w.mdp->sample_initial(rng.split(0));
  for (std::size_t t = 0; t < 1000; ++t) {
    std::vector<int> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(w.mdp->action_sizes()[i])));
    auto [next, r] = w.mdp->step(s, a, L, rng.split(1, t));
    std::vector<int> per_ap(static_cast<std::size_t>(wc.topology.num_aps), 0);
    for (std::size_t i = 0; i < n; ++i) {
      bad += r[i] != 0.0 && r[i] != 1.0;
      bad += next[i] < 0 || next[i] >= (1 << wc.d);
      if (r[i] == 1.0) {
        const int y = w.dynamics->effective_target(static_cast<int>(i), s[i], a[i]);
        if (y < 0) ++bad;
        else ++per_ap[static_cast<std::size_t>(y)];
      }
    }
    for (int c : per_ap) collisions += c > 1;
    s = next;
  }
  out.push_back(make_check("envs", "wireless_rewards_and_states_valid", bad == 0, static_cast<double>(bad), 0.0));
  out.push_back(make_check("envs", "wireless_one_delivery_per_access_point", collisions == 0,
                           static_cast<double>(collisions), 0.0));

  envs::SpreadConfig sc;
  sc.graph = AgentGraph::grid(4, 4);
  Stream senv(114);
  const auto sis = envs::build_sis(sc, senv);
  std::size_t sis_bad = 0, asym = 0;
  Stream srng(115);
  auto ss = sis.mdp->sample_initial(srng.split(0));
  for (std::size_t t = 0; t < 500; ++t) {
    std::vector<int> a(16);
    for (int& x : a) x = static_cast<int>(srng.below(2));
    Stream lr = srng.split(1, t);
    const auto SL = sis.mdp->sample_links(lr);
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) asym += SL.ls.contains(i, j) != SL.ls.contains(j, i);
    auto [next, r] = sis.mdp->step(ss, a, SL, srng.split(2, t));
    for (std::size_t i = 0; i < 16; ++i) {
      sis_bad += next[i] != 0 && next[i] != 1;
      sis_bad += r[i] > 0.0;
    }
    ss = next;
  }
  out.push_back(make_check("envs", "sis_states_binary_rewards_nonpositive", sis_bad == 0, static_cast<double>(sis_bad), 0.0));
  out.push_back(make_check("envs", "sis_links_symmetric", asym == 0, static_cast<double>(asym), 0.0));
  return out;
}

inline std::vector<CheckResult> harness(const ValidateOptions& opt) {
  std::vector<CheckResult> out;
  std::string msg;
  try {
    parse_config("{\n  \"env\": {\"kind\": \"sis\"},\n  \"sac\": {\"kapa\": 1}\n}", "probe.json");
  } catch (const ConfigError& e) {
    msg = e.what();
  }
  const bool located = msg.find("probe.json:3:") != std::string::npos;
  out.push_back(make_check("harness", "config_errors_name_line", located, located ? 1.0 : 0.0, 1.0, msg));

  const auto cfg = parse_config(R"({
    "env": {"kind": "tabular", "agents": 3, "links": {"kind": "geometric", "c": 1, "lambda": 0.5}},
    "sac": {"kappa": 1, "T": 200, "M": 3, "H": 2, "t0": 8, "eta": 1},
    "evaluation": {"rollouts": 4},
    "replicates": 2,
    "seed": 5
  })");
  const auto a = opt.out_dir / "harness_a", b = opt.out_dir / "harness_b";
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
  run_experiment(cfg, a);
  run_experiment(cfg, b);
  const auto fa = accept::file_list(a), fb = accept::file_list(b);
  std::size_t diff = fa == fb ? 0 : 1;
  for (const auto& rel : fa)
    if (fa == fb && accept::read_file(a / rel) != accept::read_file(b / rel)) ++diff;
  out.push_back(make_check("harness", "rerun_byte_identical", diff == 0, static_cast<double>(diff), 0.0,
                           std::to_string(fa.size()) + " files compared"));

  const json man = json::parse(accept::read_file(a / "manifest.json"));
  const bool complete = man.contains("sampled_parameters") && man["sampled_parameters"].contains("tables") &&
                        man["sampled_parameters"]["tables"].size() == 3 && man.contains("seed") &&
                        man.contains("resolved") && man.contains("version");
  out.push_back(make_check("harness", "manifest_records_sampled_parameters", complete, complete ? 1.0 : 0.0, 1.0));
  return out;
}

inline std::vector<CheckResult> acceptance(const ValidateOptions& opt) {
  AcceptanceOptions ao = opt.acceptance;
  ao.out_dir = opt.out_dir / "acceptance";
  std::vector<CheckResult> out;
  for (const auto& r : run_acceptance(ao))
    out.push_back(make_check("acceptance", "C" + std::to_string(r.id) + " " + r.name, r.passed, r.measured, r.threshold,
                             r.detail));
  return out;
}

}  // namespace checks

using SuiteFn = std::function<std::vector<CheckResult>(const ValidateOptions&)>;

/// Suites in run order.
inline const std::vector<std::pair<std::string, SuiteFn>>& suites() {
  static const std::vector<std::pair<std::string, SuiteFn>> all = {
      {"netmdp", checks::netmdp}, {"decay", checks::decay},     {"stochapprox", checks::stochapprox},
      {"tdq", checks::tdq},       {"sac", checks::sac},         {"envs", checks::envs},
      {"harness", checks::harness}, {"acceptance", checks::acceptance}};
  return all;
}

/// Runs one suite, or all of them for an empty selector. A throwing check is recorded as a failure.
inline ValidationReport validate(const std::string& selector, const ValidateOptions& opt = {}) {
  ValidationReport rep;
  bool found = selector.empty();
  for (const auto& [name, fn] : suites()) {
    if (!selector.empty() && selector != name) continue;
    found = true;
    try {
      auto got = fn(opt);
      rep.checks.insert(rep.checks.end(), got.begin(), got.end());
    } catch (const std::exception& e) {
      rep.checks.push_back(make_check(name, "suite", false, 0.0, 0.0, std::string("error: ") + e.what()));
    }
  }
  if (!found) {
    std::string names;
    for (const auto& [name, fn] : suites()) names += (names.empty() ? "" : ", ") + name;
    throw std::invalid_argument("validate: unknown suite '" + selector + "' (" + names + ")");
  }
  return rep;
}

}  // namespace netmarl::harness
