#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "netmarl/codec.hpp"
#include "netmarl/mdp.hpp"
#include "netmarl/policy.hpp"
#include "netmarl/rng.hpp"

namespace netmarl {

struct SACConfig {
  int kappa = 1;
  int beta = 0;
  std::size_t T = 1000;   ///< inner-loop length
  std::size_t M = 10;     ///< outer iterations
  double H = 1.0;
  double t0 = 1.0;
  double eta = 0.1;       ///< actor base step; eta_m = eta / sqrt(m + 1)
  std::uint64_t seed = 0;
  bool warm_start = false;  ///< keep critic tables across outer iterations instead of re-zeroing
  // Theory constants, when known; used only to check the step-size preconditions.
  std::optional<double> sigma_prime;
  std::optional<double> K2;
  std::optional<double> W_prime;
};

/// Step-size preconditions that can be checked with the constants at hand; each failure is a warning.
inline std::vector<std::string> check_config(const SACConfig& cfg, double gamma) {
  std::vector<std::string> w;
  if (cfg.sigma_prime) {
    const double h_min = 2.0 / ((1.0 - gamma) * *cfg.sigma_prime);
    if (cfg.H < h_min * (1.0 - 1e-12))
      w.push_back("H=" + std::to_string(cfg.H) + " below 2/((1-gamma)sigma')=" + std::to_string(h_min));
  } else {
    w.push_back("sigma'(kappa) unknown: H precondition unverified");
  }
  if (cfg.K2) {
    const double t0_req = std::max(4.0 * cfg.H, 2.0 * *cfg.K2 * std::log(static_cast<double>(std::max<std::size_t>(cfg.T, 2))));
    if (std::abs(cfg.t0 - t0_req) > 1e-9 * std::max(1.0, t0_req))
      w.push_back("t0=" + std::to_string(cfg.t0) + " differs from max(4H, 2 K2 ln T)=" + std::to_string(t0_req));
  } else {
    w.push_back("K2 unknown: t0 precondition unverified");
  }
  if (cfg.W_prime) {
    if (cfg.eta > 1.0 / (4.0 * *cfg.W_prime))
      w.push_back("eta=" + std::to_string(cfg.eta) + " above 1/(4W')=" + std::to_string(1.0 / (4.0 * *cfg.W_prime)));
  } else {
    w.push_back("W' unknown: actor step precondition unverified");
  }
  return w;
}

/**
 * Agent i's critic over (s_{N_i^kappa}, a_{N_i^kappa}). Small tuple spaces
 * use a dense array; larger ones a hash map with default 0, which behaves
 * identically since unvisited entries are never written.
 */
class TruncatedQTable {
 public:
  static constexpr std::uint64_t kDenseLimit = std::uint64_t{1} << 20;

  TruncatedQTable() = default;
  TruncatedQTable(int agent, int kappa, NeighborhoodCodec codec)
      : agent_(agent), kappa_(kappa), codec_(std::move(codec)) {
    if (codec_.size() <= kDenseLimit) dense_.assign(static_cast<std::size_t>(codec_.size()), 0.0);
  }

  int agent() const noexcept { return agent_; }
  int kappa() const noexcept { return kappa_; }
  const NeighborhoodCodec& codec() const noexcept { return codec_; }
  std::uint64_t size() const noexcept { return codec_.size(); }
  bool is_dense() const noexcept { return !dense_.empty() || codec_.size() == 0; }
  std::uint64_t provenance() const noexcept { return provenance_; }
  void set_provenance(std::uint64_t p) noexcept { provenance_ = p; }

  double get(std::uint64_t code) const {
    if (!dense_.empty()) return dense_[static_cast<std::size_t>(code)];
    auto it = sparse_.find(code);
    return it == sparse_.end() ? 0.0 : it->second;
  }

  double& at(std::uint64_t code) {
    if (!dense_.empty()) return dense_[static_cast<std::size_t>(code)];
    return sparse_[code];
  }

  void reset() {
    if (!dense_.empty()) std::fill(dense_.begin(), dense_.end(), 0.0);
    sparse_.clear();
  }

  /// Largest |entry| stored.
  double max_abs() const {
    double m = 0.0;
    for (double v : dense_) m = std::max(m, std::abs(v));
    for (const auto& [k, v] : sparse_) m = std::max(m, std::abs(v));
    return m;
  }

  std::size_t stored_entries() const noexcept { return dense_.empty() ? sparse_.size() : dense_.size(); }

 private:
  int agent_ = 0;
  int kappa_ = 0;
  NeighborhoodCodec codec_;
  std::vector<double> dense_;
  std::unordered_map<std::uint64_t, double> sparse_;
  std::uint64_t provenance_ = 0;
};

/// Q[prev] <- (1 - alpha) Q[prev] + alpha (r + gamma Q[curr]).
inline void critic_update(TruncatedQTable& table, std::uint64_t prev, double r, std::uint64_t curr, double alpha,
                          double gamma) {
  const double target = r + gamma * table.get(curr);
  double& q = table.at(prev);
  q = (1.0 - alpha) * q + alpha * target;
}

/// Shared trajectory of one inner loop, t = 0..T.
struct Trajectory {
  std::size_t n = 0;
  std::size_t length = 0;             ///< T + 1 recorded time steps
  std::vector<int> states;            ///< [t * n + i]
  std::vector<int> actions;           ///< [t * n + i]
  std::vector<double> rewards;        ///< [t * n + i], r_i(t)
  std::vector<std::uint64_t> codes;   ///< [t * n + i], agent i's critic index of (s_{N_i^kappa}(t), a_{N_i^kappa}(t))
  std::uint64_t provenance = 0;

  std::span<const int> state(std::size_t t) const { return {states.data() + t * n, n}; }
  std::span<const int> action(std::size_t t) const { return {actions.data() + t * n, n}; }
  double reward(std::size_t t, std::size_t i) const { return rewards[t * n + i]; }
  std::uint64_t code(std::size_t t, std::size_t i) const { return codes[t * n + i]; }

  /// Realized sum_t gamma^t (1/n) sum_i r_i(t).
  double discounted_return(double gamma) const {
    double total = 0.0, g = 1.0;
    for (std::size_t t = 0; t < length && g != 0.0; ++t, g *= gamma) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += rewards[t * n + i];
      total += g * s / static_cast<double>(n);
    }
    return total;
  }
};

inline std::vector<TruncatedQTable> make_critic_tables(const NetworkedMDP& mdp, int kappa) {
  std::vector<TruncatedQTable> tables;
  for (std::size_t i = 0; i < mdp.num_agents(); ++i) {
    const int agent = static_cast<int>(i);
    tables.emplace_back(agent, kappa,
                        NeighborhoodCodec(mdp.graph().khop(agent, kappa), mdp.state_sizes(), mdp.action_sizes()));
  }
  return tables;
}

namespace detail {
inline std::uint64_t next_provenance() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}
}  // namespace detail

/**
 * Lines 2-8 of the actor-critic loop: one shared trajectory of length T + 1
 * from s(0) ~ pi_0; at each t >= 1 every agent updates its own table at
 * z_i(t-1) with reward r_i(t-1) and step alpha_{t-1} = H / (t - 1 + t0).
 * Tables are updated in place; the returned trajectory carries their
 * provenance token.
 */
inline Trajectory run_inner_loop(const NetworkedMDP& mdp, const JointPolicy& policy, const SACConfig& cfg,
                                 std::vector<TruncatedQTable>& tables, const Stream& rng) {
  const std::size_t n = mdp.num_agents();
  if (tables.size() != n) throw std::invalid_argument("run_inner_loop: one critic table per agent required");
  const double gamma = mdp.gamma();
  Trajectory tr;
  tr.n = n;
  tr.length = cfg.T + 1;
  tr.states.resize(tr.length * n);
  tr.actions.resize(tr.length * n);
  tr.rewards.resize(tr.length * n);
  tr.codes.resize(tr.length * n);
  tr.provenance = detail::next_provenance();

  const LinkSampler& sampler = mdp.link_sampler();
  ActiveLinkSetPair fixed;
  if (sampler.deterministic()) {
    Stream unused;
    fixed = sampler.sample(unused);
  }
  ActiveLinkSetPair drawn;
  StepScratch scratch;
  std::vector<int> s = mdp.sample_initial(rng.split(stream_tag::kInitial));
  std::vector<int> a(n), next(n);
  std::vector<double> r(n);

  for (std::size_t t = 0; t <= cfg.T; ++t) {
    policy.sample_joint(s, rng.split(stream_tag::kAction, t), a);
    std::copy(s.begin(), s.end(), tr.states.begin() + static_cast<std::ptrdiff_t>(t * n));
    std::copy(a.begin(), a.end(), tr.actions.begin() + static_cast<std::ptrdiff_t>(t * n));
    for (std::size_t i = 0; i < n; ++i) tr.codes[t * n + i] = tables[i].codec().encode(s, a);
    if (t >= 1) {
      const double alpha = cfg.H / (static_cast<double>(t - 1) + cfg.t0);
      for (std::size_t i = 0; i < n; ++i)
        critic_update(tables[i], tr.codes[(t - 1) * n + i], tr.rewards[(t - 1) * n + i], tr.codes[t * n + i], alpha,
                      gamma);
    }
    // r(t) is needed for the update at t + 1 (and for the return estimate at t = T).
    const ActiveLinkSetPair* links = &fixed;
    if (!sampler.deterministic()) {
      Stream lr = rng.split(stream_tag::kLinks, t);
      drawn = sampler.sample(lr);
      links = &drawn;
    }
    mdp.step(s, a, *links, rng.split(stream_tag::kTransition, t), next, r, scratch);
    std::copy(r.begin(), r.end(), tr.rewards.begin() + static_cast<std::ptrdiff_t>(t * n));
    s.swap(next);
  }
  for (auto& tab : tables) tab.set_provenance(tr.provenance);
  return tr;
}

/**
 * g_i = sum_{t=0}^T gamma^t (1/n) sum_{j in N_i^kappa} value(j, t) grad log zeta_i(a_i(t) | s_{N_i^beta}(t)).
 * The sum stops once gamma^t underflows to zero.
 */
inline std::vector<double> actor_gradient_from(const Trajectory& tr, const LocalizedPolicy& policy,
                                               std::span<const int> neighbors, int i, double gamma,
                                               const std::function<double(int, std::size_t)>& value) {
  std::vector<double> g(policy.theta(i).size(), 0.0);
  double w = 1.0;
  const double inv_n = 1.0 / static_cast<double>(tr.n);
  for (std::size_t t = 0; t < tr.length && w != 0.0; ++t, w *= gamma) {
    double q = 0.0;
    for (int j : neighbors) q += value(j, t);
    const auto s = tr.state(t);
    policy.accumulate_log_gradient(i, policy.neighborhood_index(i, s), tr.action(t)[static_cast<std::size_t>(i)],
                                   w * q * inv_n, g);
  }
  return g;
}

inline std::vector<double> actor_gradient(const Trajectory& tr, const std::vector<TruncatedQTable>& tables,
                                          const LocalizedPolicy& policy, const AgentGraph& graph, int kappa, int i,
                                          double gamma) {
  for (const auto& tab : tables)
    if (tab.provenance() != tr.provenance)
      throw std::invalid_argument("actor_gradient: critic table of agent " + std::to_string(tab.agent()) +
                                  " does not come from this trajectory's inner loop");
  const std::vector<int> nb = graph.khop(i, kappa);
  return actor_gradient_from(tr, policy, nb, i, gamma, [&](int j, std::size_t t) {
    return tables[static_cast<std::size_t>(j)].get(tr.code(t, static_cast<std::size_t>(j)));
  });
}

/// theta_i += eta / sqrt(m + 1) * g_i for every agent.
inline void actor_step(LocalizedPolicy& policy, const std::vector<std::vector<double>>& grads, std::size_t m, double eta) {
  if (grads.size() != policy.num_agents()) throw std::invalid_argument("actor_step: one gradient per agent required");
  const double step = eta / std::sqrt(static_cast<double>(m) + 1.0);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& th = policy.theta(static_cast<int>(i));
    if (grads[i].size() != th.size()) throw std::invalid_argument("actor_step: gradient shape mismatch");
    for (std::size_t k = 0; k < th.size(); ++k) th[k] += step * grads[i][k];
  }
}

struct IterationMetrics {
  std::size_t m = 0;
  std::size_t t_total = 0;                         ///< cumulative environment steps
  double return_estimate = 0.0;
  double return_exact = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = 0.0;
  double max_critic_residual = std::numeric_limits<double>::quiet_NaN();
  double max_abs_critic = 0.0;
};

struct TrainingRecord {
  std::vector<IterationMetrics> iterations;
  std::vector<std::string> warnings;
};

struct TrainingCallbacks {
  /// Runs after the critic phase and before the actor step; may fill oracle metrics.
  std::function<void(std::size_t m, const LocalizedPolicy&, const std::vector<TruncatedQTable>&, const Trajectory&,
                     IterationMetrics&)>
      on_critic;
  /// Runs after the actor step.
  std::function<void(const IterationMetrics&, const LocalizedPolicy&)> on_iteration;
};

/// The full actor-critic loop; `policy` is updated in place.
inline TrainingRecord train(const NetworkedMDP& mdp, LocalizedPolicy& policy, const SACConfig& cfg,
                            const TrainingCallbacks& cb = {}) {
  TrainingRecord rec;
  rec.warnings = check_config(cfg, mdp.gamma());
  const Stream root(cfg.seed);
  std::vector<TruncatedQTable> tables = make_critic_tables(mdp, cfg.kappa);
  std::vector<std::vector<int>> nbs;
  for (std::size_t i = 0; i < mdp.num_agents(); ++i) nbs.push_back(mdp.graph().khop(static_cast<int>(i), cfg.kappa));
  std::size_t t_total = 0;
  for (std::size_t m = 0; m < cfg.M; ++m) {
    if (!cfg.warm_start)
      for (auto& tab : tables) tab.reset();
    const Trajectory tr = run_inner_loop(mdp, policy, cfg, tables, root.split(stream_tag::kOuter, m));
    t_total += tr.length;
    IterationMetrics it;
    it.m = m;
    it.t_total = t_total;
    it.return_estimate = tr.discounted_return(mdp.gamma());
    for (const auto& tab : tables) it.max_abs_critic = std::max(it.max_abs_critic, tab.max_abs());
    if (cb.on_critic) cb.on_critic(m, policy, tables, tr, it);
    std::vector<std::vector<double>> grads;
    double sq = 0.0;
    for (std::size_t i = 0; i < mdp.num_agents(); ++i) {
      grads.push_back(actor_gradient_from(tr, policy, nbs[i], static_cast<int>(i), mdp.gamma(),
                                          [&](int j, std::size_t t) {
                                            return tables[static_cast<std::size_t>(j)].get(
                                                tr.code(t, static_cast<std::size_t>(j)));
                                          }));
      for (double g : grads.back()) sq += g * g;
    }
    it.grad_norm = std::sqrt(sq);
    actor_step(policy, grads, m, cfg.eta);
    rec.iterations.push_back(it);
    if (cb.on_iteration) cb.on_iteration(it, policy);
  }
  return rec;
}

}  // namespace netmarl
