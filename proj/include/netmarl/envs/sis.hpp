#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "netmarl/dynamics.hpp"
#include "netmarl/mdp.hpp"
#include "netmarl/rng.hpp"

namespace netmarl::envs {

struct SisAgentParams {
  double c_s = 0.0;  ///< infection cost
  double c_a = 0.0;  ///< control cost
  double p_r = 0.0;  ///< recovery probability
  double p_h = 0.0;
  double p_m = 0.0;  ///< p_h / 4 unless given
  double p_l = 0.0;  ///< p_m / 4 unless given
};

struct SpreadConfig {
  AgentGraph graph;
  double gamma = 0.7;
  double initial_infection = 0.3;
  std::vector<SisAgentParams> params;  ///< sampled when empty
};

/**
 * SIS spreading: S_i = A_i = {0, 1}. An infected agent recovers with p_r.
 * A susceptible agent stays susceptible with probability
 * (1-p_h)^n (1-p_m)^m when protected (a_i = 1) and (1-p_m)^n (1-p_l)^m
 * otherwise, n and m counting unprotected and protected infected agents in
 * N_i(L^s) other than i.
 */
class SisDynamics final : public LocalDynamics {
 public:
  explicit SisDynamics(std::vector<SisAgentParams> params) : params_(std::move(params)) {}

  const std::vector<SisAgentParams>& params() const noexcept { return params_; }

  double stay_susceptible(const LocalContext& ctx) const {
    const auto& p = params_[static_cast<std::size_t>(ctx.agent())];
    int n = 0, m = 0;
    for (std::size_t k = 0; k < ctx.size(); ++k) {
      if (ctx.members()[k] == ctx.agent() || ctx.state_at(k) != 1) continue;
      (ctx.action_at(k) == 1 ? m : n) += 1;
    }
    if (ctx.own_action() == 1) return std::pow(1.0 - p.p_h, n) * std::pow(1.0 - p.p_m, m);
    return std::pow(1.0 - p.p_m, n) * std::pow(1.0 - p.p_l, m);
  }

  void transition(const LocalContext& ctx, std::span<double> probs) const override {
    const double p0 = ctx.own_state() == 1 ? params_[static_cast<std::size_t>(ctx.agent())].p_r : stay_susceptible(ctx);
    probs[0] = p0;
    probs[1] = 1.0 - p0;
  }

  double reward(const LocalContext& ctx) const override {
    const auto& p = params_[static_cast<std::size_t>(ctx.agent())];
    return -p.c_a * (ctx.own_action() == 1 ? 1.0 : 0.0) - p.c_s * (ctx.own_state() == 1 ? 1.0 : 0.0);
  }

 private:
  std::vector<SisAgentParams> params_;
};

/// Per-agent parameters drawn in agent order: c_s, c_a, p_r, p_h.
inline std::vector<SisAgentParams> sample_sis_params(std::size_t n, Stream& rng) {
  std::vector<SisAgentParams> out(n);
  for (auto& p : out) {
    p.c_s = rng.uniform(1.0, 3.0);
    p.c_a = rng.uniform(0.01, 0.20);
    p.p_r = rng.uniform(0.1, 0.5);
    p.p_h = rng.uniform(0.5, 0.9);
    p.p_m = p.p_h / 4.0;
    p.p_l = p.p_m / 4.0;
  }
  return out;
}

struct SisInstance {
  std::shared_ptr<const NetworkedMDP> mdp;
  std::shared_ptr<const SisDynamics> dynamics;
  std::vector<SisAgentParams> params;
};

/// State links: each unordered pair active with probability 2^{-d(i,j)}; reward links are self-loops only.
inline SisInstance build_sis(const SpreadConfig& cfg, Stream& rng) {
  const std::size_t n = cfg.graph.size();
  if (n == 0) throw std::invalid_argument("sis: empty graph");
  if (!(cfg.initial_infection >= 0.0 && cfg.initial_infection <= 1.0))
    throw std::invalid_argument("sis: initial infection probability must lie in [0, 1]");
  std::vector<SisAgentParams> params = cfg.params.empty() ? sample_sis_params(n, rng) : cfg.params;
  if (params.size() != n) throw std::invalid_argument("sis: one parameter set per agent required");
  double r_bar = 0.0;
  for (const auto& p : params) {
    for (double v : {p.p_r, p.p_h, p.p_m, p.p_l})
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("sis: probabilities must lie in [0, 1]");
    if (!(p.p_h > p.p_m && p.p_m > p.p_l)) throw std::invalid_argument("sis: need p_h > p_m > p_l");
    if (!(p.c_s > 0.0 && p.c_a > 0.0)) throw std::invalid_argument("sis: costs must be positive");
    r_bar = std::max(r_bar, p.c_s + p.c_a);
  }
  auto dyn = std::make_shared<const SisDynamics>(params);
  std::vector<std::vector<double>> init(n, {1.0 - cfg.initial_infection, cfg.initial_infection});
  auto mdp = std::make_shared<const NetworkedMDP>(cfg.graph, std::vector<int>(n, 2), std::vector<int>(n, 2),
                                                  LinkDistribution::geometric(1.0, 0.5, true, false), dyn, cfg.gamma,
                                                  r_bar, init);
  return {mdp, dyn, params};
}

}  // namespace netmarl::envs
