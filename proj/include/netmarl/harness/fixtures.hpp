#pragma once

#include <memory>
#include <span>
#include <vector>

#include "netmarl/envs/tabular.hpp"
#include "netmarl/mdp.hpp"
#include "netmarl/rng.hpp"

namespace netmarl::harness {

/**
 * Two-state agents whose reward is +-w(s_i) by own action (w = 1 in state 0,
 * 1/2 in state 1) and whose next state is pushed to 1 with probability 0.8
 * when a neighbour in N_i(L^s) plays action 1, 0.2 otherwise. Under the
 * uniform policy every state has zero value, which keeps the score-function
 * gradient estimator's variance small.
 */
class ToggleDynamics final : public LocalDynamics {
 public:
  void transition(const LocalContext& ctx, std::span<double> probs) const override {
    bool pushed = false;
    for (std::size_t k = 0; k < ctx.size(); ++k)
      if (ctx.members()[k] != ctx.agent() && ctx.action_at(k) == 1) pushed = true;
    probs[1] = pushed ? 0.8 : 0.2;
    probs[0] = 1.0 - probs[1];
  }
  double reward(const LocalContext& ctx) const override {
    return (2.0 * ctx.own_action() - 1.0) * (ctx.own_state() == 0 ? 1.0 : 0.5);
  }
};

inline std::shared_ptr<const NetworkedMDP> toggle_mdp(const AgentGraph& g, double gamma) {
  const std::vector<int> two(g.size(), 2);
  return std::make_shared<const NetworkedMDP>(g, two, two, LinkDistribution::static_local(1, 0),
                                              std::make_shared<const ToggleDynamics>(), gamma, 1.0);
}

/// Random explicit-table path instance with geometric(1, 0.5) links.
inline std::shared_ptr<const NetworkedMDP> tabular_path(std::size_t n, int local_states, int local_actions, double gamma,
                                                        std::uint64_t seed) {
  envs::TabularConfig cfg{AgentGraph::path(n), std::vector<int>(n, local_states), std::vector<int>(n, local_actions)};
  cfg.links = LinkDistribution::geometric(1.0, 0.5);
  cfg.gamma = gamma;
  Stream rng(seed);
  return envs::random_tabular_mdp(cfg, rng);
}

}  // namespace netmarl::harness
