#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "netmarl/dynamics.hpp"
#include "netmarl/graph.hpp"
#include "netmarl/links.hpp"
#include "netmarl/rng.hpp"

namespace netmarl {

/// Reusable buffers for NetworkedMDP::step so the hot loop does not allocate.
struct StepScratch {
  std::vector<int> ls_states, ls_actions, lr_states, lr_actions;
  std::vector<double> probs;
};

/**
 * A networked MDP: agent graph, local spaces, link distribution, factorized
 * local dynamics, discount and reward bound. Immutable after construction.
 * The initial distribution is a product of per-agent marginals (uniform
 * unless given).
 */
class NetworkedMDP {
 public:
  NetworkedMDP(AgentGraph graph, std::vector<int> state_sizes, std::vector<int> action_sizes, LinkDistribution links,
               std::shared_ptr<const LocalDynamics> dynamics, double gamma, double reward_bound,
               std::vector<std::vector<double>> initial_marginals = {})
      : graph_(std::move(graph)),
        state_sizes_(std::move(state_sizes)),
        action_sizes_(std::move(action_sizes)),
        sampler_(std::move(links), graph_),
        dynamics_(std::move(dynamics)),
        gamma_(gamma),
        reward_bound_(reward_bound),
        initial_(std::move(initial_marginals)) {
    const std::size_t n = graph_.size();
    if (state_sizes_.size() != n || action_sizes_.size() != n)
      throw std::invalid_argument("NetworkedMDP: space sizes must have one entry per agent");
    for (std::size_t i = 0; i < n; ++i)
      if (state_sizes_[i] < 1 || action_sizes_[i] < 1)
        throw std::invalid_argument("NetworkedMDP: agent " + std::to_string(i) + " has an empty local space");
    if (!dynamics_) throw std::invalid_argument("NetworkedMDP: missing dynamics");
    if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw std::invalid_argument("NetworkedMDP: gamma must lie in [0, 1)");
    if (!(reward_bound_ >= 0.0)) throw std::invalid_argument("NetworkedMDP: reward bound must be nonnegative");
    if (initial_.empty()) {
      for (std::size_t i = 0; i < n; ++i)
        initial_.emplace_back(static_cast<std::size_t>(state_sizes_[i]), 1.0 / state_sizes_[i]);
    }
    if (initial_.size() != n) throw std::invalid_argument("NetworkedMDP: one initial marginal per agent required");
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (double p : initial_[i]) sum += p;
      if (initial_[i].size() != static_cast<std::size_t>(state_sizes_[i]) || std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("NetworkedMDP: initial marginal of agent " + std::to_string(i) + " is not a distribution");
    }
  }

  const AgentGraph& graph() const noexcept { return graph_; }
  std::size_t num_agents() const noexcept { return graph_.size(); }
  const std::vector<int>& state_sizes() const noexcept { return state_sizes_; }
  const std::vector<int>& action_sizes() const noexcept { return action_sizes_; }
  const LinkSampler& link_sampler() const noexcept { return sampler_; }
  const LinkDistribution& link_distribution() const noexcept { return sampler_.distribution(); }
  const LocalDynamics& dynamics() const noexcept { return *dynamics_; }
  double gamma() const noexcept { return gamma_; }
  double reward_bound() const noexcept { return reward_bound_; }
  const std::vector<double>& initial_marginal(int i) const { return initial_.at(static_cast<std::size_t>(i)); }

  /// s(0) ~ pi_0, agent i drawn from rng.split(i).
  std::vector<int> sample_initial(const Stream& rng) const {
    std::vector<int> s(num_agents());
    for (std::size_t i = 0; i < s.size(); ++i) {
      Stream r = rng.split(i);
      s[i] = static_cast<int>(r.categorical(initial_[i]));
    }
    return s;
  }

  ActiveLinkSetPair sample_links(Stream& rng) const { return sampler_.sample(rng); }

  /**
   * One transition under a given link pair. Agent i's next state and reward
   * come from rng.split(i); its kernel sees only (s, a) restricted to
   * N_i(L^s) and its reward only N_i(L^r).
   */
  void step(std::span<const int> s, std::span<const int> a, const ActiveLinkSetPair& links, const Stream& rng,
            std::span<int> next, std::span<double> rewards, StepScratch& scratch) const {
    const std::size_t n = num_agents();
    for (std::size_t i = 0; i < n; ++i) {
      const int agent = static_cast<int>(i);
      const auto ls = links.ls.sources(agent);
      const auto lr = links.lr.sources(agent);
      gather(ls, s, a, scratch.ls_states, scratch.ls_actions);
      gather(lr, s, a, scratch.lr_states, scratch.lr_actions);
      scratch.probs.resize(static_cast<std::size_t>(state_sizes_[i]));
      const LocalContext sctx(agent, ls, scratch.ls_states, scratch.ls_actions);
      const LocalContext rctx(agent, lr, scratch.lr_states, scratch.lr_actions);
      Stream r = rng.split(i);
      const auto [s_next, reward] = dynamics_->sample(sctx, rctx, scratch.probs, r);
      next[i] = s_next;
      rewards[i] = reward;
    }
  }

  std::pair<std::vector<int>, std::vector<double>> step(std::span<const int> s, std::span<const int> a,
                                                        const ActiveLinkSetPair& links, const Stream& rng) const {
    std::vector<int> next(num_agents());
    std::vector<double> rewards(num_agents());
    StepScratch scratch;
    step(s, a, links, rng, next, rewards, scratch);
    return {std::move(next), std::move(rewards)};
  }

  /// Exact P_i(. | s, a, L^s) for oracles.
  void local_transition(int i, std::span<const int> s, std::span<const int> a, const LinkSet& ls,
                        std::span<double> probs) const {
    std::vector<int> st, ac;
    const auto members = ls.sources(i);
    gather(members, s, a, st, ac);
    dynamics_->transition(LocalContext(i, members, st, ac), probs);
  }

  /// Mean r_i(s, a, L^r) for oracles.
  double local_reward(int i, std::span<const int> s, std::span<const int> a, const LinkSet& lr) const {
    std::vector<int> st, ac;
    const auto members = lr.sources(i);
    gather(members, s, a, st, ac);
    return dynamics_->reward(LocalContext(i, members, st, ac));
  }

 private:
  static void gather(std::span<const int> members, std::span<const int> s, std::span<const int> a,
                     std::vector<int>& st, std::vector<int>& ac) {
    st.resize(members.size());
    ac.resize(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
      st[k] = s[static_cast<std::size_t>(members[k])];
      ac[k] = a[static_cast<std::size_t>(members[k])];
    }
  }

  AgentGraph graph_;
  std::vector<int> state_sizes_;
  std::vector<int> action_sizes_;
  LinkSampler sampler_;
  std::shared_ptr<const LocalDynamics> dynamics_;
  double gamma_;
  double reward_bound_;
  std::vector<std::vector<double>> initial_;
};

}  // namespace netmarl
