#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "netmarl/dynamics.hpp"
#include "netmarl/mdp.hpp"
#include "netmarl/policy.hpp"
#include "netmarl/rng.hpp"

namespace netmarl::envs {

/// Which access points each user can reach.
struct WirelessTopology {
  int num_aps = 0;
  std::vector<std::vector<int>> user_aps;  ///< Y_i, sorted

  std::size_t num_users() const noexcept { return user_aps.size(); }

  /// h x w cells with c users each; access points on the (h+1) x (w+1) cell corners.
  static WirelessTopology grid(int h, int w, int c) {
    if (h < 1 || w < 1 || c < 1) throw std::invalid_argument("wireless grid: h, w, c must be positive");
    WirelessTopology t;
    t.num_aps = (h + 1) * (w + 1);
    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col)
        for (int k = 0; k < c; ++k)
          t.user_aps.push_back({r * (w + 1) + col, r * (w + 1) + col + 1, (r + 1) * (w + 1) + col,
                                (r + 1) * (w + 1) + col + 1});
    return t;
  }

  /// Number of users with y in Y_j.
  std::vector<int> sharing_counts() const {
    std::vector<int> n(static_cast<std::size_t>(num_aps), 0);
    for (const auto& ys : user_aps)
      for (int y : ys) ++n[static_cast<std::size_t>(y)];
    return n;
  }

  /// Conflict graph: users adjacent iff they share an access point.
  AgentGraph conflict_graph() const {
    std::vector<std::pair<int, int>> edges;
    for (std::size_t i = 0; i < user_aps.size(); ++i)
      for (std::size_t j = i + 1; j < user_aps.size(); ++j) {
        const auto& a = user_aps[i];
        const auto& b = user_aps[j];
        bool share = false;
        for (int y : a) share = share || std::find(b.begin(), b.end(), y) != b.end();
        if (share) edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    return AgentGraph(user_aps.size(), std::move(edges));
  }
};

struct WirelessConfig {
  WirelessTopology topology;
  int d = 2;                      ///< initial life span
  double q = 0.5;                 ///< arrival probability
  double gamma = 0.7;
  std::vector<double> ap_success; ///< p_y per access point; sampled U[0,1] when empty
};

/**
 * Local state: d bits, bit l-1 set when a packet with remaining life l is
 * queued. Local action 0 is empty; action 1 + (l-1)|Y_i| + k sends the
 * life-l packet to the k-th access point of Y_i. Each step: deliveries, then
 * every remaining packet loses one unit of life (life 0 is dropped), then a
 * new packet of life d arrives with probability q.
 */
class WirelessDynamics final : public LocalDynamics {
 public:
  WirelessDynamics(WirelessTopology topo, std::vector<double> p, int d, double q)
      : topo_(std::move(topo)), p_(std::move(p)), d_(d), q_(q) {}

  int life_span() const noexcept { return d_; }
  const WirelessTopology& topology() const noexcept { return topo_; }
  const std::vector<double>& ap_success() const noexcept { return p_; }

  int action_count(int i) const { return 1 + d_ * static_cast<int>(topo_.user_aps[static_cast<std::size_t>(i)].size()); }

  static int encode_action(int life, int ap_index, int num_aps_of_user) { return 1 + (life - 1) * num_aps_of_user + ap_index; }

  /// Access point targeted by an effective send of agent j, or -1 (empty or coerced empty).
  int effective_target(int j, int state, int action) const {
    if (action == 0) return -1;
    const auto& ys = topo_.user_aps[static_cast<std::size_t>(j)];
    const int k = static_cast<int>(ys.size());
    const int life = 1 + (action - 1) / k;
    if (!(state >> (life - 1) & 1)) return -1;
    return ys[static_cast<std::size_t>((action - 1) % k)];
  }

  /// Probability that agent i delivers a packet this step.
  double success_probability(const LocalContext& ctx) const {
    const int i = ctx.agent();
    const int y = effective_target(i, ctx.own_state(), ctx.own_action());
    if (y < 0) return 0.0;
    for (std::size_t k = 0; k < ctx.size(); ++k) {
      const int j = ctx.members()[k];
      if (j != i && effective_target(j, ctx.state_at(k), ctx.action_at(k)) == y) return 0.0;
    }
    return p_[static_cast<std::size_t>(y)];
  }

  void transition(const LocalContext& ctx, std::span<double> probs) const override {
    std::fill(probs.begin(), probs.end(), 0.0);
    const double ps = success_probability(ctx);
    const int s = ctx.own_state();
    const int sent_bit = ps > 0.0 ? 1 << ((ctx.own_action() - 1) / kdiv(ctx.agent())) : 0;
    add_outcomes(s, 1.0 - ps, probs);
    if (ps > 0.0) add_outcomes(s & ~sent_bit, ps, probs);
  }

  double reward(const LocalContext& ctx) const override { return success_probability(ctx); }

  /// Reward and delivery share one coin so a realized reward of 1 always removes the packet.
  std::pair<int, double> sample(const LocalContext& sctx, const LocalContext& rctx, std::span<double>,
                                Stream& rng) const override {
    const double ps = success_probability(rctx);
    const bool delivered = rng.uniform() < ps;
    int s = sctx.own_state();
    if (delivered) s &= ~(1 << ((sctx.own_action() - 1) / kdiv(sctx.agent())));
    const bool arrival = rng.bernoulli(q_);
    return {age(s) | (arrival ? 1 << (d_ - 1) : 0), delivered ? 1.0 : 0.0};
  }

 private:
  int kdiv(int i) const { return static_cast<int>(topo_.user_aps[static_cast<std::size_t>(i)].size()); }
  int age(int s) const { return s >> 1; }

  void add_outcomes(int s_after_send, double mass, std::span<double> probs) const {
    if (mass <= 0.0) return;
    const int aged = age(s_after_send);
    probs[static_cast<std::size_t>(aged)] += mass * (1.0 - q_);
    probs[static_cast<std::size_t>(aged | 1 << (d_ - 1))] += mass * q_;
  }

  WirelessTopology topo_;
  std::vector<double> p_;
  int d_;
  double q_;
};

struct WirelessInstance {
  std::shared_ptr<const NetworkedMDP> mdp;
  std::shared_ptr<const WirelessDynamics> dynamics;
  std::vector<double> ap_success;  ///< resolved p_y, recorded in run manifests
};

/// Builds the networked MDP; missing p_y are drawn U[0,1] from rng in access-point order.
inline WirelessInstance build_wireless(const WirelessConfig& cfg, Stream& rng) {
  if (cfg.d < 1 || cfg.d > 20) throw std::invalid_argument("wireless: life span d must lie in [1, 20]");
  if (!(cfg.q >= 0.0 && cfg.q <= 1.0)) throw std::invalid_argument("wireless: q must lie in [0, 1]");
  if (cfg.topology.num_users() == 0) throw std::invalid_argument("wireless: no users");
  for (const auto& ys : cfg.topology.user_aps) {
    if (ys.empty()) throw std::invalid_argument("wireless: every user needs at least one access point");
    for (int y : ys)
      if (y < 0 || y >= cfg.topology.num_aps) throw std::invalid_argument("wireless: access point index out of range");
  }
  std::vector<double> p = cfg.ap_success;
  if (p.empty())
    for (int y = 0; y < cfg.topology.num_aps; ++y) p.push_back(rng.uniform());
  if (p.size() != static_cast<std::size_t>(cfg.topology.num_aps))
    throw std::invalid_argument("wireless: one success probability per access point required");
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("wireless: success probabilities must lie in [0, 1]");

  auto dyn = std::make_shared<const WirelessDynamics>(cfg.topology, p, cfg.d, cfg.q);
  const std::size_t n = cfg.topology.num_users();
  std::vector<int> S(n, 1 << cfg.d), A(n);
  for (std::size_t i = 0; i < n; ++i) A[i] = dyn->action_count(static_cast<int>(i));
  auto mdp = std::make_shared<const NetworkedMDP>(cfg.topology.conflict_graph(), S, A, LinkDistribution::static_local(1, 1),
                                                  dyn, cfg.gamma, 1.0);
  return {mdp, dyn, p};
}

/**
 * Localized ALOHA: with probability p_empty do nothing; otherwise send the
 * packet with the smallest remaining life to y in Y_i chosen with
 * probability proportional to p_y / (users sharing y).
 */
class AlohaPolicy final : public JointPolicy {
 public:
  AlohaPolicy(std::shared_ptr<const WirelessDynamics> dyn, double p_empty) : dyn_(std::move(dyn)), p_empty_(p_empty) {
    if (!(p_empty >= 0.0 && p_empty <= 1.0)) throw std::invalid_argument("AlohaPolicy: p_empty must lie in [0, 1]");
    const auto& topo = dyn_->topology();
    const auto shares = topo.sharing_counts();
    for (const auto& ys : topo.user_aps) {
      std::vector<double> w;
      double total = 0.0;
      for (int y : ys) {
        w.push_back(dyn_->ap_success()[static_cast<std::size_t>(y)] / shares[static_cast<std::size_t>(y)]);
        total += w.back();
      }
      for (double& x : w) x = total > 0.0 ? x / total : 1.0 / static_cast<double>(ys.size());
      weights_.push_back(std::move(w));
    }
  }

  double p_empty() const noexcept { return p_empty_; }
  std::size_t num_agents() const override { return weights_.size(); }
  int action_count(int i) const override { return dyn_->action_count(i); }

  /// Reads s_i only.
  void distribution(int i, std::span<const int> s, std::span<double> probs) const override {
    std::fill(probs.begin(), probs.end(), 0.0);
    const int state = s[static_cast<std::size_t>(i)];
    if (state == 0) {
      probs[0] = 1.0;
      return;
    }
    int life = 1;
    while (!(state >> (life - 1) & 1)) ++life;
    const auto& w = weights_[static_cast<std::size_t>(i)];
    probs[0] = p_empty_;
    for (std::size_t k = 0; k < w.size(); ++k)
      probs[static_cast<std::size_t>(WirelessDynamics::encode_action(life, static_cast<int>(k), static_cast<int>(w.size())))] +=
          (1.0 - p_empty_) * w[k];
  }

 private:
  std::shared_ptr<const WirelessDynamics> dyn_;
  double p_empty_;
  std::vector<std::vector<double>> weights_;
};

}  // namespace netmarl::envs
