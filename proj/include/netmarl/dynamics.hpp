#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "netmarl/rng.hpp"

namespace netmarl {

/**
 * The coordinates visible to agent i's kernel or reward under one link set:
 * (s_j, a_j) for j in N_i(L) only. Asking for any other agent throws, which
 * is how the factorized-transition contract is enforced.
 */
class LocalContext {
 public:
  LocalContext(int agent, std::span<const int> members, std::span<const int> states, std::span<const int> actions)
      : agent_(agent), members_(members), states_(states), actions_(actions) {}

  int agent() const noexcept { return agent_; }
  std::span<const int> members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }

  int state_at(std::size_t k) const { return states_[k]; }
  int action_at(std::size_t k) const { return actions_[k]; }

  int state(int j) const { return states_[position(j)]; }
  int action(int j) const { return actions_[position(j)]; }
  int own_state() const { return state(agent_); }
  int own_action() const { return action(agent_); }

  bool contains(int j) const noexcept { return std::binary_search(members_.begin(), members_.end(), j); }

 private:
  std::size_t position(int j) const {
    auto it = std::lower_bound(members_.begin(), members_.end(), j);
    if (it == members_.end() || *it != j)
      throw std::out_of_range("agent " + std::to_string(agent_) + " read coordinate of agent " + std::to_string(j) +
                              " outside its active neighbourhood");
    return static_cast<std::size_t>(it - members_.begin());
  }

  int agent_;
  std::span<const int> members_;
  std::span<const int> states_;
  std::span<const int> actions_;
};

/// Per-agent transition kernels P_i and reward functions r_i of a networked MDP.
class LocalDynamics {
 public:
  virtual ~LocalDynamics() = default;

  /// Writes P_i(. | s_{N_i(L^s)}, a_{N_i(L^s)}) into `probs` (size |S_i|).
  virtual void transition(const LocalContext& state_ctx, std::span<double> probs) const = 0;

  /// Mean reward r_i given the reward neighbourhood N_i(L^r).
  virtual double reward(const LocalContext& reward_ctx) const = 0;

  /**
   * Draws (s_i', r_i). The default draws s_i' from transition() and returns
   * the mean reward; environments whose realized reward is coupled to the
   * transition outcome override this, keeping the same marginals.
   */
  virtual std::pair<int, double> sample(const LocalContext& state_ctx, const LocalContext& reward_ctx,
                                        std::span<double> scratch, Stream& rng) const {
    transition(state_ctx, scratch);
    return {static_cast<int>(rng.categorical(scratch)), reward(reward_ctx)};
  }
};

/// Result of checking one kernel table; `message` names the offending row.
struct KernelCheck {
  bool ok = true;
  std::string message;
};

/**
 * Explicit conditional-probability tables keyed by (link signature N_i(L),
 * neighbourhood configuration). The configuration index is mixed radix over
 * the signature members in ascending order with digit s_j * |A_j| + a_j.
 */
class TableDynamics final : public LocalDynamics {
 public:
  struct AgentTables {
    /// signature -> row-major [config][next local state]
    std::map<std::vector<int>, std::vector<double>> kernel;
    /// signature -> [config]
    std::map<std::vector<int>, std::vector<double>> reward;
  };

  TableDynamics(std::vector<int> state_sizes, std::vector<int> action_sizes, std::vector<AgentTables> tables)
      : state_sizes_(std::move(state_sizes)), action_sizes_(std::move(action_sizes)), tables_(std::move(tables)) {
    if (tables_.size() != state_sizes_.size() || action_sizes_.size() != state_sizes_.size())
      throw std::invalid_argument("TableDynamics: per-agent table count mismatch");
    const KernelCheck check = validate(state_sizes_, action_sizes_, tables_);
    if (!check.ok) throw std::invalid_argument("TableDynamics: " + check.message);
  }

  /// Checks shapes and that every kernel row is a probability vector (sum within 1e-12).
  static KernelCheck validate(std::span<const int> state_sizes, std::span<const int> action_sizes,
                              std::span<const AgentTables> tables) {
    for (std::size_t i = 0; i < tables.size(); ++i) {
      for (const auto& [sig, rows] : tables[i].kernel) {
        const std::size_t configs = config_count(sig, state_sizes, action_sizes);
        const auto width = static_cast<std::size_t>(state_sizes[i]);
        if (rows.size() != configs * width) {
          std::ostringstream os;
          os << "agent " << i << " signature " << signature_string(sig) << ": kernel has " << rows.size()
             << " entries, expected " << configs * width;
          return {false, os.str()};
        }
        for (std::size_t c = 0; c < configs; ++c) {
          double sum = 0.0;
          bool negative = false;
          for (std::size_t k = 0; k < width; ++k) {
            sum += rows[c * width + k];
            negative = negative || rows[c * width + k] < 0.0;
          }
          if (negative || std::abs(sum - 1.0) > 1e-12) {
            std::ostringstream os;
            os.precision(17);
            os << "agent " << i << " signature " << signature_string(sig) << " row " << c
               << (negative ? " has a negative entry" : " sums to ") << (negative ? "" : std::to_string(sum));
            return {false, os.str()};
          }
        }
      }
      for (const auto& [sig, values] : tables[i].reward)
        if (values.size() != config_count(sig, state_sizes, action_sizes)) {
          std::ostringstream os;
          os << "agent " << i << " signature " << signature_string(sig) << ": reward table size mismatch";
          return {false, os.str()};
        }
    }
    return {};
  }

  void transition(const LocalContext& ctx, std::span<double> probs) const override {
    const auto& tab = lookup(tables_.at(static_cast<std::size_t>(ctx.agent())).kernel, ctx, "kernel");
    const auto width = static_cast<std::size_t>(state_sizes_[static_cast<std::size_t>(ctx.agent())]);
    const std::size_t row = config_index(ctx);
    std::copy_n(tab.begin() + static_cast<std::ptrdiff_t>(row * width), width, probs.begin());
  }

  double reward(const LocalContext& ctx) const override {
    const auto& tab = lookup(tables_.at(static_cast<std::size_t>(ctx.agent())).reward, ctx, "reward");
    return tab[config_index(ctx)];
  }

  const std::vector<AgentTables>& tables() const noexcept { return tables_; }

  static std::size_t config_count(const std::vector<int>& sig, std::span<const int> state_sizes,
                                  std::span<const int> action_sizes) {
    std::size_t c = 1;
    for (int j : sig) c *= static_cast<std::size_t>(state_sizes[j] * action_sizes[j]);
    return c;
  }

 private:
  static std::string signature_string(const std::vector<int>& sig) {
    std::string s = "{";
    for (std::size_t k = 0; k < sig.size(); ++k) s += (k ? "," : "") + std::to_string(sig[k]);
    return s + "}";
  }

  const std::vector<double>& lookup(const std::map<std::vector<int>, std::vector<double>>& m, const LocalContext& ctx,
                                    const char* what) const {
    const std::vector<int> sig(ctx.members().begin(), ctx.members().end());
    auto it = m.find(sig);
    if (it == m.end())
      throw std::out_of_range(std::string("TableDynamics: no ") + what + " table for agent " +
                              std::to_string(ctx.agent()) + " signature " + signature_string(sig));
    return it->second;
  }

  std::size_t config_index(const LocalContext& ctx) const {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < ctx.size(); ++k) {
      const auto j = static_cast<std::size_t>(ctx.members()[k]);
      const auto radix = static_cast<std::size_t>(state_sizes_[j] * action_sizes_[j]);
      idx = idx * radix + static_cast<std::size_t>(ctx.state_at(k) * action_sizes_[j] + ctx.action_at(k));
    }
    return idx;
  }

  std::vector<int> state_sizes_;
  std::vector<int> action_sizes_;
  std::vector<AgentTables> tables_;
};

}  // namespace netmarl
