#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <vector>

#include "netmarl/dynamics.hpp"
#include "netmarl/mdp.hpp"
#include "netmarl/rng.hpp"

namespace netmarl::envs {

struct TabularConfig {
  AgentGraph graph;
  std::vector<int> state_sizes;
  std::vector<int> action_sizes;
  LinkDistribution links = LinkDistribution::static_local(1, 1);
  double gamma = 0.7;
  double reward_lo = 0.0;
  double reward_hi = 1.0;
  double floor = 0.3;  ///< mixing weight of the uniform row, keeps every kernel row full-support
};

/**
 * Random explicit-table networked MDP. One kernel and one reward table is
 * drawn for every link signature N_i(L) that occurs in the (exactly
 * enumerated) link support.
 */
inline std::shared_ptr<const NetworkedMDP> random_tabular_mdp(const TabularConfig& cfg, Stream& rng) {
  const std::size_t n = cfg.graph.size();
  const LinkSupport support = cfg.links.support(cfg.graph);
  if (!support.exact) throw std::invalid_argument("random_tabular_mdp: link support must be enumerable");
  std::vector<std::set<std::vector<int>>> ls_sigs(n), lr_sigs(n);
  for (const auto& e : support.entries)
    for (std::size_t i = 0; i < n; ++i) {
      const auto ls = e.links.ls.sources(static_cast<int>(i));
      const auto lr = e.links.lr.sources(static_cast<int>(i));
      ls_sigs[i].insert(std::vector<int>(ls.begin(), ls.end()));
      lr_sigs[i].insert(std::vector<int>(lr.begin(), lr.end()));
    }
  std::vector<TableDynamics::AgentTables> tables(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto width = static_cast<std::size_t>(cfg.state_sizes[i]);
    for (const auto& sig : ls_sigs[i]) {
      const std::size_t configs = TableDynamics::config_count(sig, cfg.state_sizes, cfg.action_sizes);
      std::vector<double> rows(configs * width);
      for (std::size_t c = 0; c < configs; ++c) {
        double sum = 0.0;
        for (std::size_t k = 0; k < width; ++k) sum += (rows[c * width + k] = -std::log(1.0 - rng.uniform()));
        double total = 0.0;
        for (std::size_t k = 0; k < width; ++k) {
          rows[c * width + k] = (1.0 - cfg.floor) * rows[c * width + k] / sum + cfg.floor / static_cast<double>(width);
          total += rows[c * width + k];
        }
        for (std::size_t k = 0; k < width; ++k) rows[c * width + k] /= total;
      }
      tables[i].kernel.emplace(sig, std::move(rows));
    }
    for (const auto& sig : lr_sigs[i]) {
      const std::size_t configs = TableDynamics::config_count(sig, cfg.state_sizes, cfg.action_sizes);
      std::vector<double> r(configs);
      for (double& v : r) v = rng.uniform(cfg.reward_lo, cfg.reward_hi);
      tables[i].reward.emplace(sig, std::move(r));
    }
  }
  auto dyn = std::make_shared<const TableDynamics>(cfg.state_sizes, cfg.action_sizes, std::move(tables));
  const double r_bar = std::max(std::abs(cfg.reward_lo), std::abs(cfg.reward_hi));
  return std::make_shared<const NetworkedMDP>(cfg.graph, cfg.state_sizes, cfg.action_sizes, cfg.links, dyn, cfg.gamma,
                                              r_bar);
}

}  // namespace netmarl::envs
