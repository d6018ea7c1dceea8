#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "netmarl/graph.hpp"
#include "netmarl/rng.hpp"

namespace netmarl {

/**
 * Directed active link set over n agents. A pair (j, i) means "j affects i".
 * Self-loops are always present; the set is stored as sorted in-neighbour
 * lists N_i(L).
 */
class LinkSet {
 public:
  LinkSet() = default;
  explicit LinkSet(std::size_t n) : in_(n) {
    for (std::size_t i = 0; i < n; ++i) in_[i].push_back(static_cast<int>(i));
  }

  std::size_t num_agents() const noexcept { return in_.size(); }

  void add(int from, int to) {
    auto& v = in_.at(static_cast<std::size_t>(to));
    if (from < 0 || static_cast<std::size_t>(from) >= in_.size()) throw std::out_of_range("LinkSet::add: source out of range");
    auto it = std::lower_bound(v.begin(), v.end(), from);
    if (it == v.end() || *it != from) v.insert(it, from);
  }

  bool contains(int from, int to) const {
    const auto& v = in_.at(static_cast<std::size_t>(to));
    return std::binary_search(v.begin(), v.end(), from);
  }

  /// N_i(L): every agent j with (j, i) in L, including i.
  std::span<const int> sources(int i) const { return in_.at(static_cast<std::size_t>(i)); }

  std::size_t num_links() const noexcept {
    std::size_t k = 0;
    for (const auto& v : in_) k += v.size();
    return k;
  }

  std::vector<std::pair<int, int>> pairs() const {
    std::vector<std::pair<int, int>> out;
    for (std::size_t i = 0; i < in_.size(); ++i)
      for (int j : in_[i]) out.emplace_back(j, static_cast<int>(i));
    std::sort(out.begin(), out.end());
    return out;
  }

  friend bool operator==(const LinkSet&, const LinkSet&) = default;

 private:
  std::vector<std::vector<int>> in_;
};

/// One draw (L^s, L^r) for a single time step.
struct ActiveLinkSetPair {
  LinkSet ls;
  LinkSet lr;
  friend bool operator==(const ActiveLinkSetPair&, const ActiveLinkSetPair&) = default;
};

struct WeightedLinkPair {
  double probability = 0.0;
  ActiveLinkSetPair links;
};

/// Finite (possibly Monte-Carlo) representation of the link distribution used by oracles.
struct LinkSupport {
  std::vector<WeightedLinkPair> entries;
  bool exact = true;
  std::size_t mc_samples = 0;
};

class LinkDistribution {
 public:
  enum class Kind { kStaticLocal, kGeometric, kCustomTable };

  /// Deterministic link sets: every pair within alpha1 hops for L^s, within alpha2 hops for L^r.
  static LinkDistribution static_local(int alpha1, int alpha2) {
    if (alpha1 < 0 || alpha2 < 0) throw std::invalid_argument("static_local: radii must be nonnegative");
    LinkDistribution d;
    d.kind_ = Kind::kStaticLocal;
    d.alpha1_ = alpha1;
    d.alpha2_ = alpha2;
    return d;
  }

  /**
   * Each non-self pair (j, i) enters L^s and, independently, L^r with
   * probability min(1, c * lambda^{d(i,j)}). With `symmetric`, one draw per
   * unordered pair adds both directions. With `reward_links` false, L^r holds
   * self-loops only.
   */
  static LinkDistribution geometric(double c, double lambda, bool symmetric = false, bool reward_links = true) {
    if (!(c >= 0.0) || !(lambda >= 0.0) || !(lambda <= 1.0))
      throw std::invalid_argument("geometric links: need c >= 0 and lambda in [0, 1]");
    LinkDistribution d;
    d.kind_ = Kind::kGeometric;
    d.c_ = c;
    d.lambda_ = lambda;
    d.symmetric_ = symmetric;
    d.reward_links_ = reward_links;
    return d;
  }

  /// Joint table over (L^s, L^r); allows correlated state and reward links.
  static LinkDistribution custom(std::vector<WeightedLinkPair> table) {
    if (table.empty()) throw std::invalid_argument("custom links: empty table");
    double total = 0.0;
    for (const auto& e : table) {
      if (!(e.probability >= 0.0)) throw std::invalid_argument("custom links: negative probability");
      total += e.probability;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("custom links: probabilities sum to " + std::to_string(total));
    LinkDistribution d;
    d.kind_ = Kind::kCustomTable;
    d.table_ = std::move(table);
    return d;
  }

  Kind kind() const noexcept { return kind_; }
  int alpha1() const noexcept { return alpha1_; }
  int alpha2() const noexcept { return alpha2_; }
  double c() const noexcept { return c_; }
  double lambda() const noexcept { return lambda_; }
  bool symmetric() const noexcept { return symmetric_; }
  bool reward_links() const noexcept { return reward_links_; }
  const std::vector<WeightedLinkPair>& table() const noexcept { return table_; }

  bool pairwise_independent() const noexcept { return kind_ != Kind::kCustomTable; }

  /// P{(from, to) in L^s} for the pairwise-independent kinds.
  double state_link_probability(const AgentGraph& g, int from, int to) const {
    if (from == to) return 1.0;
    const int d = g.distance(from, to);
    switch (kind_) {
      case Kind::kStaticLocal: return d <= alpha1_ ? 1.0 : 0.0;
      case Kind::kGeometric: return geometric_probability(d);
      case Kind::kCustomTable: break;
    }
    double p = 0.0;
    for (const auto& e : table_)
      if (e.links.ls.contains(from, to)) p += e.probability;
    return p;
  }

  double reward_link_probability(const AgentGraph& g, int from, int to) const {
    if (from == to) return 1.0;
    const int d = g.distance(from, to);
    switch (kind_) {
      case Kind::kStaticLocal: return d <= alpha2_ ? 1.0 : 0.0;
      case Kind::kGeometric: return reward_links_ ? geometric_probability(d) : 0.0;
      case Kind::kCustomTable: break;
    }
    double p = 0.0;
    for (const auto& e : table_)
      if (e.links.lr.contains(from, to)) p += e.probability;
    return p;
  }

  ActiveLinkSetPair sample(const AgentGraph& g, Stream& rng) const {
    const std::size_t n = g.size();
    if (kind_ == Kind::kCustomTable) {
      std::vector<double> w;
      w.reserve(table_.size());
      for (const auto& e : table_) w.push_back(e.probability);
      return table_[rng.categorical(w)].links;
    }
    ActiveLinkSetPair out{LinkSet(n), LinkSet(n)};
    fill_pairwise(g, out.ls, /*reward=*/false, rng);
    fill_pairwise(g, out.lr, /*reward=*/true, rng);
    return out;
  }

  /**
   * Enumerates the support when it has at most `max_exact` link-set pairs;
   * otherwise returns `mc_samples` equally weighted draws (exact = false).
   */
  LinkSupport support(const AgentGraph& g, std::size_t max_exact = std::size_t{1} << 16, std::size_t mc_samples = 4096,
                      std::uint64_t mc_seed = 0x5eed) const {
    LinkSupport sup;
    if (kind_ == Kind::kCustomTable) {
      sup.entries = table_;
      return sup;
    }
    const std::size_t n = g.size();
    struct Unit {
      int from, to;
      bool reward;
      double p;
    };
    ActiveLinkSetPair base{LinkSet(n), LinkSet(n)};
    std::vector<Unit> free_units;
    for (int reward = 0; reward < 2; ++reward)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j || (symmetric_ && j < i)) continue;
          const int from = static_cast<int>(j), to = static_cast<int>(i);
          const double p = reward ? reward_link_probability(g, from, to) : state_link_probability(g, from, to);
          LinkSet& target = reward ? base.lr : base.ls;
          if (p >= 1.0) {
            target.add(from, to);
            if (symmetric_) target.add(to, from);
          } else if (p > 0.0) {
            free_units.push_back({from, to, reward != 0, p});
          }
        }
    const std::size_t k = free_units.size();
    if (k < 63 && (std::size_t{1} << k) <= max_exact) {
      const std::size_t count = std::size_t{1} << k;
      sup.entries.reserve(count);
      for (std::size_t mask = 0; mask < count; ++mask) {
        WeightedLinkPair e{1.0, base};
        for (std::size_t u = 0; u < k; ++u) {
          const Unit& unit = free_units[u];
          if (mask >> u & 1U) {
            e.probability *= unit.p;
            LinkSet& target = unit.reward ? e.links.lr : e.links.ls;
            target.add(unit.from, unit.to);
            if (symmetric_) target.add(unit.to, unit.from);
          } else {
            e.probability *= 1.0 - unit.p;
          }
        }
        sup.entries.push_back(std::move(e));
      }
      return sup;
    }
    sup.exact = false;
    sup.mc_samples = mc_samples;
    Stream rng(mc_seed);
    for (std::size_t s = 0; s < mc_samples; ++s)
      sup.entries.push_back({1.0 / static_cast<double>(mc_samples), sample(g, rng)});
    return sup;
  }

 private:
  double geometric_probability(int d) const {
    if (d >= kUnreachable) return 0.0;
    return std::min(1.0, c_ * std::pow(lambda_, d));
  }

  void fill_pairwise(const AgentGraph& g, LinkSet& target, bool reward, Stream& rng) const {
    const std::size_t n = g.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j || (symmetric_ && j < i)) continue;
        const int from = static_cast<int>(j), to = static_cast<int>(i);
        const double p = reward ? reward_link_probability(g, from, to) : state_link_probability(g, from, to);
        if (p <= 0.0) continue;
        if (p >= 1.0 || rng.bernoulli(p)) {
          target.add(from, to);
          if (symmetric_) target.add(to, from);
        }
      }
  }

  Kind kind_ = Kind::kStaticLocal;
  int alpha1_ = 0;
  int alpha2_ = 0;
  double c_ = 0.0;
  double lambda_ = 0.0;
  bool symmetric_ = false;
  bool reward_links_ = true;
  std::vector<WeightedLinkPair> table_;
};

/// LinkDistribution bound to a graph with the per-pair probabilities cached.
class LinkSampler {
 public:
  LinkSampler() = default;
  LinkSampler(LinkDistribution dist, const AgentGraph& g) : dist_(std::move(dist)), n_(g.size()) {
    if (!dist_.pairwise_independent()) return;
    for (int reward = 0; reward < 2; ++reward)
      for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j) {
          if (i == j || (dist_.symmetric() && j < i)) continue;
          const int from = static_cast<int>(j), to = static_cast<int>(i);
          const double p = reward ? dist_.reward_link_probability(g, from, to) : dist_.state_link_probability(g, from, to);
          if (p > 0.0) (reward ? reward_units_ : state_units_).push_back({from, to, p});
        }
    deterministic_ = true;
    for (const auto* units : {&state_units_, &reward_units_})
      for (const Unit& u : *units) deterministic_ = deterministic_ && u.p >= 1.0;
    if (deterministic_) {
      Stream unused;
      cached_ = {LinkSet(n_), LinkSet(n_)};
      fill(cached_.ls, state_units_, unused);
      fill(cached_.lr, reward_units_, unused);
    }
  }

  /// True when every draw returns the same pair (static-local, or degenerate geometric).
  bool deterministic() const noexcept { return deterministic_; }

  const LinkDistribution& distribution() const noexcept { return dist_; }

  ActiveLinkSetPair sample(Stream& rng) const {
    if (!dist_.pairwise_independent()) {
      std::vector<double> w;
      for (const auto& e : dist_.table()) w.push_back(e.probability);
      return dist_.table()[rng.categorical(w)].links;
    }
    if (deterministic_) return cached_;
    ActiveLinkSetPair out{LinkSet(n_), LinkSet(n_)};
    fill(out.ls, state_units_, rng);
    fill(out.lr, reward_units_, rng);
    return out;
  }

 private:
  struct Unit {
    int from, to;
    double p;
  };

  void fill(LinkSet& target, const std::vector<Unit>& units, Stream& rng) const {
    for (const Unit& u : units)
      if (u.p >= 1.0 || rng.bernoulli(u.p)) {
        target.add(u.from, u.to);
        if (dist_.symmetric()) target.add(u.to, u.from);
      }
  }

  LinkDistribution dist_;
  std::size_t n_ = 0;
  std::vector<Unit> state_units_;
  std::vector<Unit> reward_units_;
  bool deterministic_ = false;
  ActiveLinkSetPair cached_;
};

/// Free-function form of LinkDistribution::sample.
inline ActiveLinkSetPair sample_links(const LinkDistribution& dist, const AgentGraph& g, Stream& rng) {
  return dist.sample(g, rng);
}

}  // namespace netmarl
