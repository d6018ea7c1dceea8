#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "netmarl/graph.hpp"
#include "netmarl/links.hpp"
#include "netmarl/rng.hpp"

namespace netmarl {

/// One realization of the information-spread time X_i(kappa).
struct SpreadSample {
  int i = 0;
  int kappa = 0;
  std::int64_t x = 0;
  bool truncated = false;    ///< no hit within t_max; x == t_max
  bool unreachable = false;  ///< N_{-i}^kappa empty, X = +infinity
};

inline std::int64_t default_spread_horizon(int kappa, double gamma) {
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(10.0 * kappa / (1.0 - gamma))));
}

/**
 * Simulates the reachability process behind X_i(kappa). R starts at
 * N_{-i}^kappa; at step t the walk stops if some j in R has (j, i) in L^r_t,
 * otherwise R grows through L^s_t and then through L^a (pairs within beta
 * hops). Link pairs are drawn lazily, only those touching R, which is exact
 * for the pairwise-independent kinds since each pair is queried at most once
 * per step.
 */
class SpreadSimulator {
 public:
  SpreadSimulator(const AgentGraph& g, const LinkDistribution& dist, int beta)
      : g_(&g), dist_(dist), sampler_(dist, g), beta_(beta) {
    if (beta < 0) throw std::invalid_argument("SpreadSimulator: beta must be nonnegative");
  }

  SpreadSample sample(int i, int kappa, std::int64_t t_max, const Stream& rng) const {
    if (t_max < 1) throw std::invalid_argument("sample_spread_time: t_max must be at least 1");
    SpreadSample out{i, kappa, 0, false, false};
    const std::size_t n = g_->size();
    std::vector<char> in_r(n, 0);
    std::vector<int> members = g_->exterior(i, kappa);
    if (members.empty()) {
      out.unreachable = true;
      out.x = std::numeric_limits<std::int64_t>::max();
      return out;
    }
    for (int j : members) in_r[static_cast<std::size_t>(j)] = 1;
    const bool lazy = dist_.pairwise_independent() && !sampler_.deterministic();

    std::vector<char> grown(n);
    for (std::int64_t t = 0; t < t_max; ++t) {
      Stream step = rng.split(static_cast<std::uint64_t>(t));
      ActiveLinkSetPair full;
      if (!lazy) full = sampler_.sample(step);

      // Reward link into i from the reachable set.
      if (in_r[static_cast<std::size_t>(i)]) {
        out.x = t;
        return out;
      }
      bool hit = false;
      for (int j : members) {
        if (lazy) {
          const double p = dist_.reward_link_probability(*g_, j, i);
          hit = p >= 1.0 || (p > 0.0 && step.bernoulli(p));
        } else {
          hit = full.lr.contains(j, i);
        }
        if (hit) break;
      }
      if (hit) {
        out.x = t;
        return out;
      }

      // Grow through L^s_t.
      std::fill(grown.begin(), grown.end(), 0);
      for (int j : members) grown[static_cast<std::size_t>(j)] = 1;
      for (std::size_t k = 0; k < n; ++k) {
        if (in_r[k]) continue;
        const int to = static_cast<int>(k);
        for (int j : members) {
          bool link;
          if (lazy) {
            const double p = dist_.state_link_probability(*g_, j, to);
            link = p >= 1.0 || (p > 0.0 && step.bernoulli(p));
          } else {
            link = full.ls.contains(j, to);
          }
          if (link) {
            grown[k] = 1;
            break;
          }
        }
      }
      // Then through L^a.
      std::fill(in_r.begin(), in_r.end(), 0);
      for (std::size_t k = 0; k < n; ++k) {
        if (!grown[k]) continue;
        if (beta_ == 0) {
          in_r[k] = 1;
          continue;
        }
        for (int m : g_->khop(static_cast<int>(k), beta_)) in_r[static_cast<std::size_t>(m)] = 1;
      }
      members.clear();
      for (std::size_t k = 0; k < n; ++k)
        if (in_r[k]) members.push_back(static_cast<int>(k));
    }
    out.x = t_max;
    out.truncated = true;
    return out;
  }

 private:
  const AgentGraph* g_;
  LinkDistribution dist_;
  LinkSampler sampler_;
  int beta_;
};

inline SpreadSample sample_spread_time(const AgentGraph& g, const LinkDistribution& dist, int beta, int i, int kappa,
                                       std::int64_t t_max, const Stream& rng) {
  return SpreadSimulator(g, dist, beta).sample(i, kappa, t_max, rng);
}

/// n samples, sample k drawn from rng.split(k).
inline std::vector<SpreadSample> sample_spread_times(const AgentGraph& g, const LinkDistribution& dist, int beta, int i,
                                                     int kappa, std::int64_t t_max, std::size_t count,
                                                     const Stream& rng) {
  const SpreadSimulator sim(g, dist, beta);
  std::vector<SpreadSample> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(sim.sample(i, kappa, t_max, rng.split(k)));
  return out;
}

struct MuEstimate {
  double mean_gamma_x = 0.0;  ///< sample mean of gamma^X
  double stderr_gamma_x = 0.0;
  double mu = 0.0;            ///< mean_gamma_x / (1 - gamma)
  double stderr_mu = 0.0;
  std::size_t truncated = 0;  ///< samples that contributed gamma^{t_max} as a surrogate
  std::size_t unreachable = 0;
};

/// mu(kappa) = E[gamma^X] / (1 - gamma); truncated samples count gamma^{t_max}, unreachable ones count 0.
inline MuEstimate estimate_mu(std::span<const SpreadSample> samples, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("estimate_mu: gamma must lie in [0, 1)");
  if (samples.empty()) throw std::invalid_argument("estimate_mu: no samples");
  MuEstimate e;
  double sum = 0.0, sumsq = 0.0;
  for (const auto& s : samples) {
    const double v = s.unreachable ? 0.0 : std::pow(gamma, static_cast<double>(s.x));
    sum += v;
    sumsq += v * v;
    e.truncated += s.truncated ? 1 : 0;
    e.unreachable += s.unreachable ? 1 : 0;
  }
  const double n = static_cast<double>(samples.size());
  e.mean_gamma_x = sum / n;
  const double var = samples.size() > 1 ? std::max(0.0, (sumsq - n * e.mean_gamma_x * e.mean_gamma_x) / (n - 1.0)) : 0.0;
  e.stderr_gamma_x = std::sqrt(var / n);
  e.mu = e.mean_gamma_x / (1.0 - gamma);
  e.stderr_mu = e.stderr_gamma_x / (1.0 - gamma);
  return e;
}

/// Closed-form bound kappa -> C rho^kappa (exponential) or C rho^{kappa / (1 + ln(kappa + 1))}.
struct DecayBound {
  enum class Kind { kExponential, kNearExponential };
  Kind kind = Kind::kExponential;
  double C = 1.0;
  double rho = 0.0;
  // Intermediate constants of the near-exponential construction.
  double c_g = 0.0, n1 = 0.0, c2 = 0.0, c3 = 0.0, q = 0.0;

  double operator()(double kappa) const {
    if (kind == Kind::kExponential) return C * std::pow(rho, kappa);
    return C * std::pow(rho, kappa / (1.0 + std::log(kappa + 1.0)));
  }
};

/// rho = gamma^{1/(alpha1+beta)}, C = gamma^{-alpha2/(alpha1+beta)}; bounds E[gamma^{X_i(kappa)}].
inline DecayBound exponential_constants(double gamma, int alpha1, int alpha2, int beta) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("exponential_constants: gamma must lie in (0, 1)");
  if (alpha1 < 0 || alpha2 < 0 || beta < 0) throw std::invalid_argument("exponential_constants: negative radius");
  if (alpha1 + beta == 0) throw std::invalid_argument("exponential_constants: alpha1 + beta = 0 leaves the rate undefined");
  DecayBound b;
  b.kind = DecayBound::Kind::kExponential;
  const double denom = static_cast<double>(alpha1 + beta);
  b.rho = std::pow(gamma, 1.0 / denom);
  b.C = std::pow(gamma, -static_cast<double>(alpha2) / denom);
  return b;
}

/**
 * Near-exponential bound for links with P{(i,j) in L^s u L^r} <= c lambda^{d(i,j)}
 * on graphs with |boundary of N_i^k| <= c0 k^{n0}. Evaluated at kappa it bounds
 * E[gamma^{X_i(kappa - 1)}]. rho is the midpoint of its admissible interval.
 */
inline DecayBound near_exponential_bound(double gamma, double c, double lambda, double c0, int n0, int beta) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("near_exponential_bound: gamma must lie in (0, 1)");
  if (!(c >= 1.0)) throw std::invalid_argument("near_exponential_bound: c must be at least 1");
  if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("near_exponential_bound: lambda must lie in (0, 1)");
  if (!(c0 >= 1.0) || n0 < 1) throw std::invalid_argument("near_exponential_bound: need c0 >= 1 and n0 >= 1");
  if (beta < 0) throw std::invalid_argument("near_exponential_bound: beta must be nonnegative");
  DecayBound b;
  b.kind = DecayBound::Kind::kNearExponential;
  const double sl = std::sqrt(lambda), sg = std::sqrt(gamma);
  const double ln_inv_lambda = std::log(1.0 / lambda);
  b.c_g = c0 * c * std::pow(beta + 1.0, n0 + 1.0) * std::pow(lambda, -static_cast<double>(beta));
  b.n1 = 2.0 * n0;
  b.c2 = b.c_g * c0 * c0 / (1.0 - sl);
  b.c3 = 0.5 * std::pow(lambda, 0.25) * (1.0 - sl) * (1.0 / sg - 1.0);
  b.q = std::max(std::log(b.c2) - std::log(b.c3) - 2.0 * std::log(1.0 - sg), 2.0 * b.n1 + 4.0) / ln_inv_lambda;
  const double lower = std::max(std::pow(gamma, 1.0 / (2.0 * b.q)), std::pow(lambda, 0.25));
  b.rho = 0.5 * (lower + 1.0);
  b.C = std::pow(b.rho, -std::max(b.q + 1.0, 2.0 * n0 / ln_inv_lambda));
  return b;
}

/// Smallest c0 with |boundary of N_i^k| <= c0 k for every agent and k >= 1 (the n0 = 1 growth constant).
inline double boundary_growth_c0(const AgentGraph& g) {
  double c0 = 1.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const int ecc = g.eccentricity(static_cast<int>(i));
    for (int k = 1; k <= ecc; ++k)
      c0 = std::max(c0, static_cast<double>(g.boundary(static_cast<int>(i), k).size()) / k);
  }
  return c0;
}

/**
 * Closed-form bounds that apply to a link distribution: the exponential one
 * for static-local links (needs alpha1 + beta > 0) and the near-exponential
 * one for geometric links, with P{(i,j) in L^s u L^r} <= c' lambda^d where
 * c' = 2c when reward links are drawn and c otherwise.
 */
struct ApplicableBounds {
  std::optional<DecayBound> exponential;
  std::optional<DecayBound> near_exponential;
};

inline ApplicableBounds applicable_bounds(const AgentGraph& g, const LinkDistribution& dist, double gamma, int beta) {
  ApplicableBounds out;
  if (dist.kind() == LinkDistribution::Kind::kStaticLocal && dist.alpha1() + beta > 0)
    out.exponential = exponential_constants(gamma, dist.alpha1(), dist.alpha2(), beta);
  if (dist.kind() == LinkDistribution::Kind::kGeometric && dist.lambda() > 0.0 && dist.lambda() < 1.0) {
    const double c = std::max(1.0, dist.c() * (dist.reward_links() ? 2.0 : 1.0));
    out.near_exponential = near_exponential_bound(gamma, c, dist.lambda(), boundary_growth_c0(g), 1, beta);
  }
  return out;
}

}  // namespace netmarl
