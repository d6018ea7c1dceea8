#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "netmarl/decay.hpp"

using namespace netmarl;

namespace {

// Reference spread time: draws full link sets and walks the chain definition
// with std::set, no lazy sampling.
std::int64_t reference_spread(const AgentGraph& g, const LinkDistribution& dist, int beta, int i, int kappa,
                              std::int64_t t_max, Stream rng) {
  std::set<int> r;
  for (int j = 0; j < static_cast<int>(g.size()); ++j)
    if (g.distance(i, j) > kappa) r.insert(j);
  if (r.empty()) return -1;
  for (std::int64_t t = 0; t < t_max; ++t) {
    const auto L = dist.sample(g, rng);
    for (int j : r)
      if (L.lr.contains(j, i)) return t;
    std::set<int> s;
    for (int j : r)
      for (int k = 0; k < static_cast<int>(g.size()); ++k)
        if (L.ls.contains(j, k)) s.insert(k);
    std::set<int> a;
    for (int j : s)
      for (int k = 0; k < static_cast<int>(g.size()); ++k)
        if (g.distance(j, k) <= beta) a.insert(k);
    r = a;
  }
  return t_max;
}

double mean_gamma(const std::vector<SpreadSample>& xs, double gamma) {
  double s = 0.0;
  for (const auto& x : xs) s += x.unreachable ? 0.0 : std::pow(gamma, static_cast<double>(x.x));
  return s / static_cast<double>(xs.size());
}

}  // namespace

TEST(Spread, StaticPathExhaustive) {
  // Links are deterministic, so the chain is enumerable: the reachable set
  // after t steps is every agent within t hops of the exterior.
  const AgentGraph g = AgentGraph::path(6);
  const auto dist = LinkDistribution::static_local(1, 1);
  for (int kappa = 0; kappa <= 4; ++kappa) {
    std::int64_t expected = -1;
    for (std::int64_t t = 0; expected < 0; ++t) {
      int closest = 1 << 20;
      for (int j = 0; j < 6; ++j)
        if (j > kappa) closest = std::min<int>(closest, static_cast<int>(j - t));
      if (closest <= 1) expected = t;
    }
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto x = sample_spread_time(g, dist, 0, 0, kappa, 100, Stream(seed));
      EXPECT_EQ(x.x, expected) << "kappa=" << kappa;
      EXPECT_GE(static_cast<double>(x.x), (kappa - 1.0) / 1.0);
    }
  }
  // N_{-0}^3 = {4, 5}: three one-hop moves before agent 1 can reward-link into 0.
  EXPECT_EQ(sample_spread_time(g, dist, 0, 0, 3, 100, Stream(1)).x, 3);
}

TEST(Spread, StaticLocalLowerBoundHolds) {
  const AgentGraph g = AgentGraph::grid(5, 5);
  for (int a1 = 1; a1 <= 2; ++a1)
    for (int a2 = 0; a2 <= 2; ++a2)
      for (int beta = 0; beta <= 2; ++beta)
        for (int kappa = 0; kappa <= 6; ++kappa) {
          const auto xs = sample_spread_times(g, LinkDistribution::static_local(a1, a2), beta, 12, kappa, 200, 5,
                                              Stream(static_cast<std::uint64_t>(kappa)));
          for (const auto& x : xs) {
            if (x.unreachable) continue;
            EXPECT_GE(static_cast<double>(x.x), (kappa - a2) / static_cast<double>(beta + a1));
          }
        }
}

TEST(Spread, NoLinksNeverCrosses) {
  const AgentGraph g = AgentGraph::grid(3, 3);
  for (int kappa = 1; kappa <= 2; ++kappa) {
    const auto x = sample_spread_time(g, LinkDistribution::geometric(1.0, 0.0), 0, 0, kappa, 50, Stream(3));
    EXPECT_TRUE(x.truncated);
    EXPECT_EQ(x.x, 50);
  }
}

TEST(Spread, CompleteLinksImmediate) {
  const AgentGraph g = AgentGraph::grid(3, 3);
  const int diam = g.diameter();
  for (int kappa = 0; kappa < diam; ++kappa) {
    const auto x = sample_spread_time(g, LinkDistribution::static_local(diam, diam), 0, 0, kappa, 50, Stream(4));
    EXPECT_EQ(x.x, 0);
  }
}

TEST(Spread, BeyondEccentricityIsUnreachable) {
  const AgentGraph g = AgentGraph::path(4);
  const auto x = sample_spread_time(g, LinkDistribution::static_local(1, 1), 0, 0, 3, 50, Stream(5));
  EXPECT_TRUE(x.unreachable);
  std::vector<SpreadSample> v(3, x);
  EXPECT_EQ(estimate_mu(v, 0.7).mu, 0.0);
  EXPECT_THROW(sample_spread_time(g, LinkDistribution::static_local(1, 1), 0, 0, 1, 0, Stream(5)), std::invalid_argument);
}

TEST(Spread, LazySamplingMatchesFullDraws) {
  const AgentGraph g = AgentGraph::grid(4, 4);
  const double gamma = 0.7;
  for (int beta : {0, 1})
    for (int kappa : {1, 2}) {
      const auto dist = LinkDistribution::geometric(1.0, 0.3);
      const auto xs = sample_spread_times(g, dist, beta, 5, kappa, 60, 4000, Stream(6));
      double ref = 0.0, refsq = 0.0;
      for (std::uint64_t k = 0; k < 4000; ++k) {
        const auto t = reference_spread(g, dist, beta, 5, kappa, 60, Stream(1000 + k));
        const double v = std::pow(gamma, static_cast<double>(t));
        ref += v;
        refsq += v * v;
      }
      ref /= 4000.0;
      const double se_ref = std::sqrt((refsq / 4000.0 - ref * ref) / 4000.0);
      const auto est = estimate_mu(xs, gamma);
      EXPECT_NEAR(est.mean_gamma_x, ref, 4.0 * std::hypot(se_ref, est.stderr_gamma_x))
          << "beta=" << beta << " kappa=" << kappa;
    }
}

TEST(Spread, StochasticallyNondecreasingInKappa) {
  const AgentGraph g = AgentGraph::grid(5, 5);
  const auto dist = LinkDistribution::geometric(1.0, 0.3);
  double prev = 1e9;
  for (int kappa = 0; kappa <= 4; ++kappa) {
    const auto xs = sample_spread_times(g, dist, 0, 12, kappa, 200, 3000, Stream(7));
    const double m = mean_gamma(xs, 0.7);
    EXPECT_LE(m, prev + 0.02);
    prev = m;
  }
}

TEST(Mu, EstimatorArithmetic) {
  std::vector<SpreadSample> zeros(4, SpreadSample{0, 1, 0, false, false});
  EXPECT_NEAR(estimate_mu(zeros, 0.7).mu, 1.0 / 0.3, 1e-12);
  std::vector<SpreadSample> v = {{0, 1, 1, false, false}, {0, 1, 1, false, false}, {0, 1, 3, false, false}};
  EXPECT_NEAR(estimate_mu(v, 0.7).mu, (0.7 + 0.7 + 0.343) / 3.0 / 0.3, 1e-12);
  EXPECT_NEAR(estimate_mu(v, 0.7).mu, 1.9367, 1e-4);
  std::vector<SpreadSample> far(3, SpreadSample{0, 1, 100000, true, false});
  const auto e = estimate_mu(far, 0.7);
  EXPECT_LT(e.mu, 1e-100);
  EXPECT_EQ(e.truncated, 3u);
  EXPECT_THROW(estimate_mu(v, 1.0), std::invalid_argument);
  EXPECT_THROW(estimate_mu(std::vector<SpreadSample>{}, 0.5), std::invalid_argument);
}

TEST(Bounds, ExponentialConstants) {
  const auto b = exponential_constants(0.7, 1, 1, 0);
  EXPECT_NEAR(b.rho, 0.7, 1e-15);
  EXPECT_NEAR(b.C, 1.0 / 0.7, 1e-12);
  EXPECT_NEAR(b.C, 1.4286, 1e-4);
  EXPECT_DOUBLE_EQ(exponential_constants(0.7, 2, 0, 1).C, 1.0);
  EXPECT_THROW(exponential_constants(0.7, 0, 1, 0), std::invalid_argument);
  EXPECT_THROW(exponential_constants(1.0, 1, 1, 0), std::invalid_argument);
}

TEST(Bounds, ExponentialDominatesStaticPath) {
  const AgentGraph g = AgentGraph::path(8);
  const auto b = exponential_constants(0.7, 1, 1, 0);
  for (int kappa = 1; kappa <= 5; ++kappa) {
    const auto xs = sample_spread_times(g, LinkDistribution::static_local(1, 1), 0, 0, kappa, 200, 200, Stream(8));
    EXPECT_LE(mean_gamma(xs, 0.7), b(kappa) + 1e-12);
  }
}

TEST(Bounds, NearExponentialShape) {
  const auto b = near_exponential_bound(0.7, 1.0, 0.25, 1.0, 1, 0);
  EXPECT_GT(b.rho, 0.0);
  EXPECT_LT(b.rho, 1.0);
  EXPECT_GT(b.rho, std::pow(0.25, 0.25));
  EXPECT_GT(b.rho, std::pow(0.7, 1.0 / (2.0 * b.q)));
  for (int kappa = 1; kappa <= 50; ++kappa) EXPECT_GE(b(kappa), b.C * std::pow(b.rho, kappa));
  EXPECT_LT(b(1e6), 1e-3);
  for (int kappa = 40; kappa < 200; ++kappa) EXPECT_LE(b(kappa + 1), b(kappa));
  EXPECT_THROW(near_exponential_bound(0.7, 0.5, 0.25, 1.0, 1, 0), std::invalid_argument);
  EXPECT_THROW(near_exponential_bound(0.7, 1.0, 1.0, 1.0, 1, 0), std::invalid_argument);
  EXPECT_THROW(near_exponential_bound(0.7, 1.0, 0.25, 1.0, 0, 0), std::invalid_argument);
}

TEST(Bounds, NearExponentialConstantsByHand) {
  // gamma=0.7, c=2, lambda=0.25, c0=4, n0=1, beta=0.
  const double sl = 0.5, sg = std::sqrt(0.7);
  const double cg = 4.0 * 2.0;
  const double c2 = cg * 16.0 / (1.0 - sl);
  const double c3 = 0.5 * std::sqrt(sl) * (1.0 - sl) * (1.0 / sg - 1.0);
  const double q = std::max(std::log(c2 / c3) - 2.0 * std::log(1.0 - sg), 8.0) / std::log(4.0);
  const double rho = 0.5 * (1.0 + std::max(std::pow(0.7, 0.5 / q), std::sqrt(sl)));
  const auto b = near_exponential_bound(0.7, 2.0, 0.25, 4.0, 1, 0);
  EXPECT_NEAR(b.c_g, cg, 1e-12);
  EXPECT_NEAR(b.c2, c2, 1e-9);
  EXPECT_NEAR(b.c3, c3, 1e-12);
  EXPECT_NEAR(b.q, q, 1e-12);
  EXPECT_NEAR(b.rho, rho, 1e-12);
  EXPECT_NEAR(b.C, std::pow(rho, -std::max(q + 1.0, 2.0 / std::log(4.0))), 1e-9 * b.C);
}

TEST(Bounds, NearExponentialDominatesGrid) {
  const AgentGraph g = AgentGraph::grid(6, 6);
  const auto dist = LinkDistribution::geometric(1.0, 0.25);
  for (double c : {1.0, 2.0}) {
    const auto b = near_exponential_bound(0.7, c, 0.25, 4.0, 1, 0);
    for (int kappa = 2; kappa <= 5; ++kappa) {
      const auto xs = sample_spread_times(g, dist, 0, 14, kappa - 1, default_spread_horizon(kappa - 1, 0.7), 2000,
                                          Stream(9));
      const auto e = estimate_mu(xs, 0.7);
      EXPECT_LE(e.mean_gamma_x, b(kappa) + 3.0 * e.stderr_gamma_x);
    }
  }
}
