#include <gtest/gtest.h>

#include <cmath>

#include "netmarl/envs/tabular.hpp"
#include "netmarl/harness/fixtures.hpp"
#include "netmarl/oracle.hpp"
#include "netmarl/sac.hpp"
#include "netmarl/stochapprox.hpp"

using namespace netmarl;

namespace {

std::shared_ptr<const NetworkedMDP> three_agent_fixture(double gamma, std::uint64_t seed) {
  envs::TabularConfig cfg{AgentGraph::path(3), {2, 2, 2}, {2, 2, 2}};
  cfg.links = LinkDistribution::geometric(1.0, 0.5);
  cfg.gamma = gamma;
  Stream rng(seed);
  return envs::random_tabular_mdp(cfg, rng);
}

Eigen::Index global_index(const GlobalModel& model, std::span<const int> s, std::span<const int> a) {
  return static_cast<Eigen::Index>(model.states().index(s) * model.actions().count() + model.actions().index(a));
}

}  // namespace

TEST(Critic, UpdateExamples) {
  const NeighborhoodCodec codec({0}, std::vector<int>{2}, std::vector<int>{2});
  TruncatedQTable tab(0, 0, codec);
  critic_update(tab, 1, 1.0, 2, 1.0, 0.9);
  EXPECT_DOUBLE_EQ(tab.get(1), 1.0);
  tab.at(3) = 0.5;
  tab.at(0) = 1.0 + 0.5 * 0.5;
  critic_update(tab, 0, 1.0, 3, 0.3, 0.5);
  EXPECT_DOUBLE_EQ(tab.get(0), 1.25);
  EXPECT_DOUBLE_EQ(tab.get(2), 0.0);
}

TEST(Critic, ReplayMatchesHandUnrolled) {
  const NeighborhoodCodec codec({0, 1}, std::vector<int>{2, 3}, std::vector<int>{2, 2});
  TruncatedQTable tab(0, 1, codec);
  std::vector<double> ref(static_cast<std::size_t>(codec.size()), 0.0);
  Stream rng(1);
  std::uint64_t prev = rng.below(codec.size());
  const double gamma = 0.9;
  for (int t = 0; t < 100; ++t) {
    const std::uint64_t curr = rng.below(codec.size());
    const double r = rng.uniform(-1, 1);
    const double alpha = 3.0 / (t + 12.0);
    critic_update(tab, prev, r, curr, alpha, gamma);
    ref[prev] = ref[prev] + alpha * (r + gamma * ref[curr] - ref[prev]);
    prev = curr;
  }
  for (std::uint64_t z = 0; z < codec.size(); ++z) EXPECT_NEAR(tab.get(z), ref[z], 1e-12);
}

TEST(Critic, SparseTablesBehaveLikeDense) {
  // 2^21 tuples forces the hash-map layout.
  const NeighborhoodCodec big({0, 1, 2}, std::vector<int>{128, 128, 4}, std::vector<int>{4, 4, 2});
  ASSERT_GT(big.size(), TruncatedQTable::kDenseLimit);
  TruncatedQTable sparse(0, 1, big);
  EXPECT_FALSE(sparse.is_dense());
  std::unordered_map<std::uint64_t, double> ref;
  Stream rng(2);
  std::uint64_t prev = rng.below(16);
  for (int t = 0; t < 2000; ++t) {
    const std::uint64_t curr = rng.below(16) * 131071 % big.size();
    const double r = rng.uniform();
    critic_update(sparse, prev, r, curr, 0.1, 0.8);
    ref[prev] += 0.1 * (r + 0.8 * ref[curr] - ref[prev]);
    prev = curr;
  }
  for (const auto& [k, v] : ref) EXPECT_NEAR(sparse.get(k), v, 1e-12);
  EXPECT_LE(sparse.stored_entries(), 40u);
}

TEST(InnerLoop, ZeroLengthLeavesTablesZero) {
  const auto mdp = three_agent_fixture(0.7, 3);
  const LocalizedPolicy pol(mdp->graph(), mdp->state_sizes(), mdp->action_sizes(), 1);
  auto tables = make_critic_tables(*mdp, 1);
  SACConfig cfg;
  cfg.T = 0;
  const auto tr = run_inner_loop(*mdp, pol, cfg, tables, Stream(4));
  EXPECT_EQ(tr.length, 1u);
  for (const auto& tab : tables) EXPECT_EQ(tab.max_abs(), 0.0);
}

TEST(InnerLoop, DeterministicAndBounded) {
  const auto mdp = three_agent_fixture(0.7, 5);
  const LocalizedPolicy pol(mdp->graph(), mdp->state_sizes(), mdp->action_sizes(), 1);
  SACConfig cfg;
  cfg.T = 5000;
  cfg.H = 10.0;
  cfg.t0 = 40.0;
  auto a = make_critic_tables(*mdp, 1), b = make_critic_tables(*mdp, 1);
  const auto ta = run_inner_loop(*mdp, pol, cfg, a, Stream(6));
  const auto tb = run_inner_loop(*mdp, pol, cfg, b, Stream(6));
  EXPECT_EQ(ta.states, tb.states);
  EXPECT_EQ(ta.rewards, tb.rewards);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::uint64_t z = 0; z < a[i].size(); ++z) EXPECT_EQ(a[i].get(z), b[i].get(z));
  for (const auto& tab : a) EXPECT_LE(tab.max_abs(), mdp->reward_bound() / (1.0 - mdp->gamma()));
}

TEST(InnerLoop, UpdatesUsePreviousReward) {
  // Replaying the recorded trajectory through critic_update reproduces the tables.
  const auto mdp = three_agent_fixture(0.7, 7);
  const LocalizedPolicy pol(mdp->graph(), mdp->state_sizes(), mdp->action_sizes(), 0);
  SACConfig cfg;
  cfg.T = 300;
  cfg.H = 2.0;
  cfg.t0 = 8.0;
  auto tables = make_critic_tables(*mdp, 1);
  const auto tr = run_inner_loop(*mdp, pol, cfg, tables, Stream(8));
  auto replay = make_critic_tables(*mdp, 1);
  for (std::size_t t = 1; t <= cfg.T; ++t)
    for (std::size_t i = 0; i < 3; ++i)
      critic_update(replay[i], tr.code(t - 1, i), tr.reward(t - 1, i), tr.code(t, i), cfg.H / (t - 1 + cfg.t0), 0.7);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::uint64_t z = 0; z < tables[i].size(); ++z) EXPECT_EQ(tables[i].get(z), replay[i].get(z));
}

TEST(InnerLoop, CodesReadOnlyTheNeighbourhood) {
  const auto mdp = three_agent_fixture(0.7, 9);
  const auto tables = make_critic_tables(*mdp, 0);
  Stream rng(10);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<int> s(3), a(3);
    for (auto& x : s) x = static_cast<int>(rng.below(2));
    for (auto& x : a) x = static_cast<int>(rng.below(2));
    for (std::size_t i = 0; i < 3; ++i) {
      auto s2 = s, a2 = a;
      for (std::size_t j = 0; j < 3; ++j)
        if (j != i) {
          s2[j] ^= 1;
          a2[j] ^= 1;
        }
      EXPECT_EQ(tables[i].codec().encode(s, a), tables[i].codec().encode(s2, a2));
    }
  }
  // Memory is sized by the neighbourhood, never the global space.
  const auto wide = make_critic_tables(*mdp, 1);
  EXPECT_EQ(wide[0].stored_entries(), 16u);
  EXPECT_EQ(wide[1].stored_entries(), 64u);
}

TEST(InnerLoop, FullNeighbourhoodCriticWithinEnvelope) {
  const double gamma = 0.7;
  const auto mdp = three_agent_fixture(gamma, 11);
  const LocalizedPolicy pol(mdp->graph(), mdp->state_sizes(), mdp->action_sizes(), 1);
  const GlobalModel model(*mdp);
  const int kappa = 2;  // the path diameter
  const auto rep = stationary_and_mixing(model, pol, kappa);
  const double sp = *std::min_element(rep.sigma_prime.begin(), rep.sigma_prime.end());
  SACConfig cfg;
  cfg.kappa = kappa;
  cfg.T = 100000;
  cfg.H = minimum_H(sp, gamma);
  cfg.t0 = schedule_t0(cfg.H, rep.mixing.K2, static_cast<double>(cfg.T));
  cfg.sigma_prime = sp;
  cfg.K2 = rep.mixing.K2;
  auto tables = make_critic_tables(*mdp, kappa);
  run_inner_loop(*mdp, pol, cfg, tables, Stream(12));
  const auto qs = exact_local_q_all(model, pol);
  const auto b = bound_constants(td_bound_inputs(mdp->reward_bound(), gamma, cfg.H, cfg.t0, static_cast<double>(cfg.T),
                                                 rep.mixing.K1, rep.mixing.K2, sp,
                                                 static_cast<double>(tables[0].size()), 0.1));
  double worst = 0.0;
  std::vector<int> s(3), a(3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::uint64_t z = 0; z < tables[i].size(); ++z) {
      tables[i].codec().decode(z, s, a);
      worst = std::max(worst, std::abs(tables[i].get(z) - qs[i].q(global_index(model, s, a))));
    }
  EXPECT_LE(worst, b.envelope(static_cast<double>(cfg.T)));
  EXPECT_LE(worst, 0.3);
}

TEST(Actor, ZeroCriticZeroGradient) {
  const auto mdp = three_agent_fixture(0.7, 13);
  const LocalizedPolicy pol(mdp->graph(), mdp->state_sizes(), mdp->action_sizes(), 1);
  SACConfig cfg;
  cfg.T = 50;
  auto tables = make_critic_tables(*mdp, 1);
  const auto tr = run_inner_loop(*mdp, pol, cfg, tables, Stream(14));
  for (auto& t : tables) t.reset();
  for (int i = 0; i < 3; ++i)
    for (double g : actor_gradient(tr, tables, pol, mdp->graph(), 1, i, 0.7)) EXPECT_EQ(g, 0.0);
}

TEST(Actor, ProvenanceChecked) {
  const auto mdp = three_agent_fixture(0.7, 15);
  const LocalizedPolicy pol(mdp->graph(), mdp->state_sizes(), mdp->action_sizes(), 1);
  SACConfig cfg;
  cfg.T = 20;
  auto t1 = make_critic_tables(*mdp, 1), t2 = make_critic_tables(*mdp, 1);
  const auto tr1 = run_inner_loop(*mdp, pol, cfg, t1, Stream(16));
  run_inner_loop(*mdp, pol, cfg, t2, Stream(17));
  EXPECT_NO_THROW(actor_gradient(tr1, t1, pol, mdp->graph(), 1, 0, 0.7));
  EXPECT_THROW(actor_gradient(tr1, t2, pol, mdp->graph(), 1, 0, 0.7), std::invalid_argument);
}

TEST(Actor, GradientNormBound) {
  const double gamma = 0.7;
  const auto mdp = three_agent_fixture(gamma, 18);
  LocalizedPolicy pol(mdp->graph(), mdp->state_sizes(), mdp->action_sizes(), 1);
  Stream rng(19);
  for (int i = 0; i < 3; ++i)
    for (double& v : pol.theta(i)) v = rng.uniform(-3, 3);
  SACConfig cfg;
  cfg.T = 2000;
  cfg.H = 5.0;
  cfg.t0 = 20.0;
  auto tables = make_critic_tables(*mdp, 1);
  const auto tr = run_inner_loop(*mdp, pol, cfg, tables, Stream(20));
  const double bound = LocalizedPolicy::score_bound() * mdp->reward_bound() / ((1.0 - gamma) * (1.0 - gamma));
  for (int i = 0; i < 3; ++i) {
    const auto g = actor_gradient(tr, tables, pol, mdp->graph(), 1, i, gamma);
    double sq = 0.0;
    for (double x : g) sq += x * x;
    EXPECT_LE(std::sqrt(sq), bound);
  }
}

TEST(Actor, ExactCriticMatchesFiniteDifferences) {
  const double gamma = 0.95;
  const auto mdp = harness::toggle_mdp(AgentGraph::path(2), gamma);
  LocalizedPolicy pol(mdp->graph(), {2, 2}, {2, 2}, 1);
  const GlobalModel model(*mdp);
  const auto qs = exact_local_q_all(model, pol);

  const int loops = 200;
  SACConfig cfg;
  cfg.kappa = 1;
  cfg.T = 10000;
  auto tables = make_critic_tables(*mdp, 1);
  std::vector<std::vector<double>> mean(2);
  for (int i = 0; i < 2; ++i) mean[static_cast<std::size_t>(i)].assign(pol.theta(i).size(), 0.0);
  const std::vector<int> all = {0, 1};
  for (int k = 0; k < loops; ++k) {
    const auto tr = run_inner_loop(*mdp, pol, cfg, tables, Stream(1000 + static_cast<std::uint64_t>(k)));
    for (int i = 0; i < 2; ++i) {
      const auto g = actor_gradient_from(tr, pol, all, i, gamma, [&](int j, std::size_t t) {
        return qs[static_cast<std::size_t>(j)].q(global_index(model, tr.state(t), tr.action(t)));
      });
      for (std::size_t p = 0; p < g.size(); ++p) mean[static_cast<std::size_t>(i)][p] += g[p] / loops;
    }
  }
  double err = 0.0, norm = 0.0;
  const double eps = 1e-4;
  for (int i = 0; i < 2; ++i)
    for (std::size_t p = 0; p < pol.theta(i).size(); ++p) {
      const double saved = pol.theta(i)[p];
      pol.theta(i)[p] = saved + eps;
      const double up = exact_return(model, pol);
      pol.theta(i)[p] = saved - eps;
      const double down = exact_return(model, pol);
      pol.theta(i)[p] = saved;
      const double fd = (up - down) / (2 * eps);
      err += (mean[static_cast<std::size_t>(i)][p] - fd) * (mean[static_cast<std::size_t>(i)][p] - fd);
      norm += fd * fd;
    }
  EXPECT_LE(std::sqrt(err / norm), 0.05) << "|fd| = " << std::sqrt(norm);
}

TEST(Actor, StepSizes) {
  const AgentGraph g = AgentGraph::path(2);
  LocalizedPolicy pol(g, {2, 2}, {2, 2}, 0);
  std::vector<std::vector<double>> zero = {std::vector<double>(4, 0.0), std::vector<double>(4, 0.0)};
  actor_step(pol, zero, 5, 1.0);
  for (double v : pol.theta(0)) EXPECT_EQ(v, 0.0);
  std::vector<std::vector<double>> ones = {std::vector<double>(4, 1.0), std::vector<double>(4, 1.0)};
  actor_step(pol, ones, 0, 0.3);
  EXPECT_DOUBLE_EQ(pol.theta(1)[2], 0.3);
  actor_step(pol, ones, 3, 0.1);
  EXPECT_DOUBLE_EQ(pol.theta(1)[2], 0.35);
}

TEST(Train, ZeroIterations) {
  const auto mdp = three_agent_fixture(0.7, 23);
  LocalizedPolicy pol(mdp->graph(), mdp->state_sizes(), mdp->action_sizes(), 1);
  SACConfig cfg;
  cfg.M = 0;
  const auto rec = train(*mdp, pol, cfg);
  EXPECT_TRUE(rec.iterations.empty());
  for (int i = 0; i < 3; ++i)
    for (double v : pol.theta(i)) EXPECT_EQ(v, 0.0);
}

TEST(Train, ConfigWarnings) {
  SACConfig cfg;
  EXPECT_EQ(check_config(cfg, 0.7).size(), 3u);
  cfg.sigma_prime = 0.1;
  cfg.K2 = 2.0;
  cfg.W_prime = 1.0;
  cfg.H = 2.0 / (0.3 * 0.1);
  cfg.t0 = std::max(4.0 * cfg.H, 2.0 * 2.0 * std::log(1000.0));
  cfg.eta = 0.25;
  EXPECT_TRUE(check_config(cfg, 0.7).empty());
  cfg.eta = 0.3;
  EXPECT_EQ(check_config(cfg, 0.7).size(), 1u);
}

TEST(Train, ReturnImprovesAndIsReproducible) {
  const double gamma = 0.7;
  const auto mdp = three_agent_fixture(gamma, 24);
  const GlobalModel model(*mdp);
  SACConfig cfg;
  cfg.kappa = 1;
  cfg.beta = 1;
  cfg.T = 2000;
  cfg.M = 100;
  cfg.H = 20.0;
  cfg.t0 = 80.0;
  cfg.eta = 1.0;
  cfg.seed = 25;
  auto run = [&](std::vector<double>& js) {
    LocalizedPolicy pol(mdp->graph(), mdp->state_sizes(), mdp->action_sizes(), cfg.beta);
    TrainingCallbacks cb;
    cb.on_critic = [&](std::size_t, const LocalizedPolicy& p, const std::vector<TruncatedQTable>&, const Trajectory&,
                       IterationMetrics& it) {
      it.return_exact = exact_return(model, p);
      js.push_back(it.return_exact);
    };
    return train(*mdp, pol, cfg, cb);
  };
  std::vector<double> j1, j2;
  const auto r1 = run(j1);
  const auto r2 = run(j2);
  ASSERT_EQ(r1.iterations.size(), 100u);
  EXPECT_EQ(j1, j2);
  for (std::size_t m = 0; m < 100; ++m) {
    EXPECT_EQ(r1.iterations[m].grad_norm, r2.iterations[m].grad_norm);
    EXPECT_EQ(r1.iterations[m].return_estimate, r2.iterations[m].return_estimate);
    EXPECT_LE(r1.iterations[m].max_abs_critic, mdp->reward_bound() / (1.0 - gamma));
  }
  double lead = 0.0, trail = 0.0;
  for (std::size_t m = 0; m < 50; ++m) {
    lead += j1[m] / 50.0;
    trail += j1[50 + m] / 50.0;
  }
  EXPECT_GT(trail, lead);
}
