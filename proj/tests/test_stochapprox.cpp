#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "netmarl/markov.hpp"
#include "netmarl/stochapprox.hpp"
#include "netmarl/tdq.hpp"

using namespace netmarl;

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::MatrixXd phi_matrix(const AggregationMap& h) {
  Eigen::MatrixXd Phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(h.n()), static_cast<Eigen::Index>(h.m()));
  for (std::size_t i = 0; i < h.n(); ++i) Phi(static_cast<Eigen::Index>(i), h(i)) = 1.0;
  return Phi;
}

// Pi by explicit matrix inversion, the textbook route the library avoids.
Eigen::MatrixXd pi_matrix(const AggregationMap& h, const Eigen::VectorXd& d) {
  const Eigen::MatrixXd Phi = phi_matrix(h);
  const Eigen::MatrixXd D = d.asDiagonal();
  return (Phi.transpose() * D * Phi).inverse() * Phi.transpose() * D;
}

AggregationMap random_map(std::size_t n, int m, Stream& rng) {
  std::vector<int> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = i < static_cast<std::size_t>(m) ? static_cast<int>(i) : static_cast<int>(rng.below(m));
  return AggregationMap(h, m);
}

// Second transcription of the finite-time constants, written term by term.
struct Transcribed {
  double Ca, Cap;
};
Transcribed transcribe(double H, double t0, double T, double K1, double K2, double sp, double g, double xb, double C,
                       double wb, double vl, double m, double delta) {
  const double L = std::log(T);
  const double c1 = xb + xb + C + wb / vl;
  const double c2 = xb * 4 + C * 2 + wb / vl;
  const double c3 = K1 * 2 * (xb * 2 + C) * (4 * H + 2 * K2 + 1);
  const double inner = std::log(4 * m * K2 * T / delta) + std::log(std::log(T));
  const double Ca = (4 * H * c2 / (1 - g)) * std::sqrt(K2 * L * inner);
  const double a = (48 * K2 * c1 * H * L + sp * c3) / ((1 - g) * sp);
  const double b = 2 * xb * (2 * K2 * L + t0) / (1 - g);
  return {Ca, 4 * (a > b ? a : b)};
}

}  // namespace

TEST(Norm, Examples) {
  const std::vector<double> x = {2.0, -6.0};
  EXPECT_DOUBLE_EQ(weighted_norm(x, WeightVector::ones(2)), 6.0);
  EXPECT_DOUBLE_EQ(weighted_norm(x, WeightVector({1.0, 3.0})), 2.0);
  EXPECT_DOUBLE_EQ(weighted_norm(x, WeightVector({4.0, 12.0})), 0.5);
  EXPECT_THROW(weighted_norm(x, WeightVector::ones(3)), std::invalid_argument);
  EXPECT_THROW(WeightVector({1.0, 0.0}), std::invalid_argument);
}

TEST(Aggregation, SurjectivityEnforced) {
  EXPECT_THROW(AggregationMap({0, 0, 2}, 3), std::invalid_argument);
  EXPECT_THROW(AggregationMap({0, 3}, 2), std::invalid_argument);
  EXPECT_NO_THROW(AggregationMap({1, 0, 1}, 2));
}

TEST(Projection, Examples) {
  const AggregationMap one({0, 0}, 1);
  const std::vector<double> d = {0.25, 0.75}, y = {4.0, 8.0};
  EXPECT_DOUBLE_EQ(project_pi(one, d, y)[0], 7.0);
  const Eigen::MatrixXd Pi = pi_matrix(one, Eigen::Vector2d(0.25, 0.75));
  EXPECT_NEAR((Pi * Eigen::Vector2d(4.0, 8.0))(0), 7.0, 1e-12);

  const auto id = AggregationMap::identity(3);
  const std::vector<double> d3 = {0.2, 0.3, 0.5}, y3 = {1.0, -2.0, 5.0};
  EXPECT_EQ(project_pi(id, d3, y3), y3);
  const AggregationMap two({0, 1, 0}, 2);
  const auto c = project_pi(two, d3, std::vector<double>(3, 4.5));
  for (double v : c) EXPECT_DOUBLE_EQ(v, 4.5);
  EXPECT_THROW(project_pi(two, std::vector<double>{0.5, 0.0, 0.5}, y3), std::invalid_argument);
}

TEST(Projection, MatchesMatrixFormOnRandomInstances) {
  Stream rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + rng.below(10);
    const int m = 1 + static_cast<int>(rng.below(n));
    const auto h = random_map(n, m, rng);
    Eigen::VectorXd d(static_cast<Eigen::Index>(n)), y(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      d(i) = 0.05 + rng.uniform();
      y(i) = rng.uniform(-5, 5);
    }
    d /= d.sum();
    const auto fast = project_pi(h, to_vec(d), to_vec(y));
    const Eigen::VectorXd slow = pi_matrix(h, d) * y;
    for (int j = 0; j < m; ++j) EXPECT_NEAR(fast[static_cast<std::size_t>(j)], slow(j), 1e-10);
  }
}

TEST(Projection, NonExpansiveAndPhiIsometric) {
  Stream rng(2);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 2 + rng.below(8);
    const int m = 1 + static_cast<int>(rng.below(n));
    const auto h = random_map(n, m, rng);
    std::vector<double> v(static_cast<std::size_t>(m)), d(n), y(n), x(static_cast<std::size_t>(m));
    for (double& e : v) e = 0.1 + rng.uniform();
    double s = 0.0;
    for (double& e : d) s += (e = 0.01 + rng.uniform());
    for (double& e : d) e /= s;
    for (double& e : y) e = rng.uniform(-3, 3);
    for (double& e : x) e = rng.uniform(-3, 3);
    const WeightVector w(v);
    EXPECT_LE(weighted_norm(project_pi(h, d, y), w), weighted_norm(y, w, h) + 1e-12);
    EXPECT_NEAR(weighted_norm(lift(h, x), w, h), weighted_norm(x, w), 1e-15);
  }
}

TEST(FixedPoint, IdentityRecoversValueFunction) {
  Stream rng(3);
  const auto mrp = random_mrp(6, 0.8, rng);
  const auto F = td_operator(mrp);
  const auto id = AggregationMap::identity(6);
  const Eigen::VectorXd d = stationary_distribution(mrp.P);
  const auto res = fixed_point(F, id, to_vec(d), WeightVector::ones(6), 1e-11);
  const Eigen::VectorXd V = evaluate_dense(mrp.P, mrp.expected_reward(), mrp.gamma);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(res.x[static_cast<std::size_t>(i)], V(i), 1e-9);
}

TEST(FixedPoint, ConstantMapOneStep) {
  ContractionOperator F;
  F.gamma = 0.5;
  F.dim = 3;
  F.apply = [](std::span<const double>) { return std::vector<double>{1.0, 2.0, 6.0}; };
  const AggregationMap h({0, 0, 1}, 2);
  const std::vector<double> d = {0.5, 0.25, 0.25};
  const auto res = fixed_point(F, h, d, WeightVector::ones(2), 1e-12);
  EXPECT_EQ(res.iterations, 1u);
  EXPECT_NEAR(res.x[0], (0.5 * 1.0 + 0.25 * 2.0) / 0.75, 1e-15);
  EXPECT_NEAR(res.x[1], 6.0, 1e-15);
}

TEST(FixedPoint, AggregatedChainMatchesAffineSolve) {
  Stream rng(4);
  const auto mrp = random_mrp(3, 0.7, rng);
  const AggregationMap h({0, 0, 1}, 2);
  const Eigen::VectorXd d = stationary_distribution(mrp.P);
  const auto res = fixed_point(td_operator(mrp), h, to_vec(d), WeightVector::ones(2), 1e-12);
  const Eigen::MatrixXd Pi = pi_matrix(h, d), Phi = phi_matrix(h);
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2) - mrp.gamma * Pi * mrp.P * Phi;
  const Eigen::VectorXd x = A.lu().solve(Pi * mrp.expected_reward());
  for (int j = 0; j < 2; ++j) EXPECT_NEAR(res.x[static_cast<std::size_t>(j)], x(j), 1e-10);
}

TEST(FixedPoint, NonContractionRejected) {
  ContractionOperator F;
  F.gamma = 0.5;
  F.dim = 2;
  F.apply = [](std::span<const double> y) { return std::vector<double>{2.0 * y[0] + 1.0, 2.0 * y[1] - 1.0}; };
  EXPECT_THROW(fixed_point(F, AggregationMap::identity(2), std::vector<double>{0.5, 0.5}, WeightVector::ones(2), 1e-8),
               ContractionViolation);
}

TEST(Contraction, ProjectedOperatorFactorMeasured) {
  Stream rng(5);
  for (int fixture = 0; fixture < 3; ++fixture) {
    const auto mrp = random_mrp(8, 0.75, rng);
    const auto h = random_map(8, 3, rng);
    const auto F = td_operator(mrp);
    const auto d = to_vec(stationary_distribution(mrp.P));
    const auto v = WeightVector::ones(3);
    auto T = [&](const std::vector<double>& x) { return project_pi(h, d, F.apply(lift(h, x))); };
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
      std::vector<double> x(3), y(3), diff_in(3), diff_out(3);
      for (int j = 0; j < 3; ++j) {
        x[static_cast<std::size_t>(j)] = rng.uniform(-10, 10);
        y[static_cast<std::size_t>(j)] = rng.uniform(-10, 10);
      }
      const auto tx = T(x), ty = T(y);
      for (int j = 0; j < 3; ++j) {
        diff_in[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(j)] - y[static_cast<std::size_t>(j)];
        diff_out[static_cast<std::size_t>(j)] = tx[static_cast<std::size_t>(j)] - ty[static_cast<std::size_t>(j)];
      }
      worst = std::max(worst, weighted_norm(diff_out, v) / weighted_norm(diff_in, v));
      // Offset contract on the ground operator.
      const auto fy = F.apply(lift(h, y));
      EXPECT_LE(weighted_norm(fy, v, h), F.gamma * weighted_norm(y, v) + F.C + 1e-12);
    }
    EXPECT_LE(worst, F.gamma + 1e-12);
  }
}

TEST(SAStep, Examples) {
  const AggregationMap h({0, 1, 1}, 2);
  SAState st(2, 1.0, 1.0);
  st.x = {0.5, 2.0};
  sa_step(st, h, 2, 2.0, 0.0);
  EXPECT_EQ(st.x, (std::vector<double>{0.5, 2.0}));
  EXPECT_EQ(st.t, 1u);

  SAState full(2, 1.0, 1.0);
  sa_step(full, h, 0, 3.0, 0.0);
  EXPECT_DOUBLE_EQ(full.x[0], 3.0);
  EXPECT_DOUBLE_EQ(full.x[1], 0.0);

  SAState bounded(2, 1.0, 1.0);
  bounded.noise_bound = 1.0;
  EXPECT_THROW(sa_step(bounded, h, 0, 0.0, 1.5), std::invalid_argument);
}

TEST(SAStep, RecursionReplay) {
  // 2 ground states in one class, i.i.d. uniform visits, constant F.
  const AggregationMap h({0, 0}, 1);
  const double f[2] = {1.0, 3.0};
  const double H = 2.0, t0 = 5.0;
  SAState st(1, H, t0);
  Stream rng(6);
  std::vector<double> targets;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t i = rng.below(2);
    const double w = rng.uniform(-0.5, 0.5);
    targets.push_back(f[i] + w);
    sa_step(st, h, i, f[i], w);
  }
  // x_T = sum_t a_t prod_{s>t} (1 - a_s) target_t, accumulated backwards.
  double x = 0.0, tail = 1.0;
  for (int t = 9999; t >= 0; --t) {
    const double a = H / (t + t0);
    x += tail * a * targets[static_cast<std::size_t>(t)];
    tail *= 1.0 - a;
  }
  EXPECT_NEAR(st.x[0], x, 1e-10);
}

TEST(Bounds, DualTranscription) {
  Stream rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    BoundInputs in;
    in.gamma = rng.uniform(0.1, 0.95);
    in.sigma_prime = rng.uniform(0.01, 0.5);
    in.H = minimum_H(in.sigma_prime, in.gamma) * rng.uniform(1.0, 3.0);
    in.T = std::floor(rng.uniform(10.0, 1e7));
    in.K1 = rng.uniform(1.0, 5.0);
    in.K2 = rng.uniform(1.0, 30.0);
    in.t0 = schedule_t0(in.H, in.K2, in.T);
    in.x_bar = rng.uniform(0.5, 10.0);
    in.C = rng.uniform(0.1, 5.0);
    in.w_bar = rng.uniform(0.1, 5.0);
    in.v_lower = rng.uniform(0.2, 1.0);
    in.m = std::floor(rng.uniform(1.0, 100.0));
    in.delta = rng.uniform(0.01, 0.5);
    const auto b = bound_constants(in);
    const auto t = transcribe(in.H, in.t0, in.T, in.K1, in.K2, in.sigma_prime, in.gamma, in.x_bar, in.C, in.w_bar,
                              in.v_lower, in.m, in.delta);
    EXPECT_NEAR(b.C_a, t.Ca, 1e-12 * t.Ca);
    EXPECT_NEAR(b.C_a_prime, t.Cap, 1e-12 * t.Cap);
  }
}

TEST(Bounds, TdSpecialisation) {
  // With x_bar = r/(1-g), C = w_bar = 2r/(1-g), v = 1 the constants collapse to the TD form.
  const double r = 1.3, g = 0.8, sp = 0.1, K1 = 2.0, K2 = 4.0, T = 1e5, m = 5, delta = 0.1;
  const double H = minimum_H(sp, g);
  const double t0 = schedule_t0(H, K2, T);
  const auto b = bound_constants(td_bound_inputs(r, g, H, t0, T, K1, K2, sp, m, delta));
  const double L = std::log(T);
  const double Ca = 40 * H * r / ((1 - g) * (1 - g)) * std::sqrt(K2 * L * (std::log(4 * m * K2 * T / delta) + std::log(L)));
  const double Cap = 8 * r / ((1 - g) * (1 - g)) *
                     std::max(144 * K2 * H * L / sp + 4 * K1 * (1 + 2 * K2 + 4 * H), 2 * K2 * L + t0);
  EXPECT_NEAR(b.C_a, Ca, 1e-12 * Ca);
  EXPECT_NEAR(b.C_a_prime, Cap, 1e-12 * Cap);
}

TEST(Bounds, MonotoneAndHomogeneous) {
  BoundInputs in = td_bound_inputs(1.0, 0.7, 20.0, 0.0, 1e4, 1.5, 3.0, 0.4, 4, 0.1);
  in.t0 = schedule_t0(in.H, in.K2, in.T);
  const auto base = bound_constants(in);
  BoundInputs tighter = in;
  tighter.delta = 0.01;
  EXPECT_GT(bound_constants(tighter).C_a, base.C_a);
  BoundInputs scaled = in;
  scaled.x_bar *= 3.0;
  scaled.C *= 3.0;
  scaled.w_bar *= 3.0;
  const auto s = bound_constants(scaled);
  EXPECT_NEAR(s.C_a, 3.0 * base.C_a, 1e-10 * s.C_a);
  EXPECT_NEAR(s.C_a_prime, 3.0 * base.C_a_prime, 1e-10 * s.C_a_prime);
}

TEST(Bounds, PreconditionsEnforced) {
  BoundInputs in = td_bound_inputs(1.0, 0.7, 20.0, 0.0, 1e4, 1.5, 3.0, 0.4, 4, 0.1);
  in.t0 = schedule_t0(in.H, in.K2, in.T);
  BoundInputs small_h = in;
  small_h.H = 1.0;
  small_h.t0 = schedule_t0(small_h.H, small_h.K2, small_h.T);
  EXPECT_THROW(bound_constants(small_h), std::invalid_argument);
  BoundInputs wrong_t0 = in;
  wrong_t0.t0 += 1.0;
  EXPECT_THROW(bound_constants(wrong_t0), std::invalid_argument);
  BoundInputs short_run = in;
  short_run.T = 2.0;
  short_run.t0 = schedule_t0(in.H, in.K2, 2.0);
  EXPECT_THROW(bound_constants(short_run), std::invalid_argument);
}

TEST(Convergence, EightStateThreeClass) {
  Stream rng(8);
  const double gamma = 0.6;
  const auto mrp = random_mrp(8, gamma, rng);
  const AggregationMap h({0, 0, 0, 1, 1, 1, 2, 2}, 3);
  const Eigen::VectorXd dv = stationary_distribution(mrp.P);
  const auto d = to_vec(dv);
  const auto F = td_operator(mrp);
  const auto v = WeightVector::ones(3);
  const auto star = fixed_point(F, h, d, v, 1e-12).x;
  const auto mix = estimate_mixing(mrp.P, dv, 200);
  const double sp = class_mass_minimum(h, d);
  const double T = 1e5;
  const double H = minimum_H(sp, gamma);
  const double t0 = schedule_t0(H, mix.K2, T);
  const auto b = bound_constants(td_bound_inputs(mrp.r_bar, gamma, H, t0, T, mix.K1, mix.K2, sp, 3, 0.1));

  // x_bar for the generic scheme: y* = V*, w_bar bounds |sampled target - F_i|.
  const Eigen::VectorXd V = evaluate_dense(mrp.P, mrp.expected_reward(), gamma);
  const double w_bar = 2.0 * mrp.r_bar / (1.0 - gamma);
  const double xb = x_bar(gamma, V.cwiseAbs().maxCoeff(), w_bar, 1.0);

  SAState st(3, H, t0);
  std::size_t i = 0;
  std::vector<double> row(8), errs;
  Stream walk = rng.split(99);
  for (std::size_t t = 1; t <= static_cast<std::size_t>(T); ++t) {
    const auto fx = F.apply(lift(h, st.x));
    for (int k = 0; k < 8; ++k) row[static_cast<std::size_t>(k)] = mrp.P(static_cast<Eigen::Index>(i), k);
    const std::size_t j = walk.categorical(row);
    const double target = mrp.sample_reward(i, j, walk) + gamma * st.x[static_cast<std::size_t>(h(j))];
    const double w = target - fx[i];
    ASSERT_LE(std::abs(w), w_bar);
    sa_step(st, h, i, fx[i], w);
    ASSERT_LE(weighted_norm(st.x, v), xb);
    i = j;
    if (t == 1000 || t == 10000 || t == 100000) {
      std::vector<double> diff(3);
      for (int k = 0; k < 3; ++k) diff[static_cast<std::size_t>(k)] = st.x[static_cast<std::size_t>(k)] - star[static_cast<std::size_t>(k)];
      errs.push_back(weighted_norm(diff, v));
    }
  }
  ASSERT_EQ(errs.size(), 3u);
  EXPECT_LE(errs[1], errs[0]);
  EXPECT_LE(errs[2], errs[1]);
  EXPECT_LE(errs[2], b.envelope(T));
}
