#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "netmarl/markov.hpp"
#include "netmarl/rng.hpp"
#include "netmarl/stochapprox.hpp"

namespace netmarl {

/**
 * Finite Markov reward process with transition matrix P and mean rewards
 * r(i, i'). Sampled rewards are r(i, i') + U[-noise, noise]; construction
 * checks that every realized reward stays within r_bar.
 */
struct MarkovRewardProcess {
  Eigen::MatrixXd P;
  Eigen::MatrixXd r;
  double r_bar = 1.0;
  double gamma = 0.0;
  double noise = 0.0;

  MarkovRewardProcess(Eigen::MatrixXd P_, Eigen::MatrixXd r_, double r_bar_, double gamma_, double noise_)
      : P(std::move(P_)), r(std::move(r_)), r_bar(r_bar_), gamma(gamma_), noise(noise_) {
    if (P.rows() != P.cols() || r.rows() != P.rows() || r.cols() != P.cols() || P.rows() == 0)
      throw std::invalid_argument("MarkovRewardProcess: shape mismatch");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("MarkovRewardProcess: gamma must lie in [0, 1)");
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      if (std::abs(P.row(i).sum() - 1.0) > 1e-12 || P.row(i).minCoeff() < 0.0)
        throw std::invalid_argument("MarkovRewardProcess: row " + std::to_string(i) + " is not a distribution");
      if (r.row(i).cwiseAbs().maxCoeff() + noise > r_bar + 1e-12)
        throw std::invalid_argument("MarkovRewardProcess: rewards in row " + std::to_string(i) + " can exceed r_bar");
    }
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(P.rows()); }
  Eigen::VectorXd expected_reward() const { return (P.cwiseProduct(r)).rowwise().sum(); }
  double sample_reward(std::size_t i, std::size_t j, Stream& rng) const {
    const double w = noise > 0.0 ? rng.uniform(-noise, noise) : 0.0;
    return r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) + w;
  }
};

/**
 * Tabular MDP with kernel rows indexed z = s * nA + a, mean rewards R(z)
 * and a strictly positive behaviour policy used to generate trajectories.
 */
struct TabularMDP {
  int nS = 0, nA = 0;
  Eigen::MatrixXd P;        ///< (nS*nA) x nS
  Eigen::VectorXd R;        ///< nS*nA
  Eigen::MatrixXd behavior; ///< nS x nA
  double r_bar = 1.0;
  double gamma = 0.0;
  double noise = 0.0;

  TabularMDP(int nS_, int nA_, Eigen::MatrixXd P_, Eigen::VectorXd R_, Eigen::MatrixXd behavior_, double r_bar_,
             double gamma_, double noise_)
      : nS(nS_), nA(nA_), P(std::move(P_)), R(std::move(R_)), behavior(std::move(behavior_)), r_bar(r_bar_),
        gamma(gamma_), noise(noise_) {
    if (nS < 1 || nA < 1 || P.rows() != nS * nA || P.cols() != nS || R.size() != nS * nA || behavior.rows() != nS ||
        behavior.cols() != nA)
      throw std::invalid_argument("TabularMDP: shape mismatch");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("TabularMDP: gamma must lie in [0, 1)");
    for (Eigen::Index z = 0; z < P.rows(); ++z) {
      if (std::abs(P.row(z).sum() - 1.0) > 1e-12 || P.row(z).minCoeff() < 0.0)
        throw std::invalid_argument("TabularMDP: kernel row " + std::to_string(z) + " is not a distribution");
      if (std::abs(R(z)) + noise > r_bar + 1e-12)
        throw std::invalid_argument("TabularMDP: reward of pair " + std::to_string(z) + " can exceed r_bar");
    }
    for (Eigen::Index s = 0; s < nS; ++s)
      if (std::abs(behavior.row(s).sum() - 1.0) > 1e-12 || !(behavior.row(s).minCoeff() > 0.0))
        throw std::invalid_argument("TabularMDP: behaviour policy must be strictly positive in state " +
                                    std::to_string(s));
  }

  Eigen::Index index(int s, int a) const noexcept { return static_cast<Eigen::Index>(s) * nA + a; }

  /// State chain under the behaviour policy.
  Eigen::MatrixXd behavior_chain() const {
    Eigen::MatrixXd Ps = Eigen::MatrixXd::Zero(nS, nS);
    for (int s = 0; s < nS; ++s)
      for (int a = 0; a < nA; ++a) Ps.row(s) += behavior(s, a) * P.row(index(s, a));
    return Ps;
  }

  /// Stationary d(s, a) = d_S(s) pi(a | s) of the behaviour chain.
  Eigen::VectorXd behavior_stationary() const {
    const Eigen::VectorXd ds = stationary_distribution(behavior_chain());
    Eigen::VectorXd d(nS * nA);
    for (int s = 0; s < nS; ++s)
      for (int a = 0; a < nA; ++a) d(index(s, a)) = ds(s) * behavior(s, a);
    return d;
  }
};

// ---------------------------------------------------------------------------
// Exact solvers

/// V* of an MRP by dense LU.
inline Eigen::VectorXd value_iteration(const MarkovRewardProcess& mrp) {
  return evaluate_dense(mrp.P, mrp.expected_reward(), mrp.gamma);
}

/// V* of an MRP by repeated Bellman sweeps until the sup-norm residual is <= tol.
inline Eigen::VectorXd value_iteration_sweeps(const MarkovRewardProcess& mrp, double tol, std::size_t max_sweeps = 1000000) {
  const Eigen::VectorXd rbar = mrp.expected_reward();
  Eigen::VectorXd V = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mrp.size()));
  for (std::size_t k = 0; k < max_sweeps; ++k) {
    Eigen::VectorXd next = rbar + mrp.gamma * mrp.P * V;
    const double res = (next - V).cwiseAbs().maxCoeff();
    V = std::move(next);
    if (res <= tol) return V;
  }
  throw std::runtime_error("value_iteration_sweeps: no convergence");
}

/// Q* by Bellman-optimality iteration until the sup-norm residual is <= tol.
inline Eigen::VectorXd value_iteration(const TabularMDP& mdp, double tol = 1e-12, std::size_t max_sweeps = 10000000) {
  Eigen::VectorXd Q = Eigen::VectorXd::Zero(mdp.nS * mdp.nA);
  Eigen::VectorXd V(mdp.nS);
  for (std::size_t k = 0; k < max_sweeps; ++k) {
    for (int s = 0; s < mdp.nS; ++s) V(s) = Q.segment(static_cast<Eigen::Index>(s) * mdp.nA, mdp.nA).maxCoeff();
    Eigen::VectorXd next = mdp.R + mdp.gamma * mdp.P * V;
    const double res = (next - Q).cwiseAbs().maxCoeff();
    Q = std::move(next);
    if (res <= tol * (1.0 - mdp.gamma)) return Q;
  }
  throw std::runtime_error("value_iteration: no convergence");
}

/// F_i(V) = E_{i' ~ P(.|i)}[r(i,i') + gamma V_{i'}]; offset C = max expected |reward|.
inline ContractionOperator td_operator(const MarkovRewardProcess& mrp) {
  const Eigen::VectorXd rbar = mrp.expected_reward();
  ContractionOperator F;
  F.gamma = mrp.gamma;
  F.C = rbar.cwiseAbs().maxCoeff();
  F.dim = mrp.size();
  F.apply = [P = mrp.P, rbar, g = mrp.gamma](std::span<const double> y) {
    const Eigen::Map<const Eigen::VectorXd> V(y.data(), static_cast<Eigen::Index>(y.size()));
    const Eigen::VectorXd out = rbar + g * P * V;
    return std::vector<double>(out.data(), out.data() + out.size());
  };
  return F;
}

/// F_{(s,a)}(Q) = R(s,a) + gamma E_{s'}[max_{a'} Q(s',a')] over ground pairs.
inline ContractionOperator bellman_optimality_operator(const TabularMDP& mdp) {
  ContractionOperator F;
  F.gamma = mdp.gamma;
  F.C = mdp.R.cwiseAbs().maxCoeff();
  F.dim = static_cast<std::size_t>(mdp.nS * mdp.nA);
  F.apply = [P = mdp.P, R = mdp.R, g = mdp.gamma, nS = mdp.nS, nA = mdp.nA](std::span<const double> y) {
    Eigen::VectorXd V(nS);
    for (int s = 0; s < nS; ++s) {
      double m = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < nA; ++a) m = std::max(m, y[static_cast<std::size_t>(s * nA + a)]);
      V(s) = m;
    }
    const Eigen::VectorXd out = R + g * P * V;
    return std::vector<double>(out.data(), out.data() + out.size());
  };
  return F;
}

/// Smallest class mass of d under h.
inline double class_mass_minimum(const AggregationMap& h, std::span<const double> d) {
  std::vector<double> mass(h.m(), 0.0);
  for (std::size_t i = 0; i < h.n(); ++i) mass[static_cast<std::size_t>(h(i))] += d[i];
  return *std::min_element(mass.begin(), mass.end());
}

/// h(s, a) = psi1(s) * |psi2(A)| + psi2(a) as an aggregation of the S x A ground space.
inline AggregationMap pair_aggregation(const AggregationMap& psi1, const AggregationMap& psi2) {
  std::vector<int> h;
  h.reserve(psi1.n() * psi2.n());
  for (std::size_t s = 0; s < psi1.n(); ++s)
    for (std::size_t a = 0; a < psi2.n(); ++a)
      h.push_back(psi1(s) * static_cast<int>(psi2.m()) + psi2(a));
  return AggregationMap(std::move(h), static_cast<int>(psi1.m() * psi2.m()));
}

// ---------------------------------------------------------------------------
// Learning

struct Schedule {
  double H = 1.0;
  double t0 = 1.0;
  double alpha(std::size_t t) const noexcept { return H / (static_cast<double>(t) + t0); }
};

struct LearningResult {
  std::vector<double> theta;
  double max_abs_theta = 0.0;          ///< sup over the run of ||theta(t)||_inf
  std::vector<std::string> warnings;
};

struct LearningOptions {
  double sigma_prime = 0.0;  ///< when > 0 the step-size precondition H >= 2/(sigma'(1-gamma)) is checked
  int initial_state = -1;    ///< -1: uniform draw
  /// Called after the update of step t (t counted from 1) when t is in `log_steps`.
  std::vector<std::size_t> log_steps;
  std::function<void(std::size_t, const std::vector<double>&)> on_log;
};

inline void check_schedule(const Schedule& sch, double gamma, const LearningOptions& opt, LearningResult& out) {
  if (opt.sigma_prime > 0.0 && sch.H < minimum_H(opt.sigma_prime, gamma) * (1.0 - 1e-12))
    out.warnings.push_back("step size H=" + std::to_string(sch.H) + " below 2/(sigma'(1-gamma))=" +
                           std::to_string(minimum_H(opt.sigma_prime, gamma)) + "; finite-time bound not guaranteed");
}

/// TD(0) with state aggregation along one trajectory of the MRP.
inline LearningResult td0_aggregated(const MarkovRewardProcess& mrp, const AggregationMap& h, const Schedule& sch,
                                     std::size_t T, const Stream& rng, const LearningOptions& opt = {}) {
  if (h.n() != mrp.size()) throw std::invalid_argument("td0_aggregated: aggregation size mismatch");
  LearningResult out;
  check_schedule(sch, mrp.gamma, opt, out);
  out.theta.assign(h.m(), 0.0);
  Stream init = rng.split(stream_tag::kInitial);
  Stream trans = rng.split(stream_tag::kTransition);
  std::size_t i = opt.initial_state >= 0 ? static_cast<std::size_t>(opt.initial_state) : init.below(mrp.size());
  std::size_t next_log = 0;
  std::vector<double> row(mrp.size());
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = mrp.P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    const std::size_t j = trans.categorical(row);
    const double r = mrp.sample_reward(i, j, trans);
    double& th = out.theta[static_cast<std::size_t>(h(i))];
    th += sch.alpha(t) * (r + mrp.gamma * out.theta[static_cast<std::size_t>(h(j))] - th);
    out.max_abs_theta = std::max(out.max_abs_theta, std::abs(th));
    i = j;
    while (next_log < opt.log_steps.size() && opt.log_steps[next_log] == t + 1) {
      if (opt.on_log) opt.on_log(t + 1, out.theta);
      ++next_log;
    }
  }
  return out;
}

/// Q-learning with state abstraction psi1 and action abstraction psi2 along one behaviour trajectory.
inline LearningResult q_learning_aggregated(const TabularMDP& mdp, const AggregationMap& psi1,
                                            const AggregationMap& psi2, const Schedule& sch, std::size_t T,
                                            const Stream& rng, const LearningOptions& opt = {}) {
  if (psi1.n() != static_cast<std::size_t>(mdp.nS) || psi2.n() != static_cast<std::size_t>(mdp.nA))
    throw std::invalid_argument("q_learning_aggregated: abstraction size mismatch");
  LearningResult out;
  check_schedule(sch, mdp.gamma, opt, out);
  const AggregationMap h = pair_aggregation(psi1, psi2);
  out.theta.assign(h.m(), 0.0);
  Stream init = rng.split(stream_tag::kInitial);
  Stream trans = rng.split(stream_tag::kTransition);
  Stream act = rng.split(stream_tag::kAction);
  int s = opt.initial_state >= 0 ? opt.initial_state : static_cast<int>(init.below(static_cast<std::uint64_t>(mdp.nS)));
  std::vector<double> pol(static_cast<std::size_t>(mdp.nA)), row(static_cast<std::size_t>(mdp.nS));
  std::size_t next_log = 0;
  for (std::size_t t = 0; t < T; ++t) {
    for (int a = 0; a < mdp.nA; ++a) pol[static_cast<std::size_t>(a)] = mdp.behavior(s, a);
    const int a = static_cast<int>(act.categorical(pol));
    const Eigen::Index z = mdp.index(s, a);
    for (int k = 0; k < mdp.nS; ++k) row[static_cast<std::size_t>(k)] = mdp.P(z, k);
    const int sp = static_cast<int>(trans.categorical(row));
    const double r = mdp.R(z) + (mdp.noise > 0.0 ? trans.uniform(-mdp.noise, mdp.noise) : 0.0);
    double target = -std::numeric_limits<double>::infinity();
    for (int b = 0; b < mdp.nA; ++b)
      target = std::max(target, out.theta[static_cast<std::size_t>(h(static_cast<std::size_t>(mdp.index(sp, b))))]);
    double& th = out.theta[static_cast<std::size_t>(h(static_cast<std::size_t>(z)))];
    th += sch.alpha(t) * (r + mdp.gamma * target - th);
    out.max_abs_theta = std::max(out.max_abs_theta, std::abs(th));
    s = sp;
    while (next_log < opt.log_steps.size() && opt.log_steps[next_log] == t + 1) {
      if (opt.on_log) opt.on_log(t + 1, out.theta);
      ++next_log;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregated MDP and abstraction quality

/**
 * M_psi over (psi1(S), psi2(A)): rewards and class-to-class kernels are
 * d-conditional averages within each (x, y) class. The behaviour policy of
 * the result is uniform.
 */
inline TabularMDP build_aggregated_mdp(const TabularMDP& mdp, const AggregationMap& psi1, const AggregationMap& psi2,
                                       std::span<const double> d) {
  if (d.size() != static_cast<std::size_t>(mdp.nS * mdp.nA))
    throw std::invalid_argument("build_aggregated_mdp: d must cover S x A");
  const int mS = static_cast<int>(psi1.m()), mA = static_cast<int>(psi2.m());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(mS * mA, mS);
  Eigen::VectorXd R = Eigen::VectorXd::Zero(mS * mA);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(mS * mA);
  for (int s = 0; s < mdp.nS; ++s)
    for (int a = 0; a < mdp.nA; ++a) {
      const Eigen::Index z = mdp.index(s, a);
      const double w = d[static_cast<std::size_t>(z)];
      if (!(w > 0.0)) throw std::invalid_argument("build_aggregated_mdp: d must be strictly positive");
      const Eigen::Index c = static_cast<Eigen::Index>(psi1(static_cast<std::size_t>(s))) * mA + psi2(static_cast<std::size_t>(a));
      mass(c) += w;
      R(c) += w * mdp.R(z);
      for (int sp = 0; sp < mdp.nS; ++sp) P(c, psi1(static_cast<std::size_t>(sp))) += w * mdp.P(z, sp);
    }
  for (Eigen::Index c = 0; c < mS * mA; ++c) {
    if (!(mass(c) > 0.0)) throw std::invalid_argument("build_aggregated_mdp: class " + std::to_string(c) + " has zero mass");
    R(c) /= mass(c);
    P.row(c) /= mass(c);
    P.row(c) /= P.row(c).sum();
  }
  Eigen::MatrixXd behavior = Eigen::MatrixXd::Constant(mS, mA, 1.0 / mA);
  return TabularMDP(mS, mA, std::move(P), std::move(R), std::move(behavior), mdp.r_bar, mdp.gamma, 0.0);
}

struct AbstractionQuality {
  double zeta = 0.0;            ///< max within-class range
  double epsilon_qstar = 0.0;   ///< min_q ||Phi q - values||_inf, attained by class midpoints
  std::vector<double> q_fit;    ///< the midpoint fit
};

inline AbstractionQuality abstraction_quality(std::span<const double> values, const AggregationMap& h) {
  if (values.size() != h.n()) throw std::invalid_argument("abstraction_quality: size mismatch");
  std::vector<double> lo(h.m(), std::numeric_limits<double>::infinity()), hi(h.m(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < h.n(); ++i) {
    const auto j = static_cast<std::size_t>(h(i));
    lo[j] = std::min(lo[j], values[i]);
    hi[j] = std::max(hi[j], values[i]);
  }
  AbstractionQuality q;
  q.q_fit.resize(h.m());
  for (std::size_t j = 0; j < h.m(); ++j) {
    q.zeta = std::max(q.zeta, hi[j] - lo[j]);
    q.q_fit[j] = 0.5 * (hi[j] + lo[j]);
  }
  q.epsilon_qstar = 0.5 * q.zeta;
  return q;
}

// ---------------------------------------------------------------------------
// Random fixtures

/// Random ergodic MRP: rows Dirichlet-like with every entry >= floor / n, rewards U[lo, hi].
inline MarkovRewardProcess random_mrp(int n, double gamma, Stream& rng, double reward_lo = 0.0, double reward_hi = 0.9,
                                      double noise = 0.1, double floor = 0.2) {
  Eigen::MatrixXd P(n, n), r(n, n);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) sum += (P(i, j) = -std::log(1.0 - rng.uniform()));
    for (int j = 0; j < n; ++j) P(i, j) = (1.0 - floor) * P(i, j) / sum + floor / n;
    P.row(i) /= P.row(i).sum();
    for (int j = 0; j < n; ++j) r(i, j) = rng.uniform(reward_lo, reward_hi);
  }
  return MarkovRewardProcess(std::move(P), std::move(r), std::max(std::abs(reward_lo), std::abs(reward_hi)) + noise,
                             gamma, noise);
}

/// Random MDP with full-support kernels, rewards U[lo, hi] and a uniform behaviour policy.
inline TabularMDP random_mdp(int nS, int nA, double gamma, Stream& rng, double reward_lo = 0.0, double reward_hi = 0.9,
                             double noise = 0.1, double floor = 0.2) {
  Eigen::MatrixXd P(nS * nA, nS);
  Eigen::VectorXd R(nS * nA);
  for (int z = 0; z < nS * nA; ++z) {
    double sum = 0.0;
    for (int j = 0; j < nS; ++j) sum += (P(z, j) = -std::log(1.0 - rng.uniform()));
    for (int j = 0; j < nS; ++j) P(z, j) = (1.0 - floor) * P(z, j) / sum + floor / nS;
    P.row(z) /= P.row(z).sum();
    R(z) = rng.uniform(reward_lo, reward_hi);
  }
  Eigen::MatrixXd behavior = Eigen::MatrixXd::Constant(nS, nA, 1.0 / nA);
  return TabularMDP(nS, nA, std::move(P), std::move(R), std::move(behavior),
                    std::max(std::abs(reward_lo), std::abs(reward_hi)) + noise, gamma, noise);
}

}  // namespace netmarl
