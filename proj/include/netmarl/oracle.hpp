#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "netmarl/codec.hpp"
#include "netmarl/markov.hpp"
#include "netmarl/mdp.hpp"
#include "netmarl/policy.hpp"

namespace netmarl {

class OracleCapExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

struct OracleLimits {
  std::size_t max_entries = 100000;        ///< cap on |S| x |A|
  std::size_t max_dense_states = 4096;     ///< dense solves over |S| (values) or |Z| (mixing)
  std::size_t max_kernel_entries = 25000000;  ///< cap on |S| x |A| x |S| for the joint kernel
  std::size_t max_link_support = std::size_t{1} << 16;
  std::size_t mc_link_samples = 4096;
  std::uint64_t mc_seed = 0x5eed;
};

/**
 * Brute-force global model of a small networked MDP: the joint kernel
 * P(s' | s, a) and per-agent mean rewards r_i(s, a), both marginalized over
 * the link distribution. Rows are indexed z = s * |A| + a with s and a in
 * mixed-radix order (agent 0 most significant).
 */
class GlobalModel {
 public:
  explicit GlobalModel(const NetworkedMDP& mdp, const OracleLimits& limits = {})
      : mdp_(size_checked(mdp, limits)), states_(mdp.state_sizes()), actions_(mdp.action_sizes()) {
    const std::uint64_t ns = states_.count(), na = actions_.count();
    if (ns * na > limits.max_entries)
      throw OracleCapExceeded("oracle: |S||A| = " + std::to_string(ns * na) + " exceeds cap " +
                              std::to_string(limits.max_entries));
    if (ns > limits.max_dense_states || ns * na * ns > limits.max_kernel_entries)
      throw OracleCapExceeded("oracle: joint kernel of " + std::to_string(ns) + " states too large for dense evaluation");
    const LinkSupport support =
        mdp.link_distribution().support(mdp.graph(), limits.max_link_support, limits.mc_link_samples, limits.mc_seed);
    exact_links_ = support.exact;
    link_samples_ = support.mc_samples;

    const auto n = mdp.num_agents();
    const auto S = static_cast<Eigen::Index>(ns), A = static_cast<Eigen::Index>(na);
    P_ = Eigen::MatrixXd::Zero(S * A, S);
    R_ = Eigen::MatrixXd::Zero(S * A, static_cast<Eigen::Index>(n));
    std::vector<int> s(n), a(n), sp(n);
    std::vector<std::vector<double>> local(n);
    for (std::size_t i = 0; i < n; ++i) local[i].resize(static_cast<std::size_t>(states_.sizes()[i]));

    for (Eigen::Index si = 0; si < S; ++si) {
      states_.values(static_cast<std::uint64_t>(si), s);
      for (Eigen::Index ai = 0; ai < A; ++ai) {
        actions_.values(static_cast<std::uint64_t>(ai), a);
        const Eigen::Index z = si * A + ai;
        for (const auto& entry : support.entries) {
          const double w = entry.probability;
          if (w == 0.0) continue;
          for (std::size_t i = 0; i < n; ++i) {
            mdp.local_transition(static_cast<int>(i), s, a, entry.links.ls, local[i]);
            R_(z, static_cast<Eigen::Index>(i)) += w * mdp.local_reward(static_cast<int>(i), s, a, entry.links.lr);
          }
          for (Eigen::Index spi = 0; spi < S; ++spi) {
            states_.values(static_cast<std::uint64_t>(spi), sp);
            double p = w;
            for (std::size_t i = 0; i < n && p != 0.0; ++i) p *= local[i][static_cast<std::size_t>(sp[i])];
            P_(z, spi) += p;
          }
        }
      }
    }
  }

  const NetworkedMDP& mdp() const noexcept { return *mdp_; }
  const ProductIndexer& states() const noexcept { return states_; }
  const ProductIndexer& actions() const noexcept { return actions_; }
  Eigen::Index num_states() const noexcept { return static_cast<Eigen::Index>(states_.count()); }
  Eigen::Index num_actions() const noexcept { return static_cast<Eigen::Index>(actions_.count()); }
  const Eigen::MatrixXd& kernel() const noexcept { return P_; }
  const Eigen::MatrixXd& rewards() const noexcept { return R_; }
  bool exact_links() const noexcept { return exact_links_; }
  std::size_t link_samples() const noexcept { return link_samples_; }

  /// pi(a | s) for the joint product policy, |S| x |A|.
  Eigen::MatrixXd policy_matrix(const JointPolicy& policy) const {
    const auto n = mdp_->num_agents();
    Eigen::MatrixXd pi(num_states(), num_actions());
    std::vector<int> s(n), a(n);
    std::vector<std::vector<double>> local(n);
    for (Eigen::Index si = 0; si < num_states(); ++si) {
      states_.values(static_cast<std::uint64_t>(si), s);
      for (std::size_t i = 0; i < n; ++i) {
        local[i].resize(static_cast<std::size_t>(policy.action_count(static_cast<int>(i))));
        policy.distribution(static_cast<int>(i), s, local[i]);
      }
      for (Eigen::Index ai = 0; ai < num_actions(); ++ai) {
        actions_.values(static_cast<std::uint64_t>(ai), a);
        double p = 1.0;
        for (std::size_t i = 0; i < n; ++i) p *= local[i][static_cast<std::size_t>(a[i])];
        pi(si, ai) = p;
      }
    }
    return pi;
  }

  /// State chain P_pi(s' | s) = sum_a pi(a|s) P(s'|s,a).
  Eigen::MatrixXd state_chain(const Eigen::MatrixXd& pi) const {
    Eigen::MatrixXd Ps = Eigen::MatrixXd::Zero(num_states(), num_states());
    for (Eigen::Index si = 0; si < num_states(); ++si)
      for (Eigen::Index ai = 0; ai < num_actions(); ++ai)
        Ps.row(si) += pi(si, ai) * P_.row(si * num_actions() + ai);
    return Ps;
  }

  /// Product initial distribution over global states.
  Eigen::VectorXd initial_distribution() const {
    const auto n = mdp_->num_agents();
    Eigen::VectorXd p0(num_states());
    std::vector<int> s(n);
    for (Eigen::Index si = 0; si < num_states(); ++si) {
      states_.values(static_cast<std::uint64_t>(si), s);
      double p = 1.0;
      for (std::size_t i = 0; i < n; ++i) p *= mdp_->initial_marginal(static_cast<int>(i))[static_cast<std::size_t>(s[i])];
      p0(si) = p;
    }
    return p0;
  }

 private:
  // Rejects joint spaces past the cap before the indexers would overflow 64 bits.
  static const NetworkedMDP* size_checked(const NetworkedMDP& mdp, const OracleLimits& limits) {
    double log_size = 0.0;
    for (int k : mdp.state_sizes()) log_size += std::log(static_cast<double>(k));
    for (int k : mdp.action_sizes()) log_size += std::log(static_cast<double>(k));
    if (log_size > std::log(static_cast<double>(limits.max_entries)) + 1e-9)
      throw OracleCapExceeded("oracle: |S||A| = exp(" + std::to_string(log_size) + ") exceeds cap " +
                              std::to_string(limits.max_entries));
    return &mdp;
  }

  const NetworkedMDP* mdp_;
  ProductIndexer states_;
  ProductIndexer actions_;
  Eigen::MatrixXd P_;
  Eigen::MatrixXd R_;
  bool exact_links_ = true;
  std::size_t link_samples_ = 0;
};

/// Q_i^theta over all global (s, a), indexed z = s * |A| + a.
struct LocalQ {
  Eigen::VectorXd q;
  double residual = 0.0;        ///< sup-norm Bellman residual
  bool exact_links = true;
  double mc_tolerance = 0.0;    ///< reported when links were Monte-Carlo marginalized
};

namespace detail {
inline LocalQ solve_local_q(const GlobalModel& model, const Eigen::MatrixXd& pi, const Eigen::MatrixXd& Ps, int i) {
  const double gamma = model.mdp().gamma();
  const Eigen::Index S = model.num_states(), A = model.num_actions();
  const Eigen::VectorXd r = model.rewards().col(i);
  Eigen::VectorXd r_pi(S);
  for (Eigen::Index si = 0; si < S; ++si) r_pi(si) = pi.row(si).dot(r.segment(si * A, A));
  const Eigen::VectorXd V = evaluate_dense(Ps, r_pi, gamma);
  LocalQ out;
  out.q = r + gamma * model.kernel() * V;
  Eigen::VectorXd Vq(S);
  for (Eigen::Index si = 0; si < S; ++si) Vq(si) = pi.row(si).dot(out.q.segment(si * A, A));
  out.residual = (out.q - r - gamma * model.kernel() * Vq).cwiseAbs().maxCoeff();
  out.exact_links = model.exact_links();
  if (!out.exact_links) {
    const double rbar = model.mdp().reward_bound();
    out.mc_tolerance = 3.0 * rbar / ((1.0 - gamma) * (1.0 - gamma) * std::sqrt(static_cast<double>(model.link_samples())));
  }
  return out;
}
}  // namespace detail

inline LocalQ exact_local_q(const GlobalModel& model, const JointPolicy& policy, int i) {
  const Eigen::MatrixXd pi = model.policy_matrix(policy);
  return detail::solve_local_q(model, pi, model.state_chain(pi), i);
}

inline std::vector<LocalQ> exact_local_q_all(const GlobalModel& model, const JointPolicy& policy) {
  const Eigen::MatrixXd pi = model.policy_matrix(policy);
  const Eigen::MatrixXd Ps = model.state_chain(pi);
  std::vector<LocalQ> out;
  for (std::size_t i = 0; i < model.mdp().num_agents(); ++i)
    out.push_back(detail::solve_local_q(model, pi, Ps, static_cast<int>(i)));
  return out;
}

inline LocalQ exact_local_q(const NetworkedMDP& mdp, const JointPolicy& policy, int i, const OracleLimits& limits = {}) {
  return exact_local_q(GlobalModel(mdp, limits), policy, i);
}

/// J(theta) = E_{s ~ pi_0}[ sum_t gamma^t (1/n) sum_i r_i(t) ].
inline double exact_return(const GlobalModel& model, const JointPolicy& policy) {
  const Eigen::MatrixXd pi = model.policy_matrix(policy);
  const Eigen::MatrixXd Ps = model.state_chain(pi);
  const Eigen::Index S = model.num_states(), A = model.num_actions();
  const Eigen::VectorXd rbar = model.rewards().rowwise().mean();
  Eigen::VectorXd r_pi(S);
  for (Eigen::Index si = 0; si < S; ++si) r_pi(si) = pi.row(si).dot(rbar.segment(si * A, A));
  const Eigen::VectorXd V = evaluate_dense(Ps, r_pi, model.mdp().gamma());
  return model.initial_distribution().dot(V);
}

struct StationaryReport {
  Eigen::VectorXd d;                 ///< stationary distribution over z = s * |A| + a
  double residual = 0.0;
  MixingEstimate mixing;
  std::vector<double> sigma_prime;   ///< per agent, for the requested kappa
};

/// Joint (s, a) chain P_Z((s,a) -> (s',a')) = P(s'|s,a) pi(a'|s').
inline Eigen::MatrixXd state_action_chain(const GlobalModel& model, const Eigen::MatrixXd& pi) {
  const Eigen::Index S = model.num_states(), A = model.num_actions();
  Eigen::MatrixXd Pz(S * A, S * A);
  for (Eigen::Index z = 0; z < S * A; ++z)
    for (Eigen::Index sp = 0; sp < S; ++sp) Pz.row(z).segment(sp * A, A) = model.kernel()(z, sp) * pi.row(sp);
  return Pz;
}

/// sigma'(kappa) for agent i: smallest stationary mass of any (s_{N_i^kappa}, a_{N_i^kappa}) class.
inline double class_mass_minimum(const GlobalModel& model, const Eigen::VectorXd& d, int i, int kappa) {
  const NetworkedMDP& mdp = model.mdp();
  const NeighborhoodCodec codec(mdp.graph().khop(i, kappa), mdp.state_sizes(), mdp.action_sizes());
  std::vector<double> mass(static_cast<std::size_t>(codec.size()), 0.0);
  const auto n = mdp.num_agents();
  std::vector<int> s(n), a(n);
  const Eigen::Index A = model.num_actions();
  for (Eigen::Index z = 0; z < d.size(); ++z) {
    model.states().values(static_cast<std::uint64_t>(z / A), s);
    model.actions().values(static_cast<std::uint64_t>(z % A), a);
    mass[static_cast<std::size_t>(codec.encode(s, a))] += d(z);
  }
  double m = 1.0;
  for (double x : mass) m = std::min(m, x);
  return m;
}

inline StationaryReport stationary_and_mixing(const GlobalModel& model, const JointPolicy& policy, int kappa,
                                              const OracleLimits& limits = {}, std::size_t t_fit = 200) {
  const Eigen::MatrixXd pi = model.policy_matrix(policy);
  if (static_cast<std::size_t>(model.num_states() * model.num_actions()) > limits.max_dense_states)
    throw OracleCapExceeded("stationary_and_mixing: (s,a) chain too large for dense analysis");
  const Eigen::MatrixXd Pz = state_action_chain(model, pi);
  StationaryReport rep;
  rep.d = stationary_distribution(Pz);
  rep.residual = (rep.d.transpose() * Pz - rep.d.transpose()).cwiseAbs().maxCoeff();
  rep.mixing = estimate_mixing(Pz, rep.d, t_fit);
  for (std::size_t i = 0; i < model.mdp().num_agents(); ++i)
    rep.sigma_prime.push_back(class_mass_minimum(model, rep.d, static_cast<int>(i), kappa));
  return rep;
}

}  // namespace netmarl
