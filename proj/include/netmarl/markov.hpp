#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace netmarl {

/// Raised when a chain is reducible, periodic, or otherwise not ergodic.
class ChainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Stationary distribution by power iteration from a point mass on state 0.
 * A periodic chain never settles and a reducible one leaves some state with
 * no mass; both raise ChainError.
 */
inline Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P, double tol = 1e-10,
                                               std::size_t max_iter = 1000000) {
  const Eigen::Index n = P.rows();
  if (n == 0 || P.cols() != n) throw std::invalid_argument("stationary_distribution: square nonempty matrix required");
  // Structural irreducibility: every state reaches state 0 and is reached from it.
  for (int dir = 0; dir < 2; ++dir) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<Eigen::Index> stack = {0};
    seen[0] = 1;
    while (!stack.empty()) {
      const Eigen::Index u = stack.back();
      stack.pop_back();
      for (Eigen::Index v = 0; v < n; ++v) {
        const double w = dir == 0 ? P(u, v) : P(v, u);
        if (w > 0.0 && !seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          stack.push_back(v);
        }
      }
    }
    for (Eigen::Index k = 0; k < n; ++k)
      if (!seen[static_cast<std::size_t>(k)])
        throw ChainError("stationary_distribution: reducible chain (state " + std::to_string(k) +
                         (dir == 0 ? " unreachable from state 0)" : " cannot reach state 0)"));
  }
  Eigen::RowVectorXd d = Eigen::RowVectorXd::Zero(n);
  d(0) = 1.0;
  bool converged = false;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Eigen::RowVectorXd next = d * P;
    const double diff = (next - d).cwiseAbs().maxCoeff();
    d = next / next.sum();
    if (diff <= tol * 1e-3) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw ChainError("stationary_distribution: power iteration did not contract (periodic or very slowly mixing chain)");
  const double residual = (d * P - d).cwiseAbs().maxCoeff();
  if (residual > tol) throw ChainError("stationary_distribution: residual " + std::to_string(residual) + " above tolerance");
  for (Eigen::Index k = 0; k < n; ++k)
    if (!(d(k) > 0.0))
      throw ChainError("stationary_distribution: state " + std::to_string(k) +
                       " has zero stationary mass (reducible chain from state 0)");
  return d.transpose();
}

/// Second-largest eigenvalue modulus: drop one eigenvalue nearest 1, take the max modulus of the rest.
inline double second_eigenvalue_modulus(const Eigen::MatrixXd& P) {
  if (P.rows() <= 1) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(P, false);
  const auto& ev = es.eigenvalues();
  Eigen::Index unit = 0;
  double best = 1e300;
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    const double dist = std::abs(ev(k) - std::complex<double>(1.0, 0.0));
    if (dist < best) {
      best = dist;
      unit = k;
    }
  }
  double mu2 = 0.0;
  for (Eigen::Index k = 0; k < ev.size(); ++k)
    if (k != unit) mu2 = std::max(mu2, std::abs(ev(k)));
  return std::min(mu2, 1.0);
}

/// sup_z TV(P^t(z, .), d) for t = 0..t_max.
inline std::vector<double> tv_profile(const Eigen::MatrixXd& P, const Eigen::VectorXd& d, std::size_t t_max) {
  const Eigen::Index n = P.rows();
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
  std::vector<double> out;
  out.reserve(t_max + 1);
  for (std::size_t t = 0; t <= t_max; ++t) {
    double worst = 0.0;
    for (Eigen::Index z = 0; z < n; ++z) worst = std::max(worst, 0.5 * (M.row(z).transpose() - d).cwiseAbs().sum());
    out.push_back(worst);
    if (t < t_max) M = M * P;
  }
  return out;
}

struct MixingEstimate {
  double mu2 = 0.0;
  double K1 = 1.0;
  double K2 = 1.0;
  std::vector<double> tv;  ///< measured profile used for the fit
};

/**
 * K2 = max(1, -1/ln mu2) from the second eigenvalue; K1 is the smallest
 * constant with TV(t) <= K1 exp(-t/K2) over the measured horizon (points
 * with TV below 1e-12 are numerical noise and ignored).
 */
inline MixingEstimate estimate_mixing(const Eigen::MatrixXd& P, const Eigen::VectorXd& d, std::size_t t_fit = 200) {
  MixingEstimate m;
  m.mu2 = second_eigenvalue_modulus(P);
  m.K2 = m.mu2 <= 0.0 ? 1.0 : std::max(1.0, -1.0 / std::log(m.mu2));
  m.tv = tv_profile(P, d, t_fit);
  m.K1 = 1.0;
  for (std::size_t t = 0; t < m.tv.size(); ++t)
    if (m.tv[t] > 1e-12) m.K1 = std::max(m.K1, m.tv[t] * std::exp(static_cast<double>(t) / m.K2));
  return m;
}

/// Solves V = r + gamma P V by dense LU.
inline Eigen::VectorXd evaluate_dense(const Eigen::MatrixXd& P, const Eigen::VectorXd& r, double gamma) {
  const Eigen::Index n = P.rows();
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - gamma * P;
  return A.partialPivLu().solve(r);
}

}  // namespace netmarl
