#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace netmarl {

/// Surjection h from n ground states onto m abstract states.
class AggregationMap {
 public:
  AggregationMap() = default;
  AggregationMap(std::vector<int> h, int m) : h_(std::move(h)), m_(m) {
    if (m_ < 1) throw std::invalid_argument("AggregationMap: need at least one class");
    std::vector<char> hit(static_cast<std::size_t>(m_), 0);
    for (int c : h_) {
      if (c < 0 || c >= m_) throw std::invalid_argument("AggregationMap: class index out of range");
      hit[static_cast<std::size_t>(c)] = 1;
    }
    for (int c = 0; c < m_; ++c)
      if (!hit[static_cast<std::size_t>(c)])
        throw std::invalid_argument("AggregationMap: class " + std::to_string(c) + " has no members (not surjective)");
  }

  static AggregationMap identity(int n) {
    std::vector<int> h(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) h[static_cast<std::size_t>(i)] = i;
    return AggregationMap(std::move(h), n);
  }

  std::size_t n() const noexcept { return h_.size(); }
  std::size_t m() const noexcept { return static_cast<std::size_t>(m_); }
  int operator()(std::size_t i) const { return h_[i]; }
  const std::vector<int>& map() const noexcept { return h_; }

 private:
  std::vector<int> h_;
  int m_ = 0;
};

/// Strictly positive weights for the weighted infinity norm.
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(std::vector<double> v) : v_(std::move(v)) {
    if (v_.empty()) throw std::invalid_argument("WeightVector: empty");
    for (double x : v_)
      if (!(x > 0.0)) throw std::invalid_argument("WeightVector: entries must be strictly positive");
  }
  static WeightVector ones(std::size_t m) { return WeightVector(std::vector<double>(m, 1.0)); }

  std::size_t size() const noexcept { return v_.size(); }
  double operator[](std::size_t j) const { return v_[j]; }
  double lower() const { return *std::min_element(v_.begin(), v_.end()); }
  const std::vector<double>& values() const noexcept { return v_; }

 private:
  std::vector<double> v_;
};

/// ||x||_v = max_j |x_j| / v_j on the abstract space.
inline double weighted_norm(std::span<const double> x, const WeightVector& v) {
  if (x.size() != v.size()) throw std::invalid_argument("weighted_norm: dimension mismatch");
  double out = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) out = std::max(out, std::abs(x[j]) / v[j]);
  return out;
}

/// Ground-space version: ||y||_v = max_i |y_i| / v_{h(i)}.
inline double weighted_norm(std::span<const double> y, const WeightVector& v, const AggregationMap& h) {
  if (y.size() != h.n() || v.size() != h.m()) throw std::invalid_argument("weighted_norm: dimension mismatch");
  double out = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) out = std::max(out, std::abs(y[i]) / v[static_cast<std::size_t>(h(i))]);
  return out;
}

/// Phi x: copies each abstract value to the members of its class.
inline std::vector<double> lift(const AggregationMap& h, std::span<const double> x) {
  if (x.size() != h.m()) throw std::invalid_argument("lift: dimension mismatch");
  std::vector<double> y(h.n());
  for (std::size_t i = 0; i < h.n(); ++i) y[i] = x[static_cast<std::size_t>(h(i))];
  return y;
}

/// Pi y: d-weighted average of y over each class.
inline std::vector<double> project_pi(const AggregationMap& h, std::span<const double> d, std::span<const double> y) {
  if (d.size() != h.n() || y.size() != h.n()) throw std::invalid_argument("project_pi: dimension mismatch");
  std::vector<double> num(h.m(), 0.0), den(h.m(), 0.0);
  for (std::size_t i = 0; i < h.n(); ++i) {
    const auto j = static_cast<std::size_t>(h(i));
    num[j] += d[i] * y[i];
    den[j] += d[i];
  }
  for (std::size_t j = 0; j < h.m(); ++j) {
    if (!(den[j] > 0.0))
      throw std::invalid_argument("project_pi: class " + std::to_string(j) + " has zero stationary mass");
    num[j] /= den[j];
  }
  return num;
}

/// F : R^N -> R^N with declared contraction factor gamma and offset C.
struct ContractionOperator {
  std::function<std::vector<double>(std::span<const double>)> apply;
  double gamma = 0.0;
  double C = 0.0;
  std::size_t dim = 0;
};

class ContractionViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FixedPointResult {
  std::vector<double> x;
  double residual = 0.0;
  std::size_t iterations = 0;
};

/**
 * Iterates x <- Pi F(Phi x) from x = 0 until ||Pi F(Phi x) - x||_v <= tol.
 * Gives up with ContractionViolation when the residual grows for 10
 * consecutive iterations or the geometric iteration budget is exhausted.
 */
inline FixedPointResult fixed_point(const ContractionOperator& F, const AggregationMap& h, std::span<const double> d,
                                    const WeightVector& v, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("fixed_point: tol must be positive");
  if (!(F.gamma >= 0.0 && F.gamma < 1.0)) throw std::invalid_argument("fixed_point: declared gamma must lie in [0, 1)");
  auto T = [&](std::span<const double> x) { return project_pi(h, d, F.apply(lift(h, x))); };
  FixedPointResult r;
  r.x.assign(h.m(), 0.0);
  std::vector<double> next = T(r.x);
  const double x1 = weighted_norm(next, v);
  std::size_t cap = 10;
  if (x1 > tol && F.gamma > 0.0)
    cap += static_cast<std::size_t>(std::max(0.0, std::ceil(std::log(tol * (1.0 - F.gamma) / x1) / std::log(F.gamma))));
  double prev_residual = std::numeric_limits<double>::infinity();
  int increases = 0;
  for (std::size_t it = 0;; ++it) {
    std::vector<double> diff(next.size());
    for (std::size_t j = 0; j < next.size(); ++j) diff[j] = next[j] - r.x[j];
    r.residual = weighted_norm(diff, v);
    r.iterations = it;
    if (r.residual <= tol) return r;
    increases = r.residual > prev_residual ? increases + 1 : 0;
    if (increases >= 10)
      throw ContractionViolation("fixed_point: residual increased for 10 consecutive iterations; F is not a gamma-contraction in the weighted norm");
    if (it >= cap)
      throw ContractionViolation("fixed_point: no convergence within " + std::to_string(cap) +
                                 " iterations; F violates its declared contraction factor");
    prev_residual = r.residual;
    r.x = std::move(next);
    next = T(r.x);
  }
}

/// Iterate of the aggregated SA scheme with step size alpha_t = H / (t + t0).
struct SAState {
  std::vector<double> x;
  std::size_t t = 0;
  double H = 1.0;
  double t0 = 1.0;
  double noise_bound = std::numeric_limits<double>::infinity();  ///< |w| checked against this when finite

  SAState(std::size_t m, double H_, double t0_) : x(m, 0.0), H(H_), t0(t0_) {}
  double alpha() const noexcept { return H / (static_cast<double>(t) + t0); }
};

/// x_{h(i)} += alpha_t (f_val - x_{h(i)} + w); t += 1.
inline void sa_step(SAState& state, const AggregationMap& h, std::size_t i, double f_val, double w) {
  if (std::abs(w) > state.noise_bound)
    throw std::invalid_argument("sa_step: noise " + std::to_string(w) + " exceeds the declared bound");
  const double a = state.alpha();
  double& xj = state.x[static_cast<std::size_t>(h(i))];
  xj += a * (f_val - xj + w);
  ++state.t;
}

/// Upper bound on ||x(t)||_v for compliant operators and noise.
inline double x_bar(double gamma, double y_star_norm, double w_bar, double v_lower) {
  return ((1.0 + gamma) * y_star_norm + w_bar / v_lower) / (1.0 - gamma);
}

struct BoundInputs {
  double H = 0.0;
  double t0 = 0.0;
  double T = 0.0;
  double K1 = 1.0;
  double K2 = 1.0;
  double sigma_prime = 1.0;
  double gamma = 0.0;
  double x_bar = 0.0;
  double C = 0.0;
  double w_bar = 0.0;
  double v_lower = 1.0;
  double m = 1.0;
  double delta = 0.1;
};

struct BoundConstants {
  double C1 = 0.0, C2 = 0.0, C3 = 0.0;
  double C_a = 0.0, C_a_prime = 0.0;
  double t0 = 0.0;

  /// C_a / sqrt(T + t0) + C_a' / (T + t0)
  double envelope(double T) const { return C_a / std::sqrt(T + t0) + C_a_prime / (T + t0); }
};

inline double schedule_t0(double H, double K2, double T) { return std::max(4.0 * H, 2.0 * K2 * std::log(T)); }
inline double minimum_H(double sigma_prime, double gamma) { return 2.0 / (sigma_prime * (1.0 - gamma)); }

/// Finite-time constants of the aggregated SA scheme (natural logarithms).
inline BoundConstants bound_constants(const BoundInputs& in) {
  if (!(in.gamma >= 0.0 && in.gamma < 1.0)) throw std::invalid_argument("bound_constants: gamma must lie in [0, 1)");
  if (!(in.sigma_prime > 0.0 && in.sigma_prime <= 1.0)) throw std::invalid_argument("bound_constants: sigma' must lie in (0, 1]");
  if (!(in.T >= 3.0)) throw std::invalid_argument("bound_constants: T must be at least 3 so that ln ln T > 0");
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw std::invalid_argument("bound_constants: delta must lie in (0, 1)");
  if (!(in.K1 > 0.0 && in.K2 > 0.0 && in.m >= 1.0 && in.v_lower > 0.0))
    throw std::invalid_argument("bound_constants: K1, K2, v_lower must be positive and m >= 1");
  const double h_min = minimum_H(in.sigma_prime, in.gamma);
  if (in.H < h_min * (1.0 - 1e-12))
    throw std::invalid_argument("bound_constants: H = " + std::to_string(in.H) + " below 2/(sigma'(1-gamma)) = " +
                                std::to_string(h_min));
  const double t0_req = schedule_t0(in.H, in.K2, in.T);
  if (std::abs(in.t0 - t0_req) > 1e-9 * std::max(1.0, t0_req))
    throw std::invalid_argument("bound_constants: t0 must equal max(4H, 2 K2 ln T) = " + std::to_string(t0_req));

  BoundConstants b;
  b.t0 = in.t0;
  const double lnT = std::log(in.T);
  b.C1 = 2.0 * in.x_bar + in.C + in.w_bar / in.v_lower;
  b.C2 = 4.0 * in.x_bar + 2.0 * in.C + in.w_bar / in.v_lower;
  b.C3 = 2.0 * in.K1 * (2.0 * in.x_bar + in.C) * (1.0 + 2.0 * in.K2 + 4.0 * in.H);
  b.C_a = 4.0 * in.H * b.C2 / (1.0 - in.gamma) *
          std::sqrt(in.K2 * lnT * (std::log(4.0 * in.m * in.K2 * in.T / in.delta) + std::log(lnT)));
  b.C_a_prime =
      4.0 * std::max((48.0 * in.K2 * b.C1 * in.H * lnT + in.sigma_prime * b.C3) / ((1.0 - in.gamma) * in.sigma_prime),
                     2.0 * in.x_bar * (2.0 * in.K2 * lnT + in.t0) / (1.0 - in.gamma));
  return b;
}

/**
 * The constants specialised to TD-type iterates with rewards bounded by
 * r_bar and unit weights: x_bar = r_bar/(1-gamma), C = w_bar = 2 r_bar/(1-gamma).
 */
inline BoundInputs td_bound_inputs(double r_bar, double gamma, double H, double t0, double T, double K1, double K2,
                                   double sigma_prime, double m, double delta) {
  BoundInputs in;
  in.H = H;
  in.t0 = t0;
  in.T = T;
  in.K1 = K1;
  in.K2 = K2;
  in.sigma_prime = sigma_prime;
  in.gamma = gamma;
  in.x_bar = r_bar / (1.0 - gamma);
  in.C = 2.0 * r_bar / (1.0 - gamma);
  in.w_bar = 2.0 * r_bar / (1.0 - gamma);
  in.v_lower = 1.0;
  in.m = m;
  in.delta = delta;
  return in;
}

}  // namespace netmarl
