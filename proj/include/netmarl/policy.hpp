#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "netmarl/codec.hpp"
#include "netmarl/graph.hpp"
#include "netmarl/rng.hpp"

namespace netmarl {

/// A product policy: agent i picks a_i from a distribution depending on s_{N_i^beta}.
class JointPolicy {
 public:
  virtual ~JointPolicy() = default;

  virtual std::size_t num_agents() const = 0;
  virtual int action_count(int i) const = 0;

  /// Writes zeta_i(. | s_{N_i^beta}) into probs, reading only the neighbourhood coordinates of s.
  virtual void distribution(int i, std::span<const int> s, std::span<double> probs) const = 0;

  int sample(int i, std::span<const int> s, Stream& rng) const {
    std::vector<double> probs(static_cast<std::size_t>(action_count(i)));
    distribution(i, s, probs);
    return static_cast<int>(rng.categorical(probs));
  }

  /// Joint action; agent i draws from rng.split(i).
  void sample_joint(std::span<const int> s, const Stream& rng, std::span<int> a) const {
    std::vector<double> probs;
    for (std::size_t i = 0; i < num_agents(); ++i) {
      probs.resize(static_cast<std::size_t>(action_count(static_cast<int>(i))));
      distribution(static_cast<int>(i), s, probs);
      Stream r = rng.split(i);
      a[i] = static_cast<int>(r.categorical(probs));
    }
  }

  std::vector<int> sample_joint(std::span<const int> s, const Stream& rng) const {
    std::vector<int> a(num_agents());
    sample_joint(s, rng, a);
    return a;
  }
};

/**
 * Tabular softmax policy: theta_i is a |S_{N_i^beta}| x |A_i| table and
 * zeta_i(a | s_nb) = softmax(theta_i[s_nb, .])[a].
 */
class LocalizedPolicy final : public JointPolicy {
 public:
  LocalizedPolicy(const AgentGraph& g, std::vector<int> state_sizes, std::vector<int> action_sizes, int beta)
      : beta_(beta), action_sizes_(std::move(action_sizes)) {
    if (beta < 0) throw std::invalid_argument("LocalizedPolicy: beta must be nonnegative");
    for (std::size_t i = 0; i < g.size(); ++i) {
      codecs_.emplace_back(g.khop(static_cast<int>(i), beta), state_sizes, action_sizes_, false);
      theta_.emplace_back(static_cast<std::size_t>(codecs_.back().size()) * action_sizes_[i], 0.0);
    }
  }

  std::size_t num_agents() const override { return codecs_.size(); }
  int action_count(int i) const override { return action_sizes_.at(static_cast<std::size_t>(i)); }
  int beta() const noexcept { return beta_; }

  const NeighborhoodCodec& codec(int i) const { return codecs_.at(static_cast<std::size_t>(i)); }
  std::size_t neighborhood_states(int i) const { return static_cast<std::size_t>(codec(i).size()); }

  std::vector<double>& theta(int i) { return theta_.at(static_cast<std::size_t>(i)); }
  const std::vector<double>& theta(int i) const { return theta_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::vector<double>>& parameters() const noexcept { return theta_; }
  std::size_t parameter_count() const noexcept {
    std::size_t c = 0;
    for (const auto& t : theta_) c += t.size();
    return c;
  }

  std::size_t neighborhood_index(int i, std::span<const int> s) const {
    return static_cast<std::size_t>(codec(i).encode_states(s));
  }

  /// Softmax row for a neighbourhood-state index (max-shifted for stability).
  void probabilities(int i, std::size_t s_nb, std::span<double> probs) const {
    const auto na = static_cast<std::size_t>(action_count(i));
    const double* row = theta(i).data() + s_nb * na;
    const double mx = *std::max_element(row, row + na);
    double z = 0.0;
    for (std::size_t b = 0; b < na; ++b) z += (probs[b] = std::exp(row[b] - mx));
    for (std::size_t b = 0; b < na; ++b) probs[b] /= z;
  }

  std::vector<double> probabilities(int i, std::size_t s_nb) const {
    std::vector<double> p(static_cast<std::size_t>(action_count(i)));
    probabilities(i, s_nb, p);
    return p;
  }

  void distribution(int i, std::span<const int> s, std::span<double> probs) const override {
    probabilities(i, neighborhood_index(i, s), probs);
  }

  int sample_action(int i, std::size_t s_nb, Stream& rng) const {
    std::vector<double> p = probabilities(i, s_nb);
    return static_cast<int>(rng.categorical(p));
  }

  double log_probability(int i, std::size_t s_nb, int a) const {
    const auto na = static_cast<std::size_t>(action_count(i));
    const double* row = theta(i).data() + s_nb * na;
    const double mx = *std::max_element(row, row + na);
    double z = 0.0;
    for (std::size_t b = 0; b < na; ++b) z += std::exp(row[b] - mx);
    return row[a] - mx - std::log(z);
  }

  /// grad_theta_i log zeta_i(a | s_nb): 1{b=a} - zeta_i(b|s_nb) on row s_nb, zero elsewhere.
  std::vector<double> log_policy_gradient(int i, std::size_t s_nb, int a) const {
    std::vector<double> g(theta(i).size(), 0.0);
    accumulate_log_gradient(i, s_nb, a, 1.0, g);
    return g;
  }

  /// g += weight * grad log zeta_i(a | s_nb).
  void accumulate_log_gradient(int i, std::size_t s_nb, int a, double weight, std::span<double> g) const {
    const auto na = static_cast<std::size_t>(action_count(i));
    double probs_buf[64];
    std::vector<double> heap;
    double* probs = probs_buf;
    if (na > 64) {
      heap.resize(na);
      probs = heap.data();
    }
    probabilities(i, s_nb, std::span<double>(probs, na));
    double* row = g.data() + s_nb * na;
    for (std::size_t b = 0; b < na; ++b)
      row[b] += weight * ((static_cast<int>(b) == a ? 1.0 : 0.0) - probs[b]);
  }

  /// Bound on ||grad log zeta_i||_2 for tabular softmax: sqrt(2).
  static double score_bound() noexcept { return std::sqrt(2.0); }

 private:
  int beta_;
  std::vector<int> action_sizes_;
  std::vector<NeighborhoodCodec> codecs_;
  std::vector<std::vector<double>> theta_;
};

}  // namespace netmarl
