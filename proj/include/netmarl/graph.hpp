#pragma once

#include <algorithm>
#include <climits>
#include <cstddef>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace netmarl {

inline constexpr int kUnreachable = INT_MAX / 4;

/// Undirected agent graph with precomputed all-pairs hop distances.
class AgentGraph {
 public:
  AgentGraph() = default;

  AgentGraph(std::size_t n, std::vector<std::pair<int, int>> edges) : n_(n), adjacency_(n) {
    for (auto [u, v] : edges) {
      if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n)
        throw std::out_of_range("AgentGraph: edge endpoint out of range");
      if (u == v) continue;
      if (u > v) std::swap(u, v);
      edges_.emplace_back(u, v);
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    for (auto [u, v] : edges_) {
      adjacency_[u].push_back(v);
      adjacency_[v].push_back(u);
    }
    for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());
    compute_distances();
  }

  static AgentGraph path(std::size_t n) {
    std::vector<std::pair<int, int>> e;
    for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(static_cast<int>(i), static_cast<int>(i + 1));
    return AgentGraph(n, std::move(e));
  }

  /// h x w grid with 4-connectivity; agent id = row * w + col.
  static AgentGraph grid(std::size_t h, std::size_t w) {
    std::vector<std::pair<int, int>> e;
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        const int id = static_cast<int>(r * w + c);
        if (c + 1 < w) e.emplace_back(id, id + 1);
        if (r + 1 < h) e.emplace_back(id, id + static_cast<int>(w));
      }
    return AgentGraph(h * w, std::move(e));
  }

  std::size_t size() const noexcept { return n_; }
  const std::vector<std::pair<int, int>>& edges() const noexcept { return edges_; }
  const std::vector<int>& neighbors(int i) const { return adjacency_.at(check(i)); }

  int distance(int i, int j) const { return dist_[check(i) * n_ + check(j)]; }

  /// N_i^kappa, sorted ascending; always contains i.
  std::vector<int> khop(int i, int kappa) const {
    check(i);
    if (kappa < 0) throw std::invalid_argument("khop: kappa must be nonnegative");
    std::vector<int> out;
    for (std::size_t j = 0; j < n_; ++j)
      if (dist_[i * n_ + j] <= kappa) out.push_back(static_cast<int>(j));
    return out;
  }

  /// N_{-i}^kappa: agents strictly farther than kappa (including unreachable ones).
  std::vector<int> exterior(int i, int kappa) const {
    check(i);
    std::vector<int> out;
    for (std::size_t j = 0; j < n_; ++j)
      if (dist_[i * n_ + j] > kappa) out.push_back(static_cast<int>(j));
    return out;
  }

  /// Agents at distance exactly kappa from i.
  std::vector<int> boundary(int i, int kappa) const {
    check(i);
    std::vector<int> out;
    for (std::size_t j = 0; j < n_; ++j)
      if (dist_[i * n_ + j] == kappa) out.push_back(static_cast<int>(j));
    return out;
  }

  /// f(kappa) = max_i |N_i^kappa|.
  std::size_t max_khop_size(int kappa) const {
    std::size_t best = 0;
    for (std::size_t i = 0; i < n_; ++i) best = std::max(best, khop(static_cast<int>(i), kappa).size());
    return best;
  }

  int eccentricity(int i) const {
    check(i);
    int e = 0;
    for (std::size_t j = 0; j < n_; ++j)
      if (dist_[i * n_ + j] < kUnreachable) e = std::max(e, dist_[i * n_ + j]);
    return e;
  }

  int diameter() const {
    int d = 0;
    for (std::size_t i = 0; i < n_; ++i) d = std::max(d, eccentricity(static_cast<int>(i)));
    return d;
  }

 private:
  std::size_t check(int i) const {
    if (i < 0 || static_cast<std::size_t>(i) >= n_)
      throw std::out_of_range("agent index " + std::to_string(i) + " out of range (n=" + std::to_string(n_) + ")");
    return static_cast<std::size_t>(i);
  }

  void compute_distances() {
    dist_.assign(n_ * n_, kUnreachable);
    for (std::size_t src = 0; src < n_; ++src) {
      int* row = dist_.data() + src * n_;
      std::queue<int> q;
      row[src] = 0;
      q.push(static_cast<int>(src));
      while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : adjacency_[u])
          if (row[v] == kUnreachable) {
            row[v] = row[u] + 1;
            q.push(v);
          }
      }
    }
  }

  std::size_t n_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<int> dist_;
};

}  // namespace netmarl
