#pragma once

#include "nolb/interaction.hpp"
#include "nolb/types.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace nolb {

using Edge = std::pair<std::size_t, std::size_t>;

namespace detail {

inline void check_edge(std::size_t n, std::size_t i, std::size_t j) {
  if (i >= n || j >= n) throw std::out_of_range("edge endpoint out of range");
  if (i == j) throw std::invalid_argument("self-loops are not allowed");
}

}  // namespace detail

class UndirectedGraph {
 public:
  explicit UndirectedGraph(std::size_t n) : n_(n), adj_(n * n, 0), nbrs_(n) {}

  /// From a symmetric n x n 0/1 matrix with a zero diagonal.
  static UndirectedGraph from_adjacency(std::size_t n, std::vector<std::uint8_t> adj) {
    if (adj.size() != n * n) throw std::invalid_argument("adjacency matrix has wrong size");
    UndirectedGraph g(0);
    g.n_ = n;
    g.adj_ = std::move(adj);
    g.nbrs_.resize(n);
    std::size_t twice = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint8_t* row = g.adj_.data() + i * n;
      std::size_t deg = 0;
      for (std::size_t j = 0; j < n; ++j) deg += row[j];
      g.nbrs_[i].reserve(deg);
      for (std::size_t j = 0; j < n; ++j)
        if (row[j]) g.nbrs_[i].push_back(j);
      twice += deg;
    }
    g.n_edges_ = twice / 2;
    return g;
  }

  void add_edge(std::size_t i, std::size_t j) {
    detail::check_edge(n_, i, j);
    if (adj_[i * n_ + j]) return;
    adj_[i * n_ + j] = adj_[j * n_ + i] = 1;
    nbrs_[i].push_back(j);
    nbrs_[j].push_back(i);
    ++n_edges_;
  }

  bool has_edge(std::size_t i, std::size_t j) const {
    return i < n_ && j < n_ && adj_[i * n_ + j] != 0;
  }

  std::size_t n_vertices() const noexcept { return n_; }
  std::size_t n_edges() const noexcept { return n_edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return nbrs_[i]; }

  /// Edges as (i, j) with i < j, sorted.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(n_edges_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j)
        if (adj_[i * n_ + j]) out.emplace_back(i, j);
    return out;
  }

 private:
  std::size_t n_;
  std::vector<std::uint8_t> adj_;
  std::vector<std::vector<std::size_t>> nbrs_;
  std::size_t n_edges_ = 0;
};

class DirectedGraph {
 public:
  explicit DirectedGraph(std::size_t n) : n_(n), adj_(n * n, 0), out_(n) {}

  void add_edge(std::size_t i, std::size_t j) {
    detail::check_edge(n_, i, j);
    if (adj_[i * n_ + j]) return;
    adj_[i * n_ + j] = 1;
    out_[i].push_back(j);
    ++n_edges_;
  }

  bool has_edge(std::size_t i, std::size_t j) const {
    return i < n_ && j < n_ && adj_[i * n_ + j] != 0;
  }

  std::size_t n_vertices() const noexcept { return n_; }
  std::size_t n_edges() const noexcept { return n_edges_; }
  const std::vector<std::size_t>& out_neighbors(std::size_t i) const { return out_[i]; }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(n_edges_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j)
        if (adj_[i * n_ + j]) out.emplace_back(i, j);
    return out;
  }

  bool is_subgraph_of(const DirectedGraph& other) const {
    if (other.n_ != n_) return false;
    for (std::size_t k = 0; k < adj_.size(); ++k)
      if (adj_[k] && !other.adj_[k]) return false;
    return true;
  }

 private:
  std::size_t n_;
  std::vector<std::uint8_t> adj_;
  std::vector<std::vector<std::size_t>> out_;
  std::size_t n_edges_ = 0;
};

/// {i, j} is an edge iff |x_i - x_j| <= 1 + eps.
inline UndirectedGraph interaction_graph(const AgentConfiguration& config,
                                         double eps = kDefaultGeometryEps) {
  const std::size_t n = config.n_agents();
  std::vector<std::uint8_t> adj(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (InteractionFunction::in_support(config.squared_distance(i, j), eps))
        adj[i * n + j] = adj[j * n + i] = 1;
  return UndirectedGraph::from_adjacency(n, std::move(adj));
}

/// (i, j) is an edge iff j lies in the critical region of i.
inline DirectedGraph behind_graph(const AgentConfiguration& config,
                                  const Positions& averages, double r_star,
                                  double eps = kDefaultGeometryEps) {
  const std::size_t n = config.n_agents();
  DirectedGraph g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : critical_region_members(i, config, averages, r_star, eps))
      g.add_edge(i, j);
  return g;
}

/// True iff no interaction edge {i, j} has both (i, k) and (j, k) in `relaxed`.
inline bool has_relaxation_property(const UndirectedGraph& interaction,
                                    const DirectedGraph& relaxed) {
  for (const auto& [i, j] : interaction.edges())
    for (std::size_t k : relaxed.out_neighbors(i))
      if (relaxed.has_edge(j, k)) return false;
  return true;
}

/// Greedy relaxed behind graph. Owners i are visited in `order` and, for each
/// owner, targets j in ascending index; (i, j) is kept unless an interaction
/// neighbor k of i already kept (k, j).
inline DirectedGraph relax_behind_graph(const UndirectedGraph& interaction,
                                        const DirectedGraph& behind,
                                        std::span<const std::size_t> order) {
  const std::size_t n = behind.n_vertices();
  if (interaction.n_vertices() != n || order.size() != n) {
    throw std::invalid_argument("relax_behind_graph: size mismatch");
  }
  std::vector<bool> seen(n, false);
  for (std::size_t i : order) {
    if (i >= n || seen[i]) throw std::invalid_argument("order is not a permutation");
    seen[i] = true;
  }
  DirectedGraph relaxed(n);
  std::vector<std::vector<std::size_t>> kept_owners(n);
  for (std::size_t i : order) {
    std::vector<std::size_t> targets = behind.out_neighbors(i);
    std::sort(targets.begin(), targets.end());
    for (std::size_t j : targets) {
      const auto& owners = kept_owners[j];
      const bool covered = std::any_of(owners.begin(), owners.end(), [&](std::size_t k) {
        return interaction.has_edge(i, k);
      });
      if (!covered) {
        relaxed.add_edge(i, j);
        kept_owners[j].push_back(i);
      }
    }
  }
#ifdef NOLB_CHECK_INVARIANTS
  if (!relaxed.is_subgraph_of(behind) || !has_relaxation_property(interaction, relaxed)) {
    throw std::logic_error("relaxed behind graph invariant violated");
  }
#endif
  return relaxed;
}

/// Connected-component labels (breadth-first); returns the component count.
inline std::size_t connected_components(const UndirectedGraph& g,
                                        std::vector<std::size_t>* labels = nullptr) {
  const std::size_t n = g.n_vertices();
  std::vector<std::size_t> label(n, n);
  std::vector<std::size_t> queue;
  queue.reserve(n);
  std::size_t count = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] != n) continue;
    queue.assign(1, s);
    label[s] = count;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      for (std::size_t v : g.neighbors(queue[head])) {
        if (label[v] == n) {
          label[v] = count;
          queue.push_back(v);
        }
      }
    }
    ++count;
  }
  if (labels) *labels = std::move(label);
  return count;
}

inline bool is_connected(const UndirectedGraph& g) {
  if (g.n_vertices() == 0) throw std::invalid_argument("graph has no vertices");
  return connected_components(g) == 1;
}

}  // namespace nolb
