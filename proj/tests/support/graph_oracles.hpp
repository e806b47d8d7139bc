// SPDX-License-Identifier: Apache-2.0
// Independent reference implementations used to check the graph module.
#pragma once

#include <gpn/graph.hpp>
#include <gpn/types.hpp>

#include <algorithm>
#include <limits>
#include <random>
#include <vector>

namespace gpn::testing {

struct WeightedEdge {
  int u;
  int v;
  double w;
};

// Random DAG over n nodes: arcs only go from a smaller to a larger id.
inline CategoryGraph random_dag(int n, double arc_prob, Rng& rng) {
  CategoryGraph g(static_cast<std::size_t>(n));
  std::bernoulli_distribution coin(arc_prob);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (coin(rng)) g.add_arc(i, j);
    }
  }
  return g;
}

// All-pairs undirected hop distances by Floyd-Warshall; -1 = unreachable.
inline std::vector<std::vector<int>> floyd_hops(const CategoryGraph& g) {
  const int n = static_cast<int>(g.capacity());
  const int inf = std::numeric_limits<int>::max() / 4;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (int i = 0; i < n; ++i) d[i][i] = 0;
  for (const Arc& a : g.arcs()) {
    d[a.parent][a.child] = 1;
    d[a.child][a.parent] = 1;
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  for (auto& row : d)
    for (int& x : row)
      if (x >= inf) x = -1;
  return d;
}

inline int find_root(std::vector<int>& p, int x) {
  while (p[x] != x) x = p[x];
  return x;
}

inline int component_count(int n, const std::vector<WeightedEdge>& edges) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  int c = n;
  for (const auto& e : edges) {
    const int a = find_root(p, e.u);
    const int b = find_root(p, e.v);
    if (a != b) {
      p[a] = b;
      --c;
    }
  }
  return c;
}

// Maximum total weight over all spanning forests, by enumerating every edge
// subset of size n - components and keeping the acyclic ones.
inline double brute_force_max_forest(int n, const std::vector<WeightedEdge>& edges) {
  const int need = n - component_count(n, edges);
  const int m = static_cast<int>(edges.size());
  if (need == 0) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<bool> pick(static_cast<std::size_t>(m), false);
  std::fill(pick.begin(), pick.begin() + need, true);
  do {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    bool acyclic = true;
    double total = 0.0;
    for (int i = 0; i < m && acyclic; ++i) {
      if (!pick[static_cast<std::size_t>(i)]) continue;
      const int a = find_root(p, edges[i].u);
      const int b = find_root(p, edges[i].v);
      if (a == b) {
        acyclic = false;
      } else {
        p[a] = b;
        total += edges[i].w;
      }
    }
    if (acyclic) best = std::max(best, total);
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

}  // namespace gpn::testing
