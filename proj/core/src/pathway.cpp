// SPDX-License-Identifier: Apache-2.0
#include <gpn/errors.hpp>
#include <gpn/pathway.hpp>

#include <algorithm>
#include <numeric>

namespace gpn {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<int> rank_;
};

}  // namespace

double cosine_similarity(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw NumericDomainError("cosine_similarity: zero-norm prototype");
  return a.dot(b) / (na * nb);
}

PropagationPathway::PropagationPathway(std::vector<ClassId> members, std::vector<PathwayEdge> edges)
    : members_(std::move(members)), edges_(std::move(edges)) {
  std::sort(members_.begin(), members_.end());
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
  adjacency_.resize(members_.size());
  for (const PathwayEdge& e : edges_) {
    const ClassId parent = e.parent();
    const ClassId child = e.child();
    adjacency_[position(child)].push_back({parent, NeighborRole::kParent});
    adjacency_[position(parent)].push_back({child, NeighborRole::kChild});
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  }
}

bool PropagationPathway::contains(ClassId y) const {
  return std::binary_search(members_.begin(), members_.end(), y);
}

std::size_t PropagationPathway::position(ClassId y) const {
  const auto it = std::lower_bound(members_.begin(), members_.end(), y);
  if (it == members_.end() || *it != y) {
    throw ArgumentError("pathway: class " + std::to_string(y) + " is not a member");
  }
  return static_cast<std::size_t>(it - members_.begin());
}

std::span<const PathwayNeighbor> PropagationPathway::neighbors(ClassId y) const {
  return adjacency_[position(y)];
}

double PropagationPathway::total_weight() const {
  double w = 0.0;
  for (const auto& e : edges_) w += e.weight;
  return w;
}

std::size_t PropagationPathway::component_count() const {
  DisjointSets sets(members_.size());
  std::size_t components = members_.size();
  for (const auto& e : edges_) {
    if (sets.unite(position(e.u), position(e.v))) --components;
  }
  return components;
}

std::vector<PathwayEdge> maximum_spanning_forest(std::span<const ClassId> members,
                                                 std::vector<PathwayEdge> edges) {
  std::vector<ClassId> sorted(members.begin(), members.end());
  std::sort(sorted.begin(), sorted.end());
  auto pos = [&](ClassId y) {
    return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), y) - sorted.begin());
  };
  std::sort(edges.begin(), edges.end(), [](const PathwayEdge& a, const PathwayEdge& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    if (a.u != b.u) return a.u < b.u;
    return a.v < b.v;
  });
  DisjointSets sets(sorted.size());
  std::vector<PathwayEdge> kept;
  for (const PathwayEdge& e : edges) {
    if (sets.unite(pos(e.u), pos(e.v))) kept.push_back(e);
  }
  return kept;
}

PropagationPathway build_pathway(const CategoryGraph& g, std::span<const ClassId> task_classes,
                                 int t_steps, const PrototypeMemory& memory,
                                 const PrototypeMap& task_p0, const PathwayOptions& options) {
  if (t_steps < 0) throw ArgumentError("build_pathway: t_steps must be >= 0");
  std::vector<bool> candidate(g.capacity(), false);
  std::vector<bool> is_task(g.capacity(), false);
  for (ClassId y : task_classes) {
    if (!g.contains(y)) throw ArgumentError("build_pathway: task class " + std::to_string(y) + " not in graph");
    candidate[y] = true;
    is_task[y] = true;
  }
  if (t_steps > 0) {
    for (ClassId y : task_classes) {
      const auto dist = g.hop_distances_from(y, t_steps);
      for (std::size_t v = 0; v < dist.size(); ++v) {
        if (dist[v] > 0 && memory.contains(static_cast<ClassId>(v))) candidate[v] = true;
      }
    }
  }

  auto prototype_of = [&](ClassId y) -> const Vector& {
    if (const Vector* p = memory.fetch(y)) return *p;
    if (const auto it = task_p0.find(y); it != task_p0.end()) return it->second;
    throw ArgumentError("build_pathway: no prototype for class " + std::to_string(y));
  };

  std::vector<ClassId> members;
  for (std::size_t v = 0; v < candidate.size(); ++v) {
    if (candidate[v]) members.push_back(static_cast<ClassId>(v));
  }
  std::vector<PathwayEdge> edges;
  if (t_steps > 0) {
    for (const Arc& a : g.arcs()) {
      if (!candidate[a.parent] || !candidate[a.child]) continue;
      const double w = cosine_similarity(prototype_of(a.parent), prototype_of(a.child));
      const bool parent_first = a.parent < a.child;
      edges.push_back({std::min(a.parent, a.child), std::max(a.parent, a.child), w, parent_first});
    }
  }
  if (options.spanning_forest) edges = maximum_spanning_forest(members, std::move(edges));
  return PropagationPathway(std::move(members), std::move(edges));
}

CategoryGraph attach_test_classes(const CategoryGraph& g, const PrototypeMap& test_protos,
                                  const PrototypeMap& train_protos, int k_c) {
  if (train_protos.empty()) throw StateError("attach_test_classes: no training prototypes");
  if (k_c < 1) throw ArgumentError("attach_test_classes: k_c must be >= 1");
  if (static_cast<std::size_t>(k_c) > train_protos.size()) {
    throw ArgumentError("attach_test_classes: k_c exceeds the number of training prototypes");
  }
  for (const auto& [id, p] : train_protos) {
    if (!g.contains(id)) throw ArgumentError("attach_test_classes: training class " + std::to_string(id) + " not in graph");
  }
  CategoryGraph out = g;
  for (const auto& [test_id, proto] : test_protos) {
    if (g.contains(test_id)) {
      throw ArgumentError("attach_test_classes: test class " + std::to_string(test_id) + " already in graph");
    }
    std::vector<std::pair<double, ClassId>> scored;
    scored.reserve(train_protos.size());
    for (const auto& [train_id, tp] : train_protos) scored.emplace_back(cosine_similarity(proto, tp), train_id);
    std::partial_sort(scored.begin(), scored.begin() + k_c, scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    out.insert_node(test_id);
    for (int k = 0; k < k_c; ++k) out.add_arc(test_id, scored[static_cast<std::size_t>(k)].second);
  }
  return out;
}

}  // namespace gpn
