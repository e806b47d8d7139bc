// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <gpn/graph.hpp>
#include <gpn/memory.hpp>
#include <gpn/types.hpp>

#include <span>
#include <vector>

namespace gpn {

struct PathwayEdge {
  // Endpoints with u < v.
  ClassId u;
  ClassId v;
  double weight;
  // True when the source arc was u -> v (u is the parent), false for v -> u.
  bool u_is_parent;

  ClassId parent() const { return u_is_parent ? u : v; }
  ClassId child() const { return u_is_parent ? v : u; }
};

enum class NeighborRole { kParent, kChild };

struct PathwayNeighbor {
  ClassId id;
  NeighborRole role;  // role of `id` relative to the receiving class
};

/// Subgraph over which prototypes are propagated for one task.
class PropagationPathway {
 public:
  PropagationPathway() = default;
  PropagationPathway(std::vector<ClassId> members, std::vector<PathwayEdge> edges);

  /// Sorted ascending.
  const std::vector<ClassId>& members() const { return members_; }
  const std::vector<PathwayEdge>& edges() const { return edges_; }
  bool contains(ClassId y) const;
  /// Position of `y` in members(); throws if absent.
  std::size_t position(ClassId y) const;
  /// Neighbors of `y` on the pathway sorted by id.
  std::span<const PathwayNeighbor> neighbors(ClassId y) const;
  double total_weight() const;
  std::size_t component_count() const;

 private:
  std::vector<ClassId> members_;
  std::vector<PathwayEdge> edges_;
  std::vector<std::vector<PathwayNeighbor>> adjacency_;
};

struct PathwayOptions {
  // false keeps every candidate arc instead of the maximum spanning forest.
  bool spanning_forest = true;
};

/// Candidate subgraph = task classes plus classes within `t_steps` undirected
/// hops that have a memory prototype; arcs among candidates are weighted by
/// cosine similarity of the endpoint prototypes (task classes fall back to
/// `task_p0` when memory has none). Returns the maximum spanning forest,
/// ties broken by the smaller (min id, max id) pair.
PropagationPathway build_pathway(const CategoryGraph& g, std::span<const ClassId> task_classes,
                                 int t_steps, const PrototypeMemory& memory,
                                 const PrototypeMap& task_p0, const PathwayOptions& options = {});

/// Kruskal maximum spanning forest over weighted undirected edges.
std::vector<PathwayEdge> maximum_spanning_forest(std::span<const ClassId> members,
                                                 std::vector<PathwayEdge> edges);

/// Copy of `g` with every test class added and linked by arcs test -> train
/// to its `k_c` most cosine-similar training prototypes. Ties prefer the
/// smaller training id.
CategoryGraph attach_test_classes(const CategoryGraph& g, const PrototypeMap& test_protos,
                                  const PrototypeMap& train_protos, int k_c);

double cosine_similarity(const Vector& a, const Vector& b);

}  // namespace gpn
