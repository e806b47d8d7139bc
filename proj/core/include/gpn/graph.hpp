// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <gpn/types.hpp>

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gpn {

struct Arc {
  ClassId parent;
  ClassId child;

  friend bool operator==(const Arc&, const Arc&) = default;
};

/// Directed acyclic class taxonomy.
///
/// Node ids live in a dense range [0, capacity()); an id inside that range may
/// be absent, which lets a subgraph (e.g. training classes only) keep the same
/// ids as the full taxonomy. Arcs point from a parent class to a child class,
/// and add_arc refuses any arc that would close a directed cycle.
class CategoryGraph {
 public:
  CategoryGraph() = default;
  explicit CategoryGraph(std::size_t num_nodes);

  /// Appends a fresh node and returns its id.
  ClassId add_node();
  /// Marks `id` present, growing the id range if needed.
  void insert_node(ClassId id);
  void add_arc(ClassId parent, ClassId child);

  std::size_t capacity() const { return present_.size(); }
  std::size_t node_count() const { return node_count_; }
  bool contains(ClassId id) const;
  std::vector<ClassId> nodes() const;

  std::span<const ClassId> parents(ClassId id) const;
  std::span<const ClassId> children(ClassId id) const;
  /// parents(id) ∪ children(id).
  std::span<const ClassId> neighbors(ClassId id) const;
  const std::vector<Arc>& arcs() const { return arcs_; }
  bool has_arc(ClassId parent, ClassId child) const;

  /// Kahn ordering over present nodes; ties resolved by smallest id.
  std::vector<ClassId> topological_order() const;

  /// Undirected BFS distances from `source` to every id; -1 marks unreachable
  /// or absent ids. Search stops expanding past `max_hops` when it is >= 0.
  std::vector<int> hop_distances_from(ClassId source, int max_hops = -1) const;

  /// Copy with `removed` ids (and their arcs) dropped; remaining ids unchanged.
  CategoryGraph without(std::span<const ClassId> removed) const;

 private:
  void check_present(ClassId id, const char* what) const;
  bool reaches(ClassId from, ClassId to) const;

  std::vector<bool> present_;
  std::size_t node_count_ = 0;
  std::vector<std::vector<ClassId>> parents_;
  std::vector<std::vector<ClassId>> children_;
  std::vector<std::vector<ClassId>> neighbors_;
  std::vector<Arc> arcs_;
};

/// Shortest undirected path length between two present classes; nullopt when
/// they are in different components.
std::optional<int> hop_distance(const CategoryGraph& g, ClassId a, ClassId b);

/// Multi-source variant: for every id, the hop distance to the nearest source.
std::vector<int> min_hop_distances(const CategoryGraph& g, std::span<const ClassId> sources);

// Line format: `<parent> <child>` per arc, `node <id>` for extra nodes,
// '#' starts a comment, blank lines ignored.
CategoryGraph read_graph(std::istream& in);
CategoryGraph read_graph_file(const std::string& path);
void write_graph(std::ostream& out, const CategoryGraph& g);

}  // namespace gpn
