// SPDX-License-Identifier: Apache-2.0
#include <gpn/errors.hpp>
#include <gpn/graph.hpp>

#include <algorithm>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>

namespace gpn {

CategoryGraph::CategoryGraph(std::size_t num_nodes)
    : present_(num_nodes, true),
      node_count_(num_nodes),
      parents_(num_nodes),
      children_(num_nodes),
      neighbors_(num_nodes) {}

ClassId CategoryGraph::add_node() {
  const auto id = static_cast<ClassId>(present_.size());
  insert_node(id);
  return id;
}

void CategoryGraph::insert_node(ClassId id) {
  if (id < 0) throw ArgumentError("negative class id " + std::to_string(id));
  const auto idx = static_cast<std::size_t>(id);
  if (idx >= present_.size()) {
    present_.resize(idx + 1, false);
    parents_.resize(idx + 1);
    children_.resize(idx + 1);
    neighbors_.resize(idx + 1);
  }
  if (!present_[idx]) {
    present_[idx] = true;
    ++node_count_;
  }
}

bool CategoryGraph::contains(ClassId id) const {
  return id >= 0 && static_cast<std::size_t>(id) < present_.size() && present_[id];
}

void CategoryGraph::check_present(ClassId id, const char* what) const {
  if (!contains(id)) {
    throw ArgumentError(std::string(what) + ": unknown class id " + std::to_string(id));
  }
}

std::vector<ClassId> CategoryGraph::nodes() const {
  std::vector<ClassId> out;
  out.reserve(node_count_);
  for (std::size_t i = 0; i < present_.size(); ++i) {
    if (present_[i]) out.push_back(static_cast<ClassId>(i));
  }
  return out;
}

std::span<const ClassId> CategoryGraph::parents(ClassId id) const {
  check_present(id, "parents");
  return parents_[id];
}

std::span<const ClassId> CategoryGraph::children(ClassId id) const {
  check_present(id, "children");
  return children_[id];
}

std::span<const ClassId> CategoryGraph::neighbors(ClassId id) const {
  check_present(id, "neighbors");
  return neighbors_[id];
}

bool CategoryGraph::has_arc(ClassId parent, ClassId child) const {
  if (!contains(parent) || !contains(child)) return false;
  const auto& c = children_[parent];
  return std::find(c.begin(), c.end(), child) != c.end();
}

bool CategoryGraph::reaches(ClassId from, ClassId to) const {
  std::vector<bool> seen(present_.size(), false);
  std::vector<ClassId> stack{from};
  seen[from] = true;
  while (!stack.empty()) {
    const ClassId u = stack.back();
    stack.pop_back();
    if (u == to) return true;
    for (ClassId v : children_[u]) {
      if (!seen[v]) {
        seen[v] = true;
        stack.push_back(v);
      }
    }
  }
  return false;
}

void CategoryGraph::add_arc(ClassId parent, ClassId child) {
  check_present(parent, "add_arc");
  check_present(child, "add_arc");
  if (parent == child) {
    throw ArgumentError("add_arc: self loop on " + std::to_string(parent));
  }
  if (has_arc(parent, child)) return;
  if (reaches(child, parent)) {
    throw ArgumentError("add_arc: " + std::to_string(parent) + "->" + std::to_string(child) +
                        " would create a directed cycle");
  }
  parents_[child].push_back(parent);
  children_[parent].push_back(child);
  auto& np = neighbors_[parent];
  if (std::find(np.begin(), np.end(), child) == np.end()) np.push_back(child);
  auto& nc = neighbors_[child];
  if (std::find(nc.begin(), nc.end(), parent) == nc.end()) nc.push_back(parent);
  arcs_.push_back({parent, child});
}

std::vector<ClassId> CategoryGraph::topological_order() const {
  std::vector<int> indegree(present_.size(), 0);
  for (const Arc& a : arcs_) ++indegree[a.child];
  std::priority_queue<ClassId, std::vector<ClassId>, std::greater<>> ready;
  for (ClassId id : nodes()) {
    if (indegree[id] == 0) ready.push(id);
  }
  std::vector<ClassId> order;
  order.reserve(node_count_);
  while (!ready.empty()) {
    const ClassId u = ready.top();
    ready.pop();
    order.push_back(u);
    for (ClassId v : children_[u]) {
      if (--indegree[v] == 0) ready.push(v);
    }
  }
  if (order.size() != node_count_) throw StateError("topological_order: graph has a cycle");
  return order;
}

std::vector<int> CategoryGraph::hop_distances_from(ClassId source, int max_hops) const {
  check_present(source, "hop_distances_from");
  std::vector<int> dist(present_.size(), -1);
  std::deque<ClassId> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const ClassId u = queue.front();
    queue.pop_front();
    if (max_hops >= 0 && dist[u] >= max_hops) continue;
    for (ClassId v : neighbors_[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

CategoryGraph CategoryGraph::without(std::span<const ClassId> removed) const {
  std::vector<bool> drop(present_.size(), false);
  for (ClassId id : removed) {
    if (contains(id)) drop[id] = true;
  }
  CategoryGraph out;
  for (std::size_t i = 0; i < present_.size(); ++i) {
    if (present_[i] && !drop[i]) out.insert_node(static_cast<ClassId>(i));
  }
  // Keep the id range even when trailing ids were dropped.
  if (out.present_.size() < present_.size()) {
    const std::size_t n = present_.size();
    out.present_.resize(n, false);
    out.parents_.resize(n);
    out.children_.resize(n);
    out.neighbors_.resize(n);
  }
  for (const Arc& a : arcs_) {
    if (!drop[a.parent] && !drop[a.child]) out.add_arc(a.parent, a.child);
  }
  return out;
}

std::optional<int> hop_distance(const CategoryGraph& g, ClassId a, ClassId b) {
  if (!g.contains(a) || !g.contains(b)) {
    throw ArgumentError("hop_distance: unknown class id " + std::to_string(g.contains(a) ? b : a));
  }
  if (a == b) return 0;
  const auto dist = g.hop_distances_from(a);
  if (dist[b] < 0) return std::nullopt;
  return dist[b];
}

std::vector<int> min_hop_distances(const CategoryGraph& g, std::span<const ClassId> sources) {
  std::vector<int> dist(g.capacity(), -1);
  std::deque<ClassId> queue;
  for (ClassId s : sources) {
    if (!g.contains(s)) throw ArgumentError("min_hop_distances: unknown class id " + std::to_string(s));
    if (dist[s] != 0) {
      dist[s] = 0;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const ClassId u = queue.front();
    queue.pop_front();
    for (ClassId v : g.neighbors(u)) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

namespace {

ClassId parse_id(const std::string& token, int line_no) {
  std::size_t used = 0;
  long long value = -1;
  try {
    value = std::stoll(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != token.size() || value < 0 || value > 0x7fffffff) {
    throw ConfigError("graph line " + std::to_string(line_no) + ": bad class id '" + token + "'");
  }
  return static_cast<ClassId>(value);
}

}  // namespace

CategoryGraph read_graph(std::istream& in) {
  CategoryGraph g;
  std::vector<Arc> arcs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string t; fields >> t;) tokens.push_back(t);
    if (tokens.empty()) continue;
    if (tokens.size() != 2) {
      throw ConfigError("graph line " + std::to_string(line_no) + ": expected two fields");
    }
    if (tokens[0] == "node") {
      g.insert_node(parse_id(tokens[1], line_no));
      continue;
    }
    const Arc arc{parse_id(tokens[0], line_no), parse_id(tokens[1], line_no)};
    g.insert_node(arc.parent);
    g.insert_node(arc.child);
    arcs.push_back(arc);
  }
  for (const Arc& a : arcs) {
    try {
      g.add_arc(a.parent, a.child);
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("graph: ") + e.what());
    }
  }
  return g;
}

CategoryGraph read_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open graph file " + path);
  return read_graph(in);
}

void write_graph(std::ostream& out, const CategoryGraph& g) {
  out << "# parent child\n";
  for (ClassId id : g.nodes()) {
    if (g.neighbors(id).empty()) out << "node " << id << '\n';
  }
  for (const Arc& a : g.arcs()) out << a.parent << ' ' << a.child << '\n';
}

}  // namespace gpn
