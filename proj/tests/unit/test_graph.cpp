// SPDX-License-Identifier: Apache-2.0
#include <gpn/errors.hpp>
#include <gpn/graph.hpp>
#include <gpn/pathway.hpp>
#include <gpn/sampling.hpp>

#include <gtest/gtest.h>

#include "graph_oracles.hpp"

#include <map>
#include <set>
#include <sstream>

using namespace gpn;
using gpn::testing::WeightedEdge;

namespace {

CategoryGraph chain(int n) {
  CategoryGraph g(static_cast<std::size_t>(n));
  for (int i = 0; i + 1 < n; ++i) g.add_arc(i, i + 1);
  return g;
}

Vector unit(int dim, int axis) {
  Vector v = Vector::Zero(dim);
  v[axis] = 1.0;
  return v;
}

}  // namespace

TEST(Graph, AdjacencyAndNeighbors) {
  CategoryGraph g(4);
  g.add_arc(0, 1);
  g.add_arc(0, 2);
  g.add_arc(1, 3);
  g.add_arc(2, 3);
  EXPECT_EQ(g.node_count(), 4u);
  EXPECT_EQ(std::vector<ClassId>(g.parents(3).begin(), g.parents(3).end()), (std::vector<ClassId>{1, 2}));
  EXPECT_EQ(std::vector<ClassId>(g.children(0).begin(), g.children(0).end()), (std::vector<ClassId>{1, 2}));
  const auto nb = g.neighbors(1);
  EXPECT_EQ(std::set<ClassId>(nb.begin(), nb.end()), (std::set<ClassId>{0, 3}));
  EXPECT_TRUE(g.has_arc(0, 1));
  EXPECT_FALSE(g.has_arc(1, 0));
}

TEST(Graph, RejectsCyclesAndSelfLoops) {
  CategoryGraph g = chain(3);
  EXPECT_THROW(g.add_arc(2, 0), ArgumentError);
  EXPECT_THROW(g.add_arc(1, 1), ArgumentError);
  EXPECT_THROW(g.add_arc(0, 7), ArgumentError);
  EXPECT_EQ(g.arcs().size(), 2u);
}

TEST(Graph, TopologicalOrderRespectsArcs) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const CategoryGraph g = gpn::testing::random_dag(10, 0.3, rng);
    const auto order = g.topological_order();
    ASSERT_EQ(order.size(), 10u);
    std::map<ClassId, std::size_t> pos;
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
    for (const Arc& a : g.arcs()) EXPECT_LT(pos[a.parent], pos[a.child]);
  }
}

TEST(Graph, HopDistanceExamples) {
  const CategoryGraph g = chain(3);
  EXPECT_EQ(hop_distance(g, 1, 1), 0);
  EXPECT_EQ(hop_distance(g, 0, 2), 2);
  EXPECT_EQ(hop_distance(g, 2, 0), 2);
  CategoryGraph split(3);
  split.add_arc(0, 1);
  EXPECT_FALSE(hop_distance(split, 0, 2).has_value());
  EXPECT_THROW(hop_distance(g, 0, 9), ArgumentError);
}

TEST(Graph, HopDistanceMatchesFloydOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const CategoryGraph g = gpn::testing::random_dag(10, 0.2, rng);
    const auto oracle = gpn::testing::floyd_hops(g);
    for (ClassId a = 0; a < 10; ++a) {
      for (ClassId b = 0; b < 10; ++b) {
        const auto d = hop_distance(g, a, b);
        EXPECT_EQ(d.value_or(-1), oracle[a][b]) << a << "," << b;
      }
    }
  }
}

TEST(Graph, MultiSourceDistancesAreMinimumOverSources) {
  Rng rng(6);
  const CategoryGraph g = gpn::testing::random_dag(12, 0.2, rng);
  const auto oracle = gpn::testing::floyd_hops(g);
  const std::vector<ClassId> sources{2, 7};
  const auto d = min_hop_distances(g, sources);
  for (int v = 0; v < 12; ++v) {
    int best = -1;
    for (ClassId s : sources) {
      const int x = oracle[s][v];
      if (x >= 0 && (best < 0 || x < best)) best = x;
    }
    EXPECT_EQ(d[v], best);
  }
}

TEST(Graph, HopLimitedSearch) {
  const CategoryGraph g = chain(6);
  const auto d = g.hop_distances_from(0, 2);
  EXPECT_EQ(d[2], 2);
  EXPECT_EQ(d[3], -1);
}

TEST(Graph, WithoutKeepsIds) {
  CategoryGraph g = chain(4);
  const std::vector<ClassId> drop{1};
  const CategoryGraph h = g.without(drop);
  EXPECT_FALSE(h.contains(1));
  EXPECT_TRUE(h.contains(3));
  EXPECT_EQ(h.node_count(), 3u);
  EXPECT_TRUE(h.has_arc(2, 3));
  EXPECT_TRUE(h.neighbors(0).empty());
}

TEST(Graph, TextRoundTrip) {
  CategoryGraph g(6);
  g.add_arc(0, 1);
  g.add_arc(0, 2);
  g.add_arc(2, 4);
  std::ostringstream out;
  write_graph(out, g);
  std::istringstream in(out.str());
  const CategoryGraph back = read_graph(in);
  EXPECT_EQ(back.node_count(), 6u);
  EXPECT_EQ(back.arcs(), g.arcs());
  EXPECT_TRUE(back.contains(5));
}

TEST(Graph, ParsesCommentsAndIsolatedNodes) {
  std::istringstream in("# taxonomy\n0 1\n\nnode 4  # lonely\n1 2\n");
  const CategoryGraph g = read_graph(in);
  EXPECT_EQ(g.node_count(), 4u);
  EXPECT_TRUE(g.contains(4));
  EXPECT_TRUE(g.has_arc(1, 2));
}

TEST(Graph, ParseErrors) {
  std::istringstream bad_id("0 x\n");
  EXPECT_THROW(read_graph(bad_id), ConfigError);
  std::istringstream one_field("3\n");
  EXPECT_THROW(read_graph(one_field), ConfigError);
  std::istringstream cycle("0 1\n1 0\n");
  EXPECT_THROW(read_graph(cycle), ConfigError);
}

TEST(Sampling, RandomExhaustsAndValidates) {
  Rng rng(1);
  const std::vector<ClassId> eligible{3, 5, 8};
  auto all = sample_random(eligible, 3, rng);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, eligible);
  EXPECT_THROW(sample_random(eligible, 4, rng), ArgumentError);
}

TEST(Sampling, RandomIsUniform) {
  Rng rng(2);
  const std::vector<ClassId> eligible{0, 1, 2, 3};
  std::map<ClassId, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[sample_random(eligible, 1, rng).front()];
  for (ClassId y : eligible) EXPECT_NEAR(counts[y] / static_cast<double>(draws), 0.25, 0.02);
}

TEST(Sampling, RandomIsSeedDeterministic) {
  const std::vector<ClassId> eligible{0, 1, 2, 3, 4, 5, 6, 7};
  Rng a(9), b(9);
  EXPECT_EQ(sample_random(eligible, 5, a), sample_random(eligible, 5, b));
}

TEST(Sampling, SnowballSingleton) {
  const CategoryGraph g = chain(4);
  const std::vector<ClassId> eligible{0, 1, 2, 3};
  Rng rng(3);
  const auto s = sample_snowball(g, eligible, 1, 1, rng);
  ASSERT_EQ(s.classes.size(), 1u);
  EXPECT_FALSE(s.any_fallback());
}

TEST(Sampling, SnowballOnChainIsContiguous) {
  const CategoryGraph g = chain(6);
  const std::vector<ClassId> eligible{0, 1, 2, 3, 4, 5};
  Rng rng(4);
  std::set<std::vector<ClassId>> seen;
  for (int i = 0; i < 2000; ++i) {
    auto s = sample_snowball(g, eligible, 3, 1, rng);
    ASSERT_FALSE(s.any_fallback());
    std::sort(s.classes.begin(), s.classes.end());
    EXPECT_EQ(s.classes[1], s.classes[0] + 1);
    EXPECT_EQ(s.classes[2], s.classes[1] + 1);
    seen.insert(s.classes);
  }
  // Every window of three consecutive nodes is reachable.
  EXPECT_EQ(seen.size(), 4u);
}

TEST(Sampling, SnowballAuditOnRandomGraphs) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const CategoryGraph g = gpn::testing::random_dag(15, 0.15, rng);
    const auto hops = gpn::testing::floyd_hops(g);
    std::vector<ClassId> eligible(15);
    for (int i = 0; i < 15; ++i) eligible[i] = i;
    const auto s = sample_snowball(g, eligible, 5, 2, rng);
    ASSERT_EQ(std::set<ClassId>(s.classes.begin(), s.classes.end()).size(), 5u);
    for (std::size_t i = 1; i < s.classes.size(); ++i) {
      if (s.fallback[i]) continue;
      int best = -1;
      for (std::size_t j = 0; j < i; ++j) {
        const int d = hops[s.classes[j]][s.classes[i]];
        if (d >= 0 && (best < 0 || d < best)) best = d;
      }
      EXPECT_GE(best, 1);
      EXPECT_LE(best, 2);
    }
  }
}

TEST(Sampling, SnowballFallsBackOnEmptyFrontier) {
  CategoryGraph g(4);  // no arcs
  const std::vector<ClassId> eligible{0, 1, 2, 3};
  Rng rng(5);
  const auto s = sample_snowball(g, eligible, 3, 2, rng);
  EXPECT_EQ(s.classes.size(), 3u);
  EXPECT_FALSE(s.fallback[0]);
  EXPECT_TRUE(s.fallback[1]);
  EXPECT_TRUE(s.fallback[2]);
}

TEST(Sampling, SnowballValidates) {
  const CategoryGraph g = chain(3);
  const std::vector<ClassId> eligible{0, 1, 2};
  Rng rng(6);
  EXPECT_THROW(sample_snowball(g, eligible, 4, 1, rng), ArgumentError);
  EXPECT_THROW(sample_snowball(g, eligible, 0, 1, rng), ArgumentError);
  EXPECT_THROW(sample_snowball(g, eligible, 2, 0, rng), ArgumentError);
}

TEST(Pathway, SingleIsolatedClass) {
  CategoryGraph g(1);
  PrototypeMemory memory;
  const std::vector<ClassId> task{0};
  const PrototypeMap p0{{0, unit(3, 0)}};
  const auto pw = build_pathway(g, task, 2, memory, p0);
  EXPECT_EQ(pw.members(), (std::vector<ClassId>{0}));
  EXPECT_TRUE(pw.edges().empty());
}

TEST(Pathway, TriangleKeepsTwoHeaviestEdges) {
  // 0->1, 0->2, 1->2 with cosines 0.9 (0,1), 0.5 (0,2), 0.2 (1,2).
  CategoryGraph g(3);
  g.add_arc(0, 1);
  g.add_arc(0, 2);
  g.add_arc(1, 2);
  PrototypeMemory memory;
  Vector a = unit(3, 0);
  Vector b(3), c(3);
  b << 0.9, std::sqrt(1 - 0.81), 0.0;
  c(0) = 0.5;
  c(1) = (0.2 - 0.9 * 0.5) / b(1);
  c(2) = std::sqrt(1 - c(0) * c(0) - c(1) * c(1));
  memory.put(0, a, 0);
  memory.put(1, b, 0);
  memory.put(2, c, 0);
  const std::vector<ClassId> task{0, 1, 2};
  const auto pw = build_pathway(g, task, 1, memory, {});
  ASSERT_EQ(pw.edges().size(), 2u);
  std::multiset<long> kept;
  for (const auto& e : pw.edges()) kept.insert(std::lround(e.weight * 10));
  EXPECT_EQ(kept, (std::multiset<long>{9, 5}));
}

TEST(Pathway, MatchesBruteForceForest) {
  Rng rng(12);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 6));
    const CategoryGraph g = gpn::testing::random_dag(n, 0.5, rng);
    PrototypeMemory memory;
    std::vector<Vector> protos;
    for (int i = 0; i < n; ++i) {
      Vector v(4);
      for (int k = 0; k < 4; ++k) v[k] = normal(rng);
      memory.put(i, v, 0);
      protos.push_back(v);
    }
    std::vector<WeightedEdge> edges;
    for (const Arc& a : g.arcs()) {
      const double w = protos[a.parent].dot(protos[a.child]) / (protos[a.parent].norm() * protos[a.child].norm());
      edges.push_back({a.parent, a.child, w});
    }
    std::vector<ClassId> task(n);
    for (int i = 0; i < n; ++i) task[i] = i;
    const auto pw = build_pathway(g, task, 1, memory, {});
    EXPECT_NEAR(pw.total_weight(), gpn::testing::brute_force_max_forest(n, edges), 1e-12);
    EXPECT_EQ(static_cast<int>(pw.component_count()), gpn::testing::component_count(n, edges));
    EXPECT_EQ(static_cast<int>(pw.edges().size()), n - gpn::testing::component_count(n, edges));
  }
}

TEST(Pathway, CandidatesNeedMemoryWithinRadius) {
  // 0 - 1 - 2 - 3; task {0}; memory for 1 and 3 only.
  const CategoryGraph g = chain(4);
  PrototypeMemory memory;
  memory.put(1, unit(2, 0), 0);
  memory.put(3, unit(2, 1), 0);
  const std::vector<ClassId> task{0};
  const PrototypeMap p0{{0, unit(2, 0)}};
  EXPECT_EQ(build_pathway(g, task, 2, memory, p0).members(), (std::vector<ClassId>{0, 1}));
  EXPECT_EQ(build_pathway(g, task, 3, memory, p0).members(), (std::vector<ClassId>{0, 1, 3}));
  EXPECT_EQ(build_pathway(g, task, 0, memory, p0).members(), (std::vector<ClassId>{0}));
}

TEST(Pathway, KeepsArcDirection) {
  CategoryGraph g(2);
  g.add_arc(1, 0);
  PrototypeMemory memory;
  memory.put(0, unit(2, 0), 0);
  memory.put(1, unit(2, 0), 0);
  const std::vector<ClassId> task{0};
  const auto pw = build_pathway(g, task, 1, memory, {});
  ASSERT_EQ(pw.edges().size(), 1u);
  EXPECT_EQ(pw.edges()[0].parent(), 1);
  EXPECT_EQ(pw.edges()[0].child(), 0);
  EXPECT_EQ(pw.neighbors(0)[0].role, NeighborRole::kParent);
  EXPECT_EQ(pw.neighbors(1)[0].role, NeighborRole::kChild);
}

TEST(Pathway, EqualWeightsBreakTiesBySmallerPair) {
  CategoryGraph g(3);
  g.add_arc(0, 1);
  g.add_arc(0, 2);
  g.add_arc(1, 2);
  PrototypeMemory memory;
  for (ClassId y = 0; y < 3; ++y) memory.put(y, unit(2, 0), 0);
  const std::vector<ClassId> task{0, 1, 2};
  const auto pw = build_pathway(g, task, 1, memory, {});
  ASSERT_EQ(pw.edges().size(), 2u);
  EXPECT_EQ(pw.edges()[0].u, 0);
  EXPECT_EQ(pw.edges()[0].v, 1);
  EXPECT_EQ(pw.edges()[1].u, 0);
  EXPECT_EQ(pw.edges()[1].v, 2);
}

TEST(Attach, SingleTrainingClass) {
  CategoryGraph g(1);
  const PrototypeMap train{{0, unit(2, 0)}};
  const PrototypeMap test{{5, unit(2, 1)}};
  const CategoryGraph h = attach_test_classes(g, test, train, 1);
  EXPECT_TRUE(h.has_arc(5, 0));
  EXPECT_FALSE(g.contains(5));
}

TEST(Attach, EqualPrototypeWins) {
  Rng rng(3);
  std::normal_distribution<double> normal;
  CategoryGraph g(10);
  PrototypeMap train;
  for (ClassId y = 0; y < 10; ++y) {
    Vector v(5);
    for (int k = 0; k < 5; ++k) v[k] = normal(rng);
    train[y] = v;
  }
  const PrototypeMap test{{20, train.at(6)}};
  const CategoryGraph h = attach_test_classes(g, test, train, 1);
  EXPECT_TRUE(h.has_arc(20, 6));
  EXPECT_EQ(h.children(20).size(), 1u);
}

TEST(Attach, MatchesFullSortOracle) {
  Rng rng(4);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    CategoryGraph g(10);
    g.add_arc(0, 1);
    g.add_arc(1, 2);
    PrototypeMap train;
    for (ClassId y = 0; y < 10; ++y) {
      Vector v(4);
      for (int k = 0; k < 4; ++k) v[k] = normal(rng);
      train[y] = v;
    }
    Vector q(4);
    for (int k = 0; k < 4; ++k) q[k] = normal(rng);
    std::vector<std::pair<double, ClassId>> all;
    for (const auto& [y, v] : train) all.emplace_back(-q.dot(v) / (q.norm() * v.norm()), y);
    std::sort(all.begin(), all.end());
    const CategoryGraph h = attach_test_classes(g, {{42, q}}, train, 2);
    const auto kids = h.children(42);
    EXPECT_EQ(std::set<ClassId>(kids.begin(), kids.end()), (std::set<ClassId>{all[0].second, all[1].second}));
    EXPECT_EQ(h.arcs().size(), g.arcs().size() + 2);
    for (const Arc& a : g.arcs()) EXPECT_TRUE(h.has_arc(a.parent, a.child));
  }
}

TEST(Attach, Errors) {
  CategoryGraph g(2);
  const PrototypeMap train{{0, unit(2, 0)}, {1, unit(2, 1)}};
  EXPECT_THROW(attach_test_classes(g, {{5, unit(2, 0)}}, {}, 1), StateError);
  EXPECT_THROW(attach_test_classes(g, {{5, unit(2, 0)}}, train, 0), ArgumentError);
  EXPECT_THROW(attach_test_classes(g, {{5, unit(2, 0)}}, train, 3), ArgumentError);
  EXPECT_THROW(attach_test_classes(g, {{1, unit(2, 0)}}, train, 1), ArgumentError);
}
