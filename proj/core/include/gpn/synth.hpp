// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <gpn/config.hpp>
#include <gpn/graph.hpp>
#include <gpn/memory.hpp>
#include <gpn/types.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace gpn {

struct BenchSpec {
  // Number of levels including the root.
  int depth = 6;
  std::array<int, 2> branching = {2, 3};
  int feature_dim = 20;
  double leaf_cluster_spread = 1.5;  // sigma_leaf
  double class_drift = 3.0;          // sigma_drift of the root's children
  // Drift multiplier per extra level: a node at depth d is offset from its
  // parent by class_drift * drift_decay^(d-1).
  double drift_decay = 0.6;
  int samples_per_class = 100;
  std::array<int, 2> close_dist_range = {1, 4};
  std::array<int, 2> far_dist_range = {5, 10};
  int n_train_classes = 60;
  int n_test_classes = 20;
  std::uint64_t seed = 2;
  // Training-split draws tried before giving up.
  int split_attempts = 200;

  void validate() const;
};

BenchSpec bench_spec_from(KeyValueConfig& kv);
std::string to_text(const BenchSpec& spec);
BenchSpec load_bench_spec(const std::string& path);

enum class Regime { kClose, kFar };
std::string to_string(Regime r);
Regime parse_regime(std::string_view text);

struct ClassSplit {
  std::vector<ClassId> train;  // sorted
  std::vector<ClassId> test;   // sorted
};

struct SyntheticBenchmark {
  BenchSpec spec;
  CategoryGraph graph;
  ClassPools pools;
  ClassSplit close;
  ClassSplit far;

  const ClassSplit& split(Regime r) const { return r == Regime::kClose ? close : far; }
};

/// Tree taxonomy in breadth-first id order: node 0 is the root, and every
/// node above the last level gets a child count drawn from `branching`.
/// Only depth and branching are read from `spec`.
CategoryGraph gen_taxonomy(const BenchSpec& spec, Rng& rng);

/// Latent centers (root at the origin, a child at depth d offset from its
/// parent by N(0, s_d^2 I), s_d = class_drift * drift_decay^(d-1)) and
/// per-class sample pools. Leaves draw from
/// N(center, leaf_cluster_spread^2 I); every other class draws its pool rows
/// from the union of its descendant leaves' rows.
struct FeatureModel {
  std::map<ClassId, Vector> centers;
  ClassPools pools;
};
FeatureModel gen_features(const CategoryGraph& g, const BenchSpec& spec, Rng& rng);

/// Training classes usable by both regimes: one random child subtree of the
/// root (and the root) is held out, the training set is drawn from the rest,
/// and the draw is retried until each regime has enough test candidates.
std::vector<ClassId> pick_training_classes(const CategoryGraph& g, const BenchSpec& spec, Rng& rng);

/// Test classes among non-training nodes whose minimum hop distance to the
/// training set lies in the regime's range.
std::vector<ClassId> pick_test_classes(const CategoryGraph& g, const BenchSpec& spec, Regime regime,
                                       std::span<const ClassId> train, Rng& rng);

/// pick_training_classes followed by pick_test_classes. Throws
/// GenerationError when the attempt budget runs out.
ClassSplit split_classes(const CategoryGraph& g, const BenchSpec& spec, Regime regime, Rng& rng);

/// Whole benchmark from spec.seed; both regimes share one training split.
SyntheticBenchmark generate_benchmark(const BenchSpec& spec);

/// Subgraph induced by the regime's training classes (same ids as the full
/// taxonomy).
CategoryGraph training_graph(const SyntheticBenchmark& bench, Regime regime);

/// Minimum hop distance of every test class to the training set.
std::vector<int> split_distances(const CategoryGraph& g, const ClassSplit& split);

// Directory layout: taxonomy.edges, features.csv, split_close.txt,
// split_far.txt, spec.txt.
void write_benchmark(const std::string& dir, const SyntheticBenchmark& bench);
SyntheticBenchmark read_benchmark(const std::string& dir);

std::string write_features_csv(const ClassPools& pools);
ClassPools read_features_csv(std::string_view text);
std::string write_split(const ClassSplit& split);
ClassSplit read_split(std::string_view text);

}  // namespace gpn
