// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <gpn/autodiff.hpp>
#include <gpn/encoder.hpp>
#include <gpn/graph.hpp>
#include <gpn/memory.hpp>
#include <gpn/pathway.hpp>
#include <gpn/propagation.hpp>

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gpn {

// SR-S: per-episode coin between snowball and random; S-S: snowball only;
// R-S: random only.
enum class SamplingMix { kHybrid, kSnowball, kRandom };
std::string to_string(SamplingMix m);
SamplingMix parse_sampling_mix(std::string_view text);

struct TaskShape {
  int n_way = 5;
  int k_shot = 1;
  int query_per_class = 15;

  void validate() const;
};

struct TaskSamplerOptions {
  TaskShape shape;
  SamplingMix mix = SamplingMix::kHybrid;
  // Probability of the snowball sampler under kHybrid.
  double snowball_share = 0.5;
  int hop_radius = 5;  // k_n
};

/// One N-way K-shot problem. Rows of `support` and `query` are grouped by
/// class in `classes` order; labels index into `classes`.
struct FewShotTask {
  std::vector<ClassId> classes;
  Matrix support;
  std::vector<int> support_labels;
  Matrix query;
  std::vector<int> query_labels;
  // (class, pool row) each support/query row came from.
  std::vector<std::pair<ClassId, Eigen::Index>> support_rows;
  std::vector<std::pair<ClassId, Eigen::Index>> query_rows;
};

/// Candidates whose pools hold at least k_shot + query_per_class rows, sorted.
std::vector<ClassId> eligible_classes(const ClassPools& pools, std::span<const ClassId> candidates,
                                      const TaskShape& shape);

/// Draws the task classes (snowball and/or random per `options.mix`) and then,
/// per class in draw order, K support and Q query rows without replacement.
FewShotTask sample_task(const CategoryGraph& g, const ClassPools& pools, std::span<const ClassId> eligible,
                        const TaskSamplerOptions& options, Rng& rng);

struct EpisodeOptions {
  // Overrides the model's configured lambda.
  std::optional<double> lambda;
  // false skips the graph entirely: prototypes are the support means.
  bool propagate = true;
  // > 0: task classes missing from the graph are first linked to their
  // k_c most similar memory classes.
  int attach_k_c = 0;
  PathwayOptions pathway;
};

struct EpisodeResult {
  Var query_embeddings;  // rows follow task.query
  Var initial;           // N x E support means, rows follow task.classes
  Var prototypes;        // N x E final prototypes
  Var logits;            // negative squared distances, queries x N
  Var loss;              // mean negative log posterior of the query labels
  PropagationPathway pathway;
};

/// Forward pass of one episode: embed, support means, optional pathway and
/// propagation, final mixing, and the query loss under the soft nearest
/// prototype posterior over the task classes.
EpisodeResult run_episode(Tape& tape, ParamView params, const Encoder& encoder, const PropagationModel& model,
                          const CategoryGraph& g, const PrototypeMemory& memory, const FewShotTask& task,
                          const EpisodeOptions& options);

/// Mean of -log softmax(-||q - P||^2)[label] over the rows of `queries`.
/// Throws ArgumentError for labels outside [0, N).
Var episode_loss(Var queries, Var prototypes, std::span<const int> labels);

}  // namespace gpn
