// SPDX-License-Identifier: Apache-2.0
#include <gpn/episode.hpp>
#include <gpn/errors.hpp>
#include <gpn/sampling.hpp>

#include <algorithm>
#include <numeric>

namespace gpn {

std::string to_string(SamplingMix m) {
  switch (m) {
    case SamplingMix::kHybrid: return "SR-S";
    case SamplingMix::kSnowball: return "S-S";
    case SamplingMix::kRandom: return "R-S";
  }
  return "?";
}

SamplingMix parse_sampling_mix(std::string_view text) {
  if (text == "SR-S" || text == "hybrid") return SamplingMix::kHybrid;
  if (text == "S-S" || text == "snowball") return SamplingMix::kSnowball;
  if (text == "R-S" || text == "random") return SamplingMix::kRandom;
  throw ConfigError("unknown sampling mix '" + std::string(text) + "'");
}

void TaskShape::validate() const {
  if (n_way < 2) throw ConfigError("task: n_way must be >= 2");
  if (k_shot < 1) throw ConfigError("task: k_shot must be >= 1");
  if (query_per_class < 1) throw ConfigError("task: query_per_class must be >= 1");
}

std::vector<ClassId> eligible_classes(const ClassPools& pools, std::span<const ClassId> candidates,
                                      const TaskShape& shape) {
  const auto need = static_cast<Eigen::Index>(shape.k_shot + shape.query_per_class);
  std::vector<ClassId> out;
  for (ClassId y : candidates) {
    const auto it = pools.find(y);
    if (it != pools.end() && it->second.rows() >= need) out.push_back(y);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

FewShotTask sample_task(const CategoryGraph& g, const ClassPools& pools, std::span<const ClassId> eligible,
                        const TaskSamplerOptions& options, Rng& rng) {
  const TaskShape& shape = options.shape;
  shape.validate();
  const auto n = static_cast<std::size_t>(shape.n_way);
  if (eligible.size() < n) {
    throw ArgumentError("sample_task: " + std::to_string(eligible.size()) + " eligible classes for a " +
                        std::to_string(n) + "-way task");
  }
  bool snowball = options.mix == SamplingMix::kSnowball;
  if (options.mix == SamplingMix::kHybrid) {
    snowball = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < options.snowball_share;
  }

  FewShotTask task;
  task.classes = snowball ? sample_snowball(g, eligible, n, options.hop_radius, rng).classes
                          : sample_random(eligible, n, rng);

  const int k = shape.k_shot;
  const int q = shape.query_per_class;
  const Eigen::Index dim = pools.at(task.classes.front()).cols();
  task.support.resize(static_cast<Eigen::Index>(n) * k, dim);
  task.query.resize(static_cast<Eigen::Index>(n) * q, dim);
  for (std::size_t c = 0; c < n; ++c) {
    const ClassId y = task.classes[c];
    const Matrix& pool = pools.at(y);
    if (pool.rows() < k + q) throw ArgumentError("sample_task: class " + std::to_string(y) + " has too few samples");
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(pool.rows()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    for (int i = 0; i < k + q; ++i) {
      const auto j = static_cast<std::size_t>(i) + uniform_index(rng, rows.size() - static_cast<std::size_t>(i));
      std::swap(rows[static_cast<std::size_t>(i)], rows[j]);
    }
    for (int i = 0; i < k; ++i) {
      const Eigen::Index r = rows[static_cast<std::size_t>(i)];
      task.support.row(static_cast<Eigen::Index>(c) * k + i) = pool.row(r);
      task.support_labels.push_back(static_cast<int>(c));
      task.support_rows.emplace_back(y, r);
    }
    for (int i = 0; i < q; ++i) {
      const Eigen::Index r = rows[static_cast<std::size_t>(k + i)];
      task.query.row(static_cast<Eigen::Index>(c) * q + i) = pool.row(r);
      task.query_labels.push_back(static_cast<int>(c));
      task.query_rows.emplace_back(y, r);
    }
  }
  return task;
}

Var episode_loss(Var queries, Var prototypes, std::span<const int> labels) {
  const auto n = prototypes.rows();
  for (int l : labels) {
    if (l < 0 || l >= n) throw ArgumentError("episode_loss: query label outside the task classes");
  }
  return ad::cross_entropy(ad::scale(-1.0, ad::pairwise_sqdist(queries, prototypes)), labels);
}

EpisodeResult run_episode(Tape& tape, ParamView params, const Encoder& encoder, const PropagationModel& model,
                          const CategoryGraph& g, const PrototypeMemory& memory, const FewShotTask& task,
                          const EpisodeOptions& options) {
  const auto n = static_cast<Eigen::Index>(task.classes.size());
  const Eigen::Index ns = task.support.rows();
  if (n == 0 || ns % n != 0) throw ArgumentError("run_episode: malformed task");
  const Eigen::Index k = ns / n;

  // One encoder pass over support and query rows together.
  Matrix all(ns + task.query.rows(), task.support.cols());
  all.topRows(ns) = task.support;
  all.bottomRows(task.query.rows()) = task.query;
  const Var emb = encoder.embed(tape, params, tape.constant(std::move(all)));

  std::vector<Var> p0_rows;
  p0_rows.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index c = 0; c < n; ++c) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(k));
    std::iota(idx.begin(), idx.end(), c * k);
    p0_rows.push_back(init_prototype(ad::gather_rows(emb, idx)));
  }
  std::vector<Eigen::Index> query_idx(static_cast<std::size_t>(task.query.rows()));
  std::iota(query_idx.begin(), query_idx.end(), ns);

  EpisodeResult out;
  out.query_embeddings = ad::gather_rows(emb, query_idx);
  out.initial = ad::stack_rows(p0_rows);
  out.prototypes = out.initial;

  const double lambda = options.lambda.value_or(model.config().lambda);
  if (options.propagate) {
    PrototypeMap task_p0;
    for (Eigen::Index c = 0; c < n; ++c) {
      task_p0[task.classes[static_cast<std::size_t>(c)]] = out.initial.value().row(c).transpose();
    }
    const CategoryGraph* graph = &g;
    CategoryGraph attached;
    if (options.attach_k_c > 0) {
      PrototypeMap missing;
      for (const auto& [y, p] : task_p0) {
        if (!g.contains(y)) missing.emplace(y, p);
      }
      if (!missing.empty()) {
        attached = attach_test_classes(g, missing, memory.prototypes(), options.attach_k_c);
        graph = &attached;
      }
    }
    out.pathway = build_pathway(*graph, task.classes, model.config().t_steps, memory, task_p0, options.pathway);

    // Pathway-ordered initial state: task classes carry their support means,
    // everything else enters as a memory constant.
    std::vector<Var> rows;
    rows.reserve(out.pathway.members().size());
    for (ClassId y : out.pathway.members()) {
      const auto it = std::find(task.classes.begin(), task.classes.end(), y);
      if (it != task.classes.end()) {
        rows.push_back(p0_rows[static_cast<std::size_t>(it - task.classes.begin())]);
      } else {
        rows.push_back(tape.constant(Matrix(memory.fetch(y)->transpose())));
      }
    }
    const PrototypeState state = run_propagation(tape, params, model, out.pathway, ad::stack_rows(rows));
    const Var final_all = mix_final(state, lambda);
    std::vector<Eigen::Index> pos;
    pos.reserve(task.classes.size());
    for (ClassId y : task.classes) pos.push_back(static_cast<Eigen::Index>(out.pathway.position(y)));
    out.prototypes = ad::gather_rows(final_all, pos);
  }

  for (int l : task.query_labels) {
    if (l < 0 || l >= n) throw ArgumentError("run_episode: query label outside the task classes");
  }
  out.logits = ad::scale(-1.0, ad::pairwise_sqdist(out.query_embeddings, out.prototypes));
  out.loss = ad::cross_entropy(out.logits, task.query_labels);
  return out;
}

}  // namespace gpn
