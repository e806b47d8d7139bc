// SPDX-License-Identifier: Apache-2.0
// A small hand-sized taxonomy with pools, a filled memory and a task, shared
// by the propagation, episode and acceptance tests.
#pragma once

#include <gpn/episode.hpp>
#include <gpn/trainer.hpp>

namespace gpn::testing {

struct TinyWorld {
  CategoryGraph graph;
  ClassPools pools;
  GpnModel model;
  FewShotTask task;
};

// Graph: 0 -> {1, 2}, 1 -> {3, 4}, 2 -> {5, 6}, 5 -> 7. Classes 0..7 all have
// pools and memory entries; the task holds `n_way` classes drawn from it.
inline TinyWorld make_tiny_world(std::uint64_t seed, int n_way = 3, int input_dim = 4, int embed_dim = 5,
                                 int heads = 2, int t_steps = 2,
                                 PropagationVariant variant = PropagationVariant::kNeighbors) {
  TinyWorld w;
  w.graph = CategoryGraph(8);
  for (auto [p, c] : {std::pair{0, 1}, {0, 2}, {1, 3}, {1, 4}, {2, 5}, {2, 6}, {5, 7}}) w.graph.add_arc(p, c);
  Rng rng = derive_rng({seed, 1});
  std::normal_distribution<double> normal(0.0, 1.0);
  for (ClassId y = 0; y < 8; ++y) {
    Matrix pool(6, input_dim);
    for (Eigen::Index i = 0; i < pool.size(); ++i) pool.data()[i] = normal(rng) + 0.5 * y;
    w.pools[y] = pool;
  }
  TrainConfig tc;
  tc.hidden_dims = {6};
  tc.embed_dim = embed_dim;
  tc.propagation.heads = heads;
  tc.propagation.t_steps = t_steps;
  tc.propagation.variant = variant;
  tc.seed = seed;
  w.model = init_model(tc, input_dim, 8);
  // Perturb every parameter so the check is not run at the near-identity init.
  for (std::size_t i = 0; i < w.model.params.size(); ++i) {
    auto& v = w.model.params.slot(i).value;
    for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] += 0.2 * normal(rng);
  }
  std::vector<ClassId> all{0, 1, 2, 3, 4, 5, 6, 7};
  RefreshOptions ro;
  refresh(w.model.memory, w.model.encoder, w.model.params, w.pools, all, 0, ro);
  TaskSamplerOptions so;
  so.shape = TaskShape{n_way, 2, 2};
  so.mix = SamplingMix::kRandom;
  w.task = sample_task(w.graph, w.pools, all, so, rng);
  return w;
}

}  // namespace gpn::testing
