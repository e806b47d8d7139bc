// SPDX-License-Identifier: Apache-2.0
// A benchmark small enough for unit tests (31 classes).
#pragma once

#include <gpn/synth.hpp>
#include <gpn/trainer.hpp>

namespace gpn::testing {

inline BenchSpec small_spec(std::uint64_t seed = 3) {
  BenchSpec s;
  s.depth = 5;
  s.branching = {2, 2};
  s.feature_dim = 6;
  s.samples_per_class = 24;
  s.n_train_classes = 8;
  s.n_test_classes = 3;
  s.seed = seed;
  return s;
}

inline TrainConfig small_train_config(long tau_total = 40) {
  TrainConfig c;
  c.tau_total = tau_total;
  c.shape = TaskShape{3, 1, 4};
  c.hidden_dims = {8};
  c.embed_dim = 4;
  c.aux_batch = 16;
  c.propagation.heads = 2;
  c.k_c = 2;
  c.eval_tasks = 20;
  return c;
}

}  // namespace gpn::testing
