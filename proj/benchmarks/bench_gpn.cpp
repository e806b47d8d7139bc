// SPDX-License-Identifier: Apache-2.0
// Micro benchmarks on the default synthetic benchmark with an untrained model.
#include <gpn/episode.hpp>
#include <gpn/evaluator.hpp>
#include <gpn/pathway.hpp>
#include <gpn/synth.hpp>
#include <gpn/trainer.hpp>

#include <benchmark/benchmark.h>

#include <vector>

using namespace gpn;

namespace {

struct World {
  SyntheticBenchmark bench;
  CategoryGraph train_graph;
  GpnModel model;
  std::vector<FewShotTask> tasks;

  World() : bench(generate_benchmark(BenchSpec{})), train_graph(training_graph(bench, Regime::kClose)) {
    TrainConfig c;
    model = init_model(c, bench.spec.feature_dim, bench.close.train.size());
    refresh(model.memory, model.encoder, model.params, bench.pools, bench.close.train, 0, RefreshOptions{});
    TaskSamplerOptions so;
    so.shape = c.shape;
    Rng rng(5);
    const auto eligible = eligible_classes(bench.pools, bench.close.train, so.shape);
    for (int i = 0; i < 32; ++i) tasks.push_back(sample_task(train_graph, bench.pools, eligible, so, rng));
  }
};

World& world() {
  static World w;
  return w;
}

PrototypeMap support_means(const FewShotTask& t, const GpnModel& m) {
  Tape tape(Tape::Mode::kInference);
  const Matrix z = m.encoder.embed(m.params, t.support);
  PrototypeMap p;
  for (std::size_t c = 0; c < t.classes.size(); ++c) {
    Vector sum = Vector::Zero(z.cols());
    int n = 0;
    for (std::size_t r = 0; r < t.support_labels.size(); ++r) {
      if (t.support_labels[r] == static_cast<int>(c)) {
        sum += z.row(static_cast<Eigen::Index>(r)).transpose();
        ++n;
      }
    }
    p[t.classes[c]] = sum / n;
  }
  return p;
}

void BM_BuildPathway(benchmark::State& state) {
  World& w = world();
  std::vector<PrototypeMap> p0;
  for (const auto& t : w.tasks) p0.push_back(support_means(t, w.model));
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& t = w.tasks[i % w.tasks.size()];
    benchmark::DoNotOptimize(build_pathway(w.train_graph, t.classes, 2, w.model.memory, p0[i % p0.size()]));
    ++i;
  }
}
BENCHMARK(BM_BuildPathway);

// Forward pass plus backward pass of one 5-way 1-shot episode.
void BM_EpisodeTrainStep(benchmark::State& state) {
  World& w = world();
  EpisodeOptions opts;
  opts.lambda = 0.5;
  std::size_t i = 0;
  for (auto _ : state) {
    w.model.params.zero_grad();
    Tape tape;
    const auto r = run_episode(tape, w.model.params, w.model.encoder, w.model.propagation, w.train_graph,
                               w.model.memory, w.tasks[i++ % w.tasks.size()], opts);
    tape.backward(r.loss);
  }
}
BENCHMARK(BM_EpisodeTrainStep);

void BM_EpisodeInference(benchmark::State& state) {
  World& w = world();
  EpisodeOptions opts;
  opts.lambda = 0.0;
  std::size_t i = 0;
  for (auto _ : state) {
    Tape tape(Tape::Mode::kInference);
    benchmark::DoNotOptimize(run_episode(tape, w.model.params, w.model.encoder, w.model.propagation, w.train_graph,
                                         w.model.memory, w.tasks[i++ % w.tasks.size()], opts)
                                 .loss.item());
  }
}
BENCHMARK(BM_EpisodeInference);

// Refresh of every training class (the work done every m episodes).
void BM_MemoryRefresh(benchmark::State& state) {
  World& w = world();
  // Stamps must keep increasing across repeated runs of this function.
  static std::int64_t episode = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(refresh(w.model.memory, w.model.encoder, w.model.params, w.bench.pools,
                                     w.bench.close.train, ++episode, RefreshOptions{}));
  }
}
BENCHMARK(BM_MemoryRefresh);

void BM_Classify(benchmark::State& state) {
  World& w = world();
  const PrototypeMap p = support_means(w.tasks[0], w.model);
  const Vector q = Vector::Ones(w.model.config.embed_dim);
  for (auto _ : state) benchmark::DoNotOptimize(classify(q, p));
}
BENCHMARK(BM_Classify);

}  // namespace

BENCHMARK_MAIN();
