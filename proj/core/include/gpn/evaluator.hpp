// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <gpn/episode.hpp>
#include <gpn/trainer.hpp>

#include <string>
#include <vector>

namespace gpn {

enum class EvalMode { kGpnPlus, kGpn, kProtoNet };
std::string to_string(EvalMode m);
EvalMode parse_eval_mode(std::string_view text);

struct EvalConfig {
  EvalMode mode = EvalMode::kGpn;
  int n_tasks = 600;
  TaskShape shape;
  // Only kRandom and kSnowball are meaningful here.
  SamplingMix sampling = SamplingMix::kRandom;
  int k_n = 5;
  int k_c = 2;
  double lambda_eval = 0.0;
  std::uint64_t seed = 1;
  // 0 = hardware concurrency.
  unsigned threads = 0;

  void validate() const;
};

struct Posterior {
  std::vector<ClassId> classes;  // ascending
  std::vector<double> probs;
  ClassId prediction = -1;
};

/// softmax(-||q - P_y||^2) over the given prototypes; the prediction is the
/// argmax with ties going to the smallest class id.
Posterior classify(const Vector& query, const PrototypeMap& prototypes);

struct EvalReport {
  EvalMode mode = EvalMode::kGpn;
  EvalConfig config;
  std::vector<double> accuracies;  // by task index
  double mean = 0.0;
  double ci95 = 0.0;
  // Largest |sum(posterior) - 1| seen over every classified query.
  double max_posterior_error = 0.0;
  std::vector<std::vector<ClassId>> task_classes;
  std::vector<std::vector<ClassId>> predictions;
};

/// The test split of a benchmark regime as the evaluator sees it.
struct EvalData {
  const CategoryGraph* full_graph = nullptr;   // whole taxonomy (GPN+ pathways, snowball sampling)
  const CategoryGraph* train_graph = nullptr;  // training classes only (GPN pathways)
  const ClassPools* pools = nullptr;
  std::vector<ClassId> train_classes;
  std::vector<ClassId> test_classes;
};

/// Runs `config.n_tasks` test tasks. Task i draws from its own generator
/// seeded by (seed, i), so the report does not depend on the thread count.
EvalReport evaluate(const GpnModel& model, const EvalData& data, const EvalConfig& config);

/// ci95 = 1.96 * sample stddev / sqrt(n); 0 for n < 2.
double ci95(const std::vector<double>& values);

std::string to_json(const EvalReport& report);
std::string to_csv(const EvalReport& report);
std::string to_table(const EvalReport& report);

/// GPN_THREADS when set to a positive integer, otherwise hardware concurrency.
unsigned default_thread_count();

}  // namespace gpn
