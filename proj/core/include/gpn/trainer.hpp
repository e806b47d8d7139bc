// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <gpn/config.hpp>
#include <gpn/encoder.hpp>
#include <gpn/episode.hpp>
#include <gpn/memory.hpp>
#include <gpn/params.hpp>
#include <gpn/propagation.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gpn {

struct TrainConfig {
  long tau_total = 350000;
  int m = 3;  // memory refresh interval
  TaskShape shape;
  int k_n = 5;
  SamplingMix sampling_mix = SamplingMix::kHybrid;
  double snowball_share = 0.5;

  double lr = 1e-3;
  double weight_decay = 1e-5;
  double lr_decay_factor = 0.9;
  long lr_decay_interval = 10000;
  long lr_decay_start = 20000;

  int aux_batch = 128;
  bool use_aux = true;
  // Fixed auxiliary-branch probability; negative follows the curriculum.
  double aux_prob = -1.0;

  bool use_mst = true;
  std::size_t memory_cap = 64;
  // Refresh only classes that already appeared in an episodic task.
  bool memory_strict = false;

  std::vector<int> hidden_dims = {64, 64};
  int embed_dim = 32;
  PropagationConfig propagation;

  // Evaluation settings used when the same file drives an ablation sweep.
  int k_c = 2;
  double lambda_eval = 0.0;
  int eval_tasks = 600;

  std::uint64_t seed = 1;

  void validate() const;
  EncoderConfig encoder_config(int input_dim) const;
};

TrainConfig train_config_from(KeyValueConfig& kv);
std::string to_text(const TrainConfig& config);
TrainConfig load_train_config(const std::string& path);

/// 0.9^(20 tau / tau_total).
double curriculum_aux_prob(long tau, long tau_total);
/// 1 - tau / tau_total.
double lambda_schedule(long tau, long tau_total);
/// lr0 * factor^floor(max(0, tau - start) / interval).
double learning_rate(const TrainConfig& config, long tau);

enum class Branch { kAux, kEpisodic };
std::string to_string(Branch b);

struct EpisodeRecord {
  long episode = 0;
  Branch branch = Branch::kAux;
  double loss = 0.0;
  double lambda = 0.0;
  double lr = 0.0;
  std::vector<ClassId> task_classes;  // empty for auxiliary batches
};

/// One JSON object per line.
std::string to_jsonl(const EpisodeRecord& r);

/// Everything needed to run episodes: parameters, memory and the bound
/// modules.
struct GpnModel {
  TrainConfig config;
  int input_dim = 0;
  ParameterStore params;
  PrototypeMemory memory;
  Encoder encoder;
  AuxHead aux;
  PropagationModel propagation;
};

/// Fresh parameters for `aux_classes` auxiliary outputs.
GpnModel init_model(const TrainConfig& config, int input_dim, std::size_t aux_classes);

struct TrainResult {
  GpnModel model;
  std::vector<EpisodeRecord> log;
};

/// Training loop. `train_classes` are the classes episodes and auxiliary
/// batches draw from; `g` is the graph pathways are built on. Throws
/// NumericDomainError (with the episode inputs in the message) when a loss
/// turns non-finite.
TrainResult train(const CategoryGraph& g, const ClassPools& pools, std::span<const ClassId> train_classes,
                  const TrainConfig& config, const std::function<void(const EpisodeRecord&)>& on_episode = {});

// Checkpoint directory: params.bin, memory.bin, config.txt (plus train.jsonl
// written by the caller).
void save_model(const std::string& dir, const GpnModel& model);
GpnModel load_model(const std::string& dir);

}  // namespace gpn
