// SPDX-License-Identifier: Apache-2.0
#include <gpn/errors.hpp>
#include <gpn/sampling.hpp>
#include <gpn/trainer.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <set>

namespace gpn {

void TrainConfig::validate() const {
  if (tau_total < 1) throw ConfigError("train: tau_total must be >= 1");
  if (m < 1) throw ConfigError("train: m must be >= 1");
  shape.validate();
  if (k_n < 0) throw ConfigError("train: k_n must be >= 0");
  if (!(snowball_share >= 0.0 && snowball_share <= 1.0)) throw ConfigError("train: snowball_share must be in [0, 1]");
  if (!(lr > 0.0)) throw ConfigError("train: lr must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) throw ConfigError("train: lr_decay_factor must be in (0, 1]");
  if (lr_decay_interval < 1) throw ConfigError("train: lr_decay_interval must be >= 1");
  if (lr_decay_start < 0) throw ConfigError("train: lr_decay_start must be >= 0");
  if (aux_batch < 1) throw ConfigError("train: aux_batch must be >= 1");
  if (aux_prob > 1.0) throw ConfigError("train: aux_prob must be <= 1 (negative selects the curriculum)");
  if (memory_cap < 1) throw ConfigError("train: memory_cap must be >= 1");
  if (embed_dim < 1) throw ConfigError("train: embed_dim must be >= 1");
  for (int h : hidden_dims) {
    if (h < 1) throw ConfigError("train: hidden_dims entries must be >= 1");
  }
  try {
    propagation.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  if (k_c < 1) throw ConfigError("train: k_c must be >= 1");
  if (!(lambda_eval >= 0.0 && lambda_eval <= 1.0)) throw ConfigError("train: lambda_eval must be in [0, 1]");
  if (eval_tasks < 1) throw ConfigError("train: eval_tasks must be >= 1");
}

EncoderConfig TrainConfig::encoder_config(int input_dim) const {
  EncoderConfig e;
  e.input_dim = input_dim;
  e.hidden_dims = hidden_dims;
  e.embed_dim = embed_dim;
  return e;
}

TrainConfig train_config_from(KeyValueConfig& kv) {
  TrainConfig c;
  kv.get("tau_total", c.tau_total);
  kv.get("m", c.m);
  kv.get("n_way", c.shape.n_way);
  kv.get("k_shot", c.shape.k_shot);
  kv.get("query_per_class", c.shape.query_per_class);
  kv.get("k_n", c.k_n);
  std::string text = to_string(c.sampling_mix);
  kv.get("sampling_mix", text);
  c.sampling_mix = parse_sampling_mix(text);
  kv.get("snowball_share", c.snowball_share);
  kv.get("lr", c.lr);
  kv.get("weight_decay", c.weight_decay);
  kv.get("lr_decay_factor", c.lr_decay_factor);
  kv.get("lr_decay_interval", c.lr_decay_interval);
  kv.get("lr_decay_start", c.lr_decay_start);
  kv.get("aux_batch", c.aux_batch);
  kv.get("use_aux", c.use_aux);
  text = "curriculum";
  kv.get("aux_prob", text);
  if (text != "curriculum") {
    KeyValueConfig one = KeyValueConfig::parse("aux_prob = " + text, kv.origin());
    one.get("aux_prob", c.aux_prob);
    if (c.aux_prob < 0.0) throw ConfigError(kv.origin() + ": aux_prob must be in [0, 1] or 'curriculum'");
  }
  kv.get("use_mst", c.use_mst);
  unsigned long cap = c.memory_cap;
  kv.get("memory_cap", cap);
  c.memory_cap = cap;
  kv.get("memory_strict", c.memory_strict);
  kv.get("hidden_dims", c.hidden_dims);
  kv.get("embed_dim", c.embed_dim);
  kv.get("t_steps", c.propagation.t_steps);
  kv.get("heads", c.propagation.heads);
  kv.get("gamma", c.propagation.gamma);
  kv.get("lambda", c.propagation.lambda);
  text = to_string(c.propagation.variant);
  kv.get("variant", text);
  c.propagation.variant = parse_variant(text);
  text = to_string(c.propagation.attention);
  kv.get("attention", text);
  c.propagation.attention = parse_attention(text);
  kv.get("normalize_attention", c.propagation.normalize_attention);
  kv.get("k_c", c.k_c);
  kv.get("lambda_eval", c.lambda_eval);
  kv.get("eval_tasks", c.eval_tasks);
  unsigned long seed = c.seed;
  kv.get("seed", seed);
  c.seed = seed;
  kv.reject_unknown();
  c.validate();
  return c;
}

std::string to_text(const TrainConfig& c) {
  return KeyValueWriter()
      .add("tau_total", c.tau_total)
      .add("m", c.m)
      .add("n_way", c.shape.n_way)
      .add("k_shot", c.shape.k_shot)
      .add("query_per_class", c.shape.query_per_class)
      .add("k_n", c.k_n)
      .add("sampling_mix", to_string(c.sampling_mix))
      .add("snowball_share", c.snowball_share)
      .add("lr", c.lr)
      .add("weight_decay", c.weight_decay)
      .add("lr_decay_factor", c.lr_decay_factor)
      .add("lr_decay_interval", c.lr_decay_interval)
      .add("lr_decay_start", c.lr_decay_start)
      .add("aux_batch", c.aux_batch)
      .add("use_aux", c.use_aux)
      .add("aux_prob", c.aux_prob < 0.0 ? std::string("curriculum") : format_double(c.aux_prob))
      .add("use_mst", c.use_mst)
      .add("memory_cap", static_cast<unsigned long>(c.memory_cap))
      .add("memory_strict", c.memory_strict)
      .add("hidden_dims", c.hidden_dims)
      .add("embed_dim", c.embed_dim)
      .add("t_steps", c.propagation.t_steps)
      .add("heads", c.propagation.heads)
      .add("gamma", c.propagation.gamma)
      .add("lambda", c.propagation.lambda)
      .add("variant", to_string(c.propagation.variant))
      .add("attention", to_string(c.propagation.attention))
      .add("normalize_attention", c.propagation.normalize_attention)
      .add("k_c", c.k_c)
      .add("lambda_eval", c.lambda_eval)
      .add("eval_tasks", c.eval_tasks)
      .add("seed", static_cast<unsigned long>(c.seed))
      .str();
}

TrainConfig load_train_config(const std::string& path) {
  KeyValueConfig kv = KeyValueConfig::read_file(path);
  return train_config_from(kv);
}

double curriculum_aux_prob(long tau, long tau_total) {
  if (tau_total < 1 || tau < 0 || tau > tau_total) throw ArgumentError("curriculum_aux_prob: need 0 <= tau <= tau_total");
  return std::pow(0.9, 20.0 * static_cast<double>(tau) / static_cast<double>(tau_total));
}

double lambda_schedule(long tau, long tau_total) {
  if (tau_total < 1 || tau < 0 || tau > tau_total) throw ArgumentError("lambda_schedule: need 0 <= tau <= tau_total");
  return 1.0 - static_cast<double>(tau) / static_cast<double>(tau_total);
}

double learning_rate(const TrainConfig& c, long tau) {
  const long k = std::max(0L, tau - c.lr_decay_start) / c.lr_decay_interval;
  return c.lr * std::pow(c.lr_decay_factor, static_cast<double>(k));
}

std::string to_string(Branch b) { return b == Branch::kAux ? "aux" : "episodic"; }

std::string to_jsonl(const EpisodeRecord& r) {
  nlohmann::ordered_json j;
  j["episode"] = r.episode;
  j["branch"] = to_string(r.branch);
  j["loss"] = r.loss;
  j["lambda"] = r.lambda;
  j["lr"] = r.lr;
  j["task_classes"] = r.task_classes;
  return j.dump();
}

GpnModel init_model(const TrainConfig& config, int input_dim, std::size_t aux_classes) {
  config.validate();
  GpnModel model;
  model.config = config;
  model.input_dim = input_dim;
  Rng rng = derive_rng({config.seed, 10});
  model.encoder = Encoder::create(config.encoder_config(input_dim), model.params, rng);
  model.aux = AuxHead::create(config.embed_dim, static_cast<int>(aux_classes), model.params, rng);
  model.propagation = PropagationModel::create(config.propagation, config.embed_dim, model.params, rng);
  return model;
}

namespace {

std::string dump_episode(long tau, const FewShotTask& task, double lambda) {
  nlohmann::ordered_json j;
  j["episode"] = tau;
  j["lambda"] = lambda;
  j["task_classes"] = task.classes;
  nlohmann::json support = nlohmann::json::array();
  for (const auto& [y, r] : task.support_rows) support.push_back({y, r});
  nlohmann::json query = nlohmann::json::array();
  for (const auto& [y, r] : task.query_rows) query.push_back({y, r});
  j["support_rows"] = support;
  j["query_rows"] = query;
  return j.dump();
}

}  // namespace

TrainResult train(const CategoryGraph& g, const ClassPools& pools, std::span<const ClassId> train_classes,
                  const TrainConfig& config, const std::function<void(const EpisodeRecord&)>& on_episode) {
  config.validate();
  if (train_classes.empty()) throw ArgumentError("train: no training classes");
  std::vector<ClassId> classes(train_classes.begin(), train_classes.end());
  std::sort(classes.begin(), classes.end());
  for (ClassId y : classes) {
    if (!pools.contains(y)) throw ArgumentError("train: no samples for class " + std::to_string(y));
    if (!g.contains(y)) throw ArgumentError("train: class " + std::to_string(y) + " missing from the graph");
  }
  const int input_dim = static_cast<int>(pools.at(classes.front()).cols());

  TrainResult result;
  GpnModel& model = result.model;
  model = init_model(config, input_dim, classes.size());
  ParameterStore& params = model.params;

  const std::vector<ClassId> eligible = eligible_classes(pools, classes, config.shape);
  TaskSamplerOptions sampler;
  sampler.shape = config.shape;
  sampler.mix = config.sampling_mix;
  sampler.snowball_share = config.snowball_share;
  sampler.hop_radius = config.k_n;

  // Flat index over every training sample for auxiliary batches.
  std::vector<std::pair<int, Eigen::Index>> aux_index;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto rows = pools.at(classes[c]).rows();
    for (Eigen::Index r = 0; r < rows; ++r) aux_index.emplace_back(static_cast<int>(c), r);
  }

  EpisodeOptions episode_opts;
  episode_opts.pathway.spanning_forest = config.use_mst;
  RefreshOptions refresh_opts;
  refresh_opts.sample_cap = config.memory_cap;
  refresh_opts.seed = config.seed;

  std::set<ClassId> seen;
  Rng rng = derive_rng({config.seed, 20});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const long total = config.tau_total;
  result.log.reserve(static_cast<std::size_t>(std::min<long>(total, 1'000'000)));

  for (long tau = 1; tau <= total; ++tau) {
    if (tau % config.m == 0) {
      std::vector<ClassId> targets;
      if (config.memory_strict) {
        targets.assign(seen.begin(), seen.end());
      } else {
        targets = classes;
      }
      refresh(model.memory, model.encoder, params, pools, targets, tau, refresh_opts);
    }

    EpisodeRecord rec;
    rec.episode = tau;
    rec.lambda = lambda_schedule(tau, total);
    rec.lr = learning_rate(config, tau);
    const double alpha = unit(rng);
    const double p_aux = !config.use_aux ? 0.0 : config.aux_prob >= 0.0 ? config.aux_prob : curriculum_aux_prob(tau, total);

    params.zero_grad();
    Tape tape(Tape::Mode::kTrain);
    if (alpha < p_aux) {
      rec.branch = Branch::kAux;
      Matrix batch(config.aux_batch, input_dim);
      std::vector<int> labels(static_cast<std::size_t>(config.aux_batch));
      for (int i = 0; i < config.aux_batch; ++i) {
        const auto& [c, r] = aux_index[uniform_index(rng, aux_index.size())];
        batch.row(i) = pools.at(classes[static_cast<std::size_t>(c)]).row(r);
        labels[static_cast<std::size_t>(i)] = c;
      }
      const Var loss = aux_loss(tape, params, model.encoder, model.aux, batch, labels);
      rec.loss = loss.item();
      if (!std::isfinite(rec.loss)) {
        throw NumericDomainError("train: non-finite auxiliary loss at episode " + std::to_string(tau));
      }
      tape.backward(loss);
    } else {
      rec.branch = Branch::kEpisodic;
      const FewShotTask task = sample_task(g, pools, eligible, sampler, rng);
      rec.task_classes = task.classes;
      episode_opts.lambda = rec.lambda;
      EpisodeResult ep;
      try {
        ep = run_episode(tape, params, model.encoder, model.propagation, g, model.memory, task, episode_opts);
      } catch (const NumericDomainError& e) {
        throw NumericDomainError(std::string("train: ") + e.what() + "; episode inputs: " +
                                 dump_episode(tau, task, rec.lambda));
      }
      rec.loss = ep.loss.item();
      if (!std::isfinite(rec.loss)) {
        throw NumericDomainError("train: non-finite episode loss; episode inputs: " + dump_episode(tau, task, rec.lambda));
      }
      tape.backward(ep.loss);
      seen.insert(task.classes.begin(), task.classes.end());
    }
    AdamOptions adam;
    adam.lr = rec.lr;
    adam.weight_decay = config.weight_decay;
    adam_step(params, adam);

    if (on_episode) on_episode(rec);
    result.log.push_back(std::move(rec));
  }
  return result;
}

void save_model(const std::string& dir, const GpnModel& model) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir + ": " + ec.message());
  save_checkpoint((fs::path(dir) / "params.bin").string(), model.params);
  save_memory((fs::path(dir) / "memory.bin").string(), model.memory);
  write_text_file((fs::path(dir) / "config.txt").string(),
                  "input_dim = " + std::to_string(model.input_dim) + "\n" + to_text(model.config));
}

GpnModel load_model(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError("checkpoint directory not found: " + dir);
  KeyValueConfig kv = KeyValueConfig::read_file((fs::path(dir) / "config.txt").string());
  int input_dim = 0;
  kv.get("input_dim", input_dim);
  if (input_dim < 1) throw ConfigError(kv.origin() + ": missing input_dim");
  GpnModel model;
  model.config = train_config_from(kv);
  model.input_dim = input_dim;
  model.params = load_checkpoint((fs::path(dir) / "params.bin").string());
  model.memory = load_memory((fs::path(dir) / "memory.bin").string());
  model.encoder = Encoder::bind(model.config.encoder_config(input_dim), model.params);
  model.aux = AuxHead::bind(model.params);
  model.propagation = PropagationModel::bind(model.config.propagation, model.config.embed_dim, model.params);
  return model;
}

}  // namespace gpn
