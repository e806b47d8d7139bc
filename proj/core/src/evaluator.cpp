// SPDX-License-Identifier: Apache-2.0
#include <gpn/errors.hpp>
#include <gpn/evaluator.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace gpn {

std::string to_string(EvalMode m) {
  switch (m) {
    case EvalMode::kGpnPlus: return "gpn+";
    case EvalMode::kGpn: return "gpn";
    case EvalMode::kProtoNet: return "protonet";
  }
  return "?";
}

EvalMode parse_eval_mode(std::string_view text) {
  if (text == "gpn+" || text == "GPN+") return EvalMode::kGpnPlus;
  if (text == "gpn" || text == "GPN") return EvalMode::kGpn;
  if (text == "protonet" || text == "ProtoNet") return EvalMode::kProtoNet;
  throw ConfigError("unknown eval mode '" + std::string(text) + "'");
}

void EvalConfig::validate() const {
  if (n_tasks < 1) throw ConfigError("eval: n_tasks must be >= 1");
  shape.validate();
  if (k_c < 1) throw ConfigError("eval: k_c must be >= 1");
  if (!(lambda_eval >= 0.0 && lambda_eval <= 1.0)) throw ConfigError("eval: lambda_eval must be in [0, 1]");
  if (sampling == SamplingMix::kHybrid) throw ConfigError("eval: sampling must be random or snowball");
}

Posterior classify(const Vector& query, const PrototypeMap& prototypes) {
  if (prototypes.size() < 2) throw ArgumentError("classify: need at least two prototypes");
  Posterior out;
  std::vector<double> logits;
  for (const auto& [y, p] : prototypes) {
    if (p.size() != query.size()) throw ArgumentError("classify: dimension mismatch");
    out.classes.push_back(y);
    logits.push_back(-(query - p).squaredNorm());
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  out.probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.probs[i] = std::exp(logits[i] - mx);
    total += out.probs[i];
  }
  for (double& p : out.probs) p /= total;
  // First maximum in ascending id order, compared on the logits so that ties
  // are exact.
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  out.prediction = out.classes[best];
  return out;
}

double ci95(const std::vector<double>& values) {
  const auto n = values.size();
  if (n < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return 1.96 * sd / std::sqrt(static_cast<double>(n));
}

unsigned default_thread_count() {
  if (const char* env = std::getenv("GPN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct TaskOutcome {
  double accuracy = 0.0;
  double posterior_error = 0.0;
  std::vector<ClassId> classes;
  std::vector<ClassId> predictions;
};

TaskOutcome run_task(const GpnModel& model, const EvalData& data, const EvalConfig& config,
                     const std::vector<ClassId>& eligible, int index) {
  Rng rng = derive_rng({config.seed, 0x6576616cULL, static_cast<std::uint64_t>(index)});
  TaskSamplerOptions sampler;
  sampler.shape = config.shape;
  sampler.mix = config.sampling;
  sampler.hop_radius = config.k_n;
  const FewShotTask task = sample_task(*data.full_graph, *data.pools, eligible, sampler, rng);

  EpisodeOptions opts;
  opts.pathway.spanning_forest = model.config.use_mst;
  const CategoryGraph* graph = data.full_graph;
  switch (config.mode) {
    case EvalMode::kProtoNet:
      opts.propagate = false;
      break;
    case EvalMode::kGpnPlus:
      opts.lambda = config.lambda_eval;
      break;
    case EvalMode::kGpn:
      opts.lambda = config.lambda_eval;
      opts.attach_k_c = config.k_c;
      graph = data.train_graph;
      break;
  }
  Tape tape(Tape::Mode::kInference);
  const EpisodeResult ep = run_episode(tape, ParamView(model.params), model.encoder, model.propagation, *graph,
                                       model.memory, task, opts);

  PrototypeMap protos;
  for (std::size_t c = 0; c < task.classes.size(); ++c) {
    protos[task.classes[c]] = ep.prototypes.value().row(static_cast<Eigen::Index>(c)).transpose();
  }
  TaskOutcome out;
  out.classes = task.classes;
  const Matrix& q = ep.query_embeddings.value();
  int correct = 0;
  for (Eigen::Index r = 0; r < q.rows(); ++r) {
    const Posterior post = classify(q.row(r).transpose(), protos);
    const double sum = std::accumulate(post.probs.begin(), post.probs.end(), 0.0);
    out.posterior_error = std::max(out.posterior_error, std::abs(sum - 1.0));
    out.predictions.push_back(post.prediction);
    if (post.prediction == task.classes[static_cast<std::size_t>(task.query_labels[static_cast<std::size_t>(r)])]) {
      ++correct;
    }
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(q.rows());
  return out;
}

}  // namespace

EvalReport evaluate(const GpnModel& model, const EvalData& data, const EvalConfig& config) {
  config.validate();
  if (!data.full_graph || !data.train_graph || !data.pools) throw ArgumentError("evaluate: incomplete data");
  {
    const std::set<ClassId> train(data.train_classes.begin(), data.train_classes.end());
    for (ClassId y : data.test_classes) {
      if (train.contains(y)) throw ConfigError("evaluate: class " + std::to_string(y) + " is both train and test");
      if (model.memory.contains(y)) throw ConfigError("evaluate: test class " + std::to_string(y) + " found in memory");
    }
  }
  if (config.mode == EvalMode::kGpn) {
    for (ClassId y : data.test_classes) {
      if (data.train_graph->contains(y)) {
        throw ConfigError("evaluate: GPN mode needs a graph without test class " + std::to_string(y));
      }
    }
  }
  const std::vector<ClassId> eligible = eligible_classes(*data.pools, data.test_classes, config.shape);

  std::vector<TaskOutcome> outcomes(static_cast<std::size_t>(config.n_tasks));
  const unsigned threads =
      std::max(1u, std::min<unsigned>(config.threads ? config.threads : default_thread_count(),
                                      static_cast<unsigned>(config.n_tasks)));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (int i = next++; i < config.n_tasks; i = next++) {
      try {
        outcomes[static_cast<std::size_t>(i)] = run_task(model, data, config, eligible, i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = config.n_tasks;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  EvalReport report;
  report.mode = config.mode;
  report.config = config;
  for (auto& o : outcomes) {
    report.accuracies.push_back(o.accuracy);
    report.max_posterior_error = std::max(report.max_posterior_error, o.posterior_error);
    report.task_classes.push_back(std::move(o.classes));
    report.predictions.push_back(std::move(o.predictions));
  }
  report.mean = std::accumulate(report.accuracies.begin(), report.accuracies.end(), 0.0) /
                static_cast<double>(report.accuracies.size());
  report.ci95 = ci95(report.accuracies);
  return report;
}

std::string to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(r.mode);
  j["n_tasks"] = r.config.n_tasks;
  j["mean"] = r.mean;
  j["ci95"] = r.ci95;
  j["max_posterior_error"] = r.max_posterior_error;
  nlohmann::ordered_json cfg;
  cfg["n_way"] = r.config.shape.n_way;
  cfg["k_shot"] = r.config.shape.k_shot;
  cfg["query_per_class"] = r.config.shape.query_per_class;
  cfg["sampling"] = r.config.sampling == SamplingMix::kSnowball ? "snowball" : "random";
  cfg["k_n"] = r.config.k_n;
  cfg["k_c"] = r.config.k_c;
  cfg["lambda_eval"] = r.config.lambda_eval;
  cfg["seed"] = r.config.seed;
  j["config"] = cfg;
  j["accuracies"] = r.accuracies;
  return j.dump(2) + "\n";
}

std::string to_csv(const EvalReport& r) {
  std::string out = "task,accuracy,classes\n";
  for (std::size_t i = 0; i < r.accuracies.size(); ++i) {
    out += std::to_string(i) + "," + format_double(r.accuracies[i]) + ",";
    for (std::size_t c = 0; c < r.task_classes[i].size(); ++c) {
      if (c) out += " ";
      out += std::to_string(r.task_classes[i][c]);
    }
    out += "\n";
  }
  return out;
}

std::string to_table(const EvalReport& r) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << "mode      " << to_string(r.mode) << "\n"
    << "setting   " << r.config.shape.n_way << "-way " << r.config.shape.k_shot << "-shot, " << r.config.n_tasks
    << " tasks\n"
    << "accuracy  " << 100.0 * r.mean << " +- " << 100.0 * r.ci95 << " %\n";
  return s.str();
}

}  // namespace gpn
