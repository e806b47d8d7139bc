// SPDX-License-Identifier: Apache-2.0
// gpn: generate synthetic benchmarks, train, evaluate and run ablation sweeps.
#include <gpn/errors.hpp>
#include <gpn/evaluator.hpp>
#include <gpn/synth.hpp>
#include <gpn/trainer.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

namespace fs = std::filesystem;
using namespace gpn;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct GenArgs {
  std::string spec;
  std::string out;
};

struct TrainArgs {
  std::string bench;
  std::string config;
  std::string out;
  std::string regime = "close";
  long progress = 1000;
};

struct EvalArgs {
  std::string bench;
  std::string ckpt;
  std::string mode = "gpn";
  std::string regime = "close";
  std::string sampling = "random";
  int tasks = 600;
  std::optional<double> lambda;
  std::optional<int> k_c;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string csv;
};

struct AblateArgs {
  std::string bench;
  std::string config;
  std::string axis;
  std::string out;
  std::string regime = "close";
  std::string mode = "gpn+";
  std::string sampling = "random";
  std::optional<int> tasks;
};

EvalData eval_data(const SyntheticBenchmark& bench, Regime regime, const CategoryGraph& train_graph) {
  EvalData d;
  d.full_graph = &bench.graph;
  d.train_graph = &train_graph;
  d.pools = &bench.pools;
  d.train_classes = bench.split(regime).train;
  d.test_classes = bench.split(regime).test;
  return d;
}

GpnModel run_training(const SyntheticBenchmark& bench, Regime regime, const TrainConfig& config,
                      std::ostream* jsonl, long progress) {
  const CategoryGraph g = training_graph(bench, regime);
  double window = 0.0;
  long count = 0;
  auto on_episode = [&](const EpisodeRecord& r) {
    if (jsonl) *jsonl << to_jsonl(r) << '\n';
    if (r.branch == Branch::kEpisodic) {
      window += r.loss;
      ++count;
    }
    if (progress > 0 && r.episode % progress == 0) {
      std::cerr << "episode " << r.episode << "/" << config.tau_total << "  episodic loss "
                << (count ? window / static_cast<double>(count) : 0.0) << "  lambda " << r.lambda << "  lr " << r.lr
                << "\n";
      window = 0.0;
      count = 0;
    }
  };
  return std::move(train(g, bench.pools, bench.split(regime).train, config, on_episode).model);
}

EvalConfig make_eval_config(const TrainConfig& tc, const std::string& mode, const std::string& sampling, int tasks) {
  EvalConfig ec;
  ec.mode = parse_eval_mode(mode);
  ec.n_tasks = tasks;
  ec.shape = tc.shape;
  ec.sampling = parse_sampling_mix(sampling);
  ec.k_n = tc.k_n;
  ec.k_c = tc.k_c;
  ec.lambda_eval = tc.lambda_eval;
  ec.seed = tc.seed;
  return ec;
}

int cmd_gen(const GenArgs& a) {
  const BenchSpec spec = load_bench_spec(a.spec);
  const SyntheticBenchmark bench = generate_benchmark(spec);
  write_benchmark(a.out, bench);
  std::cerr << "wrote " << a.out << ": " << bench.graph.node_count() << " classes, " << bench.close.train.size()
            << " train, " << bench.close.test.size() << " close test, " << bench.far.test.size() << " far test\n";
  return 0;
}

int cmd_train(const TrainArgs& a) {
  const SyntheticBenchmark bench = read_benchmark(a.bench);
  const TrainConfig config = load_train_config(a.config);
  fs::create_directories(a.out);
  std::ofstream jsonl(fs::path(a.out) / "train.jsonl", std::ios::binary | std::ios::trunc);
  if (!jsonl) throw ConfigError("cannot write " + (fs::path(a.out) / "train.jsonl").string());
  const GpnModel model = run_training(bench, parse_regime(a.regime), config, &jsonl, a.progress);
  save_model(a.out, model);
  return 0;
}

void check_compatible(const GpnModel& model, const SyntheticBenchmark& bench, Regime regime) {
  if (model.input_dim != bench.spec.feature_dim) {
    throw ConfigError("checkpoint expects " + std::to_string(model.input_dim) + "-dim features, benchmark has " +
                      std::to_string(bench.spec.feature_dim));
  }
  const auto& train = bench.split(regime).train;
  for (const auto& [y, entry] : model.memory.entries()) {
    if (!std::binary_search(train.begin(), train.end(), y)) {
      throw ConfigError("checkpoint memory holds class " + std::to_string(y) +
                        ", which is not a training class of this benchmark");
    }
  }
}

int cmd_eval(const EvalArgs& a) {
  const SyntheticBenchmark bench = read_benchmark(a.bench);
  const GpnModel model = load_model(a.ckpt);
  const Regime regime = parse_regime(a.regime);
  check_compatible(model, bench, regime);
  EvalConfig ec = make_eval_config(model.config, a.mode, a.sampling, a.tasks);
  if (a.lambda) ec.lambda_eval = *a.lambda;
  if (a.k_c) ec.k_c = *a.k_c;
  if (a.seed) ec.seed = *a.seed;
  if (ec.mode != EvalMode::kProtoNet && model.memory.empty()) {
    throw ConfigError("mode " + a.mode + " needs a checkpoint with a populated prototype memory");
  }
  const CategoryGraph train_graph = training_graph(bench, regime);
  const EvalReport report = evaluate(model, eval_data(bench, regime, train_graph), ec);
  const std::string json = to_json(report);
  if (a.out.empty()) {
    std::cout << json;
  } else {
    write_text_file(a.out, json);
  }
  if (!a.csv.empty()) write_text_file(a.csv, to_csv(report));
  std::cerr << to_table(report);
  return 0;
}

struct AxisValue {
  std::string label;
  std::function<void(TrainConfig&)> apply;
};

std::vector<AxisValue> axis_values(const std::string& axis) {
  std::vector<AxisValue> v;
  if (axis == "sampling") {
    for (const char* s : {"SR-S", "S-S", "R-S"}) {
      v.push_back({s, [s](TrainConfig& c) { c.sampling_mix = parse_sampling_mix(s); }});
    }
  } else if (axis == "direction") {
    for (const char* s : {"N->C", "F->C", "C->C", "B->P", "M->P"}) {
      v.push_back({s, [s](TrainConfig& c) { c.propagation.variant = parse_variant(s); }});
    }
  } else if (axis == "aux") {
    v.push_back({"on", [](TrainConfig& c) { c.use_aux = true; }});
    v.push_back({"off", [](TrainConfig& c) { c.use_aux = false; }});
  } else if (axis == "mst") {
    v.push_back({"on", [](TrainConfig& c) { c.use_mst = true; }});
    v.push_back({"off", [](TrainConfig& c) { c.use_mst = false; }});
  } else if (axis == "heads") {
    for (int k : {1, 5}) v.push_back({std::to_string(k), [k](TrainConfig& c) { c.propagation.heads = k; }});
  } else if (axis == "attention") {
    v.push_back({"multiplicative", [](TrainConfig& c) { c.propagation.attention = AttentionKind::kMultiplicative; }});
    v.push_back({"additive", [](TrainConfig& c) { c.propagation.attention = AttentionKind::kAdditive; }});
  } else {
    throw ConfigError("unknown ablation axis '" + axis + "' (sampling, direction, aux, mst, heads, attention)");
  }
  return v;
}

int cmd_ablate(const AblateArgs& a) {
  const auto values = axis_values(a.axis);
  const SyntheticBenchmark bench = read_benchmark(a.bench);
  const TrainConfig base = load_train_config(a.config);
  const Regime regime = parse_regime(a.regime);
  const CategoryGraph train_graph = training_graph(bench, regime);
  fs::create_directories(a.out);
  std::string csv = "variant,mean,ci95\n";
  for (const AxisValue& value : values) {
    TrainConfig config = base;
    value.apply(config);
    config.validate();
    std::cerr << "[" << a.axis << "=" << value.label << "] training " << config.tau_total << " episodes\n";
    const GpnModel model = run_training(bench, regime, config, nullptr, 0);
    const EvalConfig ec = make_eval_config(config, a.mode, a.sampling, a.tasks.value_or(config.eval_tasks));
    const EvalReport report = evaluate(model, eval_data(bench, regime, train_graph), ec);
    std::cerr << to_table(report);
    csv += value.label + "," + format_double(report.mean) + "," + format_double(report.ci95) + "\n";
  }
  write_text_file((fs::path(a.out) / (a.axis + ".csv")).string(), csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph prototypical networks on synthetic class taxonomies"};
  app.require_subcommand(1, 1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic benchmark directory");
  gen_cmd->add_option("--spec", gen.spec, "Benchmark spec (key = value)")->required();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a benchmark");
  train_cmd->add_option("--bench", tr.bench, "Benchmark directory")->required();
  train_cmd->add_option("--config", tr.config, "Training config (key = value)")->required();
  train_cmd->add_option("--out", tr.out, "Checkpoint directory")->required();
  train_cmd->add_option("--regime", tr.regime, "Split whose training classes are used")
      ->check(CLI::IsMember({"close", "far"}));
  train_cmd->add_option("--progress", tr.progress, "Report every N episodes (0 = quiet)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on test tasks");
  eval_cmd->add_option("--bench", ev.bench, "Benchmark directory")->required();
  eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint directory")->required();
  eval_cmd->add_option("--mode", ev.mode)->check(CLI::IsMember({"gpn+", "gpn", "protonet"}));
  eval_cmd->add_option("--regime", ev.regime)->check(CLI::IsMember({"close", "far"}));
  eval_cmd->add_option("--sampling", ev.sampling)->check(CLI::IsMember({"random", "snowball"}));
  eval_cmd->add_option("--tasks", ev.tasks)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--lambda", ev.lambda, "Test-time lambda (default: config lambda_eval)")
      ->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--k-c", ev.k_c, "Attachment degree in gpn mode")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", ev.seed, "Task sampling seed (default: config seed)");
  eval_cmd->add_option("--out", ev.out, "Write the JSON report here instead of stdout");
  eval_cmd->add_option("--csv", ev.csv, "Also write per-task accuracies as CSV");

  AblateArgs ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate one run per value of an ablation axis");
  ablate_cmd->add_option("--bench", ab.bench, "Benchmark directory")->required();
  ablate_cmd->add_option("--config", ab.config, "Base training config")->required();
  ablate_cmd->add_option("--axis", ab.axis, "sampling | direction | aux | mst | heads | attention")->required();
  ablate_cmd->add_option("--out", ab.out, "Output directory for <axis>.csv")->required();
  ablate_cmd->add_option("--regime", ab.regime)->check(CLI::IsMember({"close", "far"}));
  ablate_cmd->add_option("--mode", ab.mode)->check(CLI::IsMember({"gpn+", "gpn", "protonet"}));
  ablate_cmd->add_option("--sampling", ab.sampling)->check(CLI::IsMember({"random", "snowball"}));
  ablate_cmd->add_option("--tasks", ab.tasks, "Test tasks per variant (default: config eval_tasks)")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen);
    if (*train_cmd) return cmd_train(tr);
    if (*eval_cmd) return cmd_eval(ev);
    if (*ablate_cmd) return cmd_ablate(ab);
  } catch (const NumericDomainError& e) {
    std::cerr << "gpn: numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ConfigError& e) {
    std::cerr << "gpn: " << e.what() << "\n";
    return kExitUsage;
  } catch (const GenerationError& e) {
    std::cerr << "gpn: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ArgumentError& e) {
    std::cerr << "gpn: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "gpn: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
