// SPDX-License-Identifier: Apache-2.0
#include <gpn/errors.hpp>
#include <gpn/sampling.hpp>
#include <gpn/synth.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace gpn {

void BenchSpec::validate() const {
  if (depth < 3) throw ConfigError("bench spec: depth >= 3 required, got " + std::to_string(depth));
  if (branching[0] < 1 || branching[1] < branching[0]) {
    throw ConfigError("bench spec: branching must be a range lo,hi with 1 <= lo <= hi");
  }
  if (feature_dim < 1) throw ConfigError("bench spec: feature_dim must be >= 1");
  if (!(leaf_cluster_spread > 0.0)) throw ConfigError("bench spec: leaf_cluster_spread must be > 0");
  if (!(class_drift >= 0.0)) throw ConfigError("bench spec: class_drift must be >= 0");
  if (!(drift_decay > 0.0)) throw ConfigError("bench spec: drift_decay must be > 0");
  if (samples_per_class < 1) throw ConfigError("bench spec: samples_per_class must be >= 1");
  for (const auto& r : {close_dist_range, far_dist_range}) {
    if (r[0] < 1 || r[1] < r[0]) throw ConfigError("bench spec: distance ranges must be lo,hi with 1 <= lo <= hi");
  }
  if (n_train_classes < 1 || n_test_classes < 1) throw ConfigError("bench spec: class counts must be >= 1");
  if (split_attempts < 1) throw ConfigError("bench spec: split_attempts must be >= 1");
}

namespace {

std::array<int, 2> get_range(KeyValueConfig& kv, const std::string& key, std::array<int, 2> fallback) {
  std::vector<int> v{fallback[0], fallback[1]};
  kv.get(key, v);
  if (v.size() == 1) v.push_back(v[0]);
  if (v.size() != 2) throw ConfigError(kv.origin() + ": '" + key + "' expects lo,hi");
  return {v[0], v[1]};
}

std::vector<int> as_vec(std::array<int, 2> a) { return {a[0], a[1]}; }

}  // namespace

BenchSpec bench_spec_from(KeyValueConfig& kv) {
  BenchSpec s;
  kv.get("depth", s.depth);
  s.branching = get_range(kv, "branching", s.branching);
  kv.get("feature_dim", s.feature_dim);
  kv.get("leaf_cluster_spread", s.leaf_cluster_spread);
  kv.get("class_drift", s.class_drift);
  kv.get("drift_decay", s.drift_decay);
  kv.get("samples_per_class", s.samples_per_class);
  s.close_dist_range = get_range(kv, "close_dist_range", s.close_dist_range);
  s.far_dist_range = get_range(kv, "far_dist_range", s.far_dist_range);
  kv.get("n_train_classes", s.n_train_classes);
  kv.get("n_test_classes", s.n_test_classes);
  unsigned long seed = s.seed;
  kv.get("seed", seed);
  s.seed = seed;
  kv.get("split_attempts", s.split_attempts);
  kv.reject_unknown();
  s.validate();
  return s;
}

std::string to_text(const BenchSpec& s) {
  return KeyValueWriter()
      .add("depth", s.depth)
      .add("branching", as_vec(s.branching))
      .add("feature_dim", s.feature_dim)
      .add("leaf_cluster_spread", s.leaf_cluster_spread)
      .add("class_drift", s.class_drift)
      .add("drift_decay", s.drift_decay)
      .add("samples_per_class", s.samples_per_class)
      .add("close_dist_range", as_vec(s.close_dist_range))
      .add("far_dist_range", as_vec(s.far_dist_range))
      .add("n_train_classes", s.n_train_classes)
      .add("n_test_classes", s.n_test_classes)
      .add("seed", static_cast<unsigned long>(s.seed))
      .add("split_attempts", s.split_attempts)
      .str();
}

BenchSpec load_bench_spec(const std::string& path) {
  KeyValueConfig kv = KeyValueConfig::read_file(path);
  return bench_spec_from(kv);
}

std::string to_string(Regime r) { return r == Regime::kClose ? "close" : "far"; }

Regime parse_regime(std::string_view text) {
  if (text == "close" || text == "Close") return Regime::kClose;
  if (text == "far" || text == "Far") return Regime::kFar;
  throw ConfigError("unknown regime '" + std::string(text) + "'");
}

CategoryGraph gen_taxonomy(const BenchSpec& spec, Rng& rng) {
  if (spec.depth < 1) throw ArgumentError("gen_taxonomy: depth must be >= 1");
  if (spec.branching[0] < 1 || spec.branching[1] < spec.branching[0]) {
    throw ArgumentError("gen_taxonomy: bad branching range");
  }
  CategoryGraph g;
  std::vector<ClassId> level{g.add_node()};
  std::uniform_int_distribution<int> fanout(spec.branching[0], spec.branching[1]);
  for (int d = 1; d < spec.depth; ++d) {
    std::vector<ClassId> next;
    for (ClassId parent : level) {
      const int n = fanout(rng);
      for (int c = 0; c < n; ++c) {
        const ClassId child = g.add_node();
        g.add_arc(parent, child);
        next.push_back(child);
      }
    }
    level = std::move(next);
  }
  return g;
}

FeatureModel gen_features(const CategoryGraph& g, const BenchSpec& spec, Rng& rng) {
  FeatureModel fm;
  const int dim = spec.feature_dim;
  const auto order = g.topological_order();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::map<ClassId, int> depth;
  for (ClassId y : order) {
    Vector c = Vector::Zero(dim);
    if (!g.parents(y).empty()) {
      // Trees have one parent; for general DAGs the parents' centers are averaged.
      int d = 0;
      for (ClassId p : g.parents(y)) {
        c += fm.centers.at(p);
        d = std::max(d, depth.at(p) + 1);
      }
      c /= static_cast<double>(g.parents(y).size());
      depth[y] = d;
      const double sigma = spec.class_drift * std::pow(spec.drift_decay, d - 1);
      for (int i = 0; i < dim; ++i) c[i] += sigma * normal(rng);
    } else {
      depth[y] = 0;
    }
    fm.centers[y] = std::move(c);
  }

  const int n = spec.samples_per_class;
  for (ClassId y : g.nodes()) {
    if (!g.children(y).empty()) continue;
    Matrix pool(n, dim);
    for (int r = 0; r < n; ++r) {
      for (int i = 0; i < dim; ++i) pool(r, i) = fm.centers[y][i] + spec.leaf_cluster_spread * normal(rng);
    }
    fm.pools[y] = std::move(pool);
  }

  for (ClassId y : g.nodes()) {
    if (g.children(y).empty()) continue;
    // Descendant leaves, in id order.
    std::set<ClassId> leaves;
    std::vector<ClassId> stack{y};
    std::set<ClassId> seen{y};
    while (!stack.empty()) {
      const ClassId u = stack.back();
      stack.pop_back();
      if (g.children(u).empty()) leaves.insert(u);
      for (ClassId c : g.children(u)) {
        if (seen.insert(c).second) stack.push_back(c);
      }
    }
    std::vector<std::pair<ClassId, Eigen::Index>> candidates;
    for (ClassId leaf : leaves) {
      for (Eigen::Index r = 0; r < n; ++r) candidates.emplace_back(leaf, r);
    }
    Matrix pool(n, dim);
    const std::size_t total = candidates.size();
    for (int r = 0; r < n; ++r) {
      std::size_t pick;
      if (total >= static_cast<std::size_t>(n)) {
        // Without replacement: partial Fisher-Yates over the candidates.
        std::uniform_int_distribution<std::size_t> u(static_cast<std::size_t>(r), total - 1);
        const std::size_t j = u(rng);
        std::swap(candidates[static_cast<std::size_t>(r)], candidates[j]);
        pick = static_cast<std::size_t>(r);
      } else {
        pick = uniform_index(rng, total);
      }
      pool.row(r) = fm.pools.at(candidates[pick].first).row(candidates[pick].second);
    }
    fm.pools[y] = std::move(pool);
  }
  return fm;
}

namespace {

std::vector<ClassId> candidates_in_range(const CategoryGraph& g, std::span<const ClassId> train,
                                         std::array<int, 2> range) {
  const std::vector<int> dist = min_hop_distances(g, train);
  const std::set<ClassId> train_set(train.begin(), train.end());
  std::vector<ClassId> out;
  for (ClassId y : g.nodes()) {
    if (train_set.contains(y)) continue;
    const int d = dist[static_cast<std::size_t>(y)];
    if (d >= range[0] && d <= range[1]) out.push_back(y);
  }
  return out;
}

std::vector<ClassId> sorted(std::vector<ClassId> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

std::vector<ClassId> pick_training_classes(const CategoryGraph& g, const BenchSpec& spec, Rng& rng) {
  const auto roots = [&] {
    std::vector<ClassId> r;
    for (ClassId y : g.nodes()) {
      if (g.parents(y).empty()) r.push_back(y);
    }
    return r;
  }();
  if (roots.size() != 1) throw GenerationError("split: taxonomy must have exactly one root");
  const ClassId root = roots.front();
  const auto top = g.children(root);
  if (top.size() < 2) throw GenerationError("split: the root needs at least two children");

  const auto need = static_cast<std::size_t>(spec.n_test_classes);
  for (int attempt = 0; attempt < spec.split_attempts; ++attempt) {
    const ClassId held = top[uniform_index(rng, top.size())];
    std::vector<int> from_held = g.hop_distances_from(held);
    const std::vector<int> from_root = g.hop_distances_from(root);
    std::vector<ClassId> pool;
    for (ClassId y : g.nodes()) {
      const auto i = static_cast<std::size_t>(y);
      // In a tree, y is under `held` exactly when it is one hop further from the root.
      const bool in_held = from_held[i] >= 0 && from_root[i] == from_held[i] + 1;
      if (y != root && y != held && !in_held) pool.push_back(y);
    }
    if (pool.size() < static_cast<std::size_t>(spec.n_train_classes)) {
      throw GenerationError("split: only " + std::to_string(pool.size()) + " classes outside the held-out subtree, " +
                            std::to_string(spec.n_train_classes) +
                            " training classes requested; increase depth/branching or lower n_train_classes");
    }
    auto train = sorted(sample_random(pool, static_cast<std::size_t>(spec.n_train_classes), rng));
    if (candidates_in_range(g, train, spec.close_dist_range).size() >= need &&
        candidates_in_range(g, train, spec.far_dist_range).size() >= need) {
      return train;
    }
  }
  throw GenerationError("split: no training split within " + std::to_string(spec.split_attempts) +
                        " attempts leaves " + std::to_string(need) +
                        " test candidates in both distance ranges; increase depth/branching or lower class counts");
}

std::vector<ClassId> pick_test_classes(const CategoryGraph& g, const BenchSpec& spec, Regime regime,
                                       std::span<const ClassId> train, Rng& rng) {
  const auto range = regime == Regime::kClose ? spec.close_dist_range : spec.far_dist_range;
  const auto cands = candidates_in_range(g, train, range);
  const auto need = static_cast<std::size_t>(spec.n_test_classes);
  if (cands.size() < need) {
    throw GenerationError("split: " + std::to_string(cands.size()) + " " + to_string(regime) +
                          " candidates for " + std::to_string(need) + " test classes");
  }
  return sorted(sample_random(cands, need, rng));
}

ClassSplit split_classes(const CategoryGraph& g, const BenchSpec& spec, Regime regime, Rng& rng) {
  ClassSplit s;
  s.train = pick_training_classes(g, spec, rng);
  s.test = pick_test_classes(g, spec, regime, s.train, rng);
  return s;
}

SyntheticBenchmark generate_benchmark(const BenchSpec& spec) {
  spec.validate();
  SyntheticBenchmark b;
  b.spec = spec;
  Rng graph_rng = derive_rng({spec.seed, 0});
  b.graph = gen_taxonomy(spec, graph_rng);
  Rng feature_rng = derive_rng({spec.seed, 1});
  b.pools = gen_features(b.graph, spec, feature_rng).pools;
  Rng split_rng = derive_rng({spec.seed, 2});
  Rng close_rng = split_rng;
  Rng far_rng = split_rng;
  b.close = split_classes(b.graph, spec, Regime::kClose, close_rng);
  b.far = split_classes(b.graph, spec, Regime::kFar, far_rng);
  return b;
}

CategoryGraph training_graph(const SyntheticBenchmark& bench, Regime regime) {
  const auto& train = bench.split(regime).train;
  std::vector<ClassId> drop;
  for (ClassId y : bench.graph.nodes()) {
    if (!std::binary_search(train.begin(), train.end(), y)) drop.push_back(y);
  }
  return bench.graph.without(drop);
}

std::vector<int> split_distances(const CategoryGraph& g, const ClassSplit& split) {
  const std::vector<int> dist = min_hop_distances(g, split.train);
  std::vector<int> out;
  out.reserve(split.test.size());
  for (ClassId y : split.test) out.push_back(dist[static_cast<std::size_t>(y)]);
  return out;
}

std::string write_features_csv(const ClassPools& pools) {
  std::string out;
  Eigen::Index dim = pools.empty() ? 0 : pools.begin()->second.cols();
  out += "class_id,sample_index";
  for (Eigen::Index i = 0; i < dim; ++i) out += ",x" + std::to_string(i);
  out += "\n";
  for (const auto& [y, pool] : pools) {
    for (Eigen::Index r = 0; r < pool.rows(); ++r) {
      out += std::to_string(y);
      out += ",";
      out += std::to_string(r);
      for (Eigen::Index i = 0; i < pool.cols(); ++i) {
        out += ",";
        out += format_double(pool(r, i));
      }
      out += "\n";
    }
  }
  return out;
}

ClassPools read_features_csv(std::string_view text) {
  std::map<ClassId, std::vector<std::vector<double>>> rows;
  std::size_t pos = 0;
  int line_no = 0;
  std::size_t width = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.starts_with("class_id")) continue;
    std::vector<double> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
      auto comma = line.find(',', start);
      if (comma == std::string_view::npos) comma = line.size();
      const std::string_view f = line.substr(start, comma - start);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || f.empty()) {
        throw ConfigError("features.csv:" + std::to_string(line_no) + ": bad field '" + std::string(f) + "'");
      }
      fields.push_back(v);
      start = comma + 1;
    }
    if (fields.size() < 3) throw ConfigError("features.csv:" + std::to_string(line_no) + ": too few fields");
    if (width == 0) width = fields.size();
    if (fields.size() != width) throw ConfigError("features.csv:" + std::to_string(line_no) + ": ragged row");
    const auto y = static_cast<ClassId>(fields[0]);
    auto& bucket = rows[y];
    if (static_cast<double>(bucket.size()) != fields[1]) {
      throw ConfigError("features.csv:" + std::to_string(line_no) + ": sample_index out of order");
    }
    bucket.emplace_back(fields.begin() + 2, fields.end());
  }
  ClassPools pools;
  for (auto& [y, rs] : rows) {
    Matrix m(static_cast<Eigen::Index>(rs.size()), static_cast<Eigen::Index>(width - 2));
    for (std::size_t r = 0; r < rs.size(); ++r) {
      for (std::size_t c = 0; c < rs[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rs[r][c];
    }
    pools[y] = std::move(m);
  }
  return pools;
}

std::string write_split(const ClassSplit& split) {
  std::string out;
  for (ClassId y : split.train) out += "train " + std::to_string(y) + "\n";
  for (ClassId y : split.test) out += "test " + std::to_string(y) + "\n";
  return out;
}

ClassSplit read_split(std::string_view text) {
  ClassSplit s;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    long id = -1;
    if (!(ls >> kind >> id) || id < 0) throw ConfigError("split:" + std::to_string(line_no) + ": expected 'train|test <id>'");
    if (kind == "train") {
      s.train.push_back(static_cast<ClassId>(id));
    } else if (kind == "test") {
      s.test.push_back(static_cast<ClassId>(id));
    } else {
      throw ConfigError("split:" + std::to_string(line_no) + ": unknown kind '" + kind + "'");
    }
  }
  s.train = sorted(std::move(s.train));
  s.test = sorted(std::move(s.test));
  std::vector<ClassId> both;
  std::set_intersection(s.train.begin(), s.train.end(), s.test.begin(), s.test.end(), std::back_inserter(both));
  if (!both.empty()) throw ConfigError("split: class " + std::to_string(both.front()) + " is both train and test");
  return s;
}

void write_benchmark(const std::string& dir, const SyntheticBenchmark& bench) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir + ": " + ec.message());
  std::ostringstream edges;
  write_graph(edges, bench.graph);
  write_text_file((fs::path(dir) / "taxonomy.edges").string(), edges.str());
  write_text_file((fs::path(dir) / "features.csv").string(), write_features_csv(bench.pools));
  write_text_file((fs::path(dir) / "split_close.txt").string(), write_split(bench.close));
  write_text_file((fs::path(dir) / "split_far.txt").string(), write_split(bench.far));
  write_text_file((fs::path(dir) / "spec.txt").string(), to_text(bench.spec));
}

SyntheticBenchmark read_benchmark(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError("benchmark directory not found: " + dir);
  SyntheticBenchmark b;
  b.spec = load_bench_spec((fs::path(dir) / "spec.txt").string());
  b.graph = read_graph_file((fs::path(dir) / "taxonomy.edges").string());
  b.pools = read_features_csv(read_text_file((fs::path(dir) / "features.csv").string()));
  b.close = read_split(read_text_file((fs::path(dir) / "split_close.txt").string()));
  b.far = read_split(read_text_file((fs::path(dir) / "split_far.txt").string()));
  for (const ClassSplit* s : {&b.close, &b.far}) {
    for (ClassId y : s->train) {
      if (!b.graph.contains(y)) throw ConfigError("split names class " + std::to_string(y) + " missing from taxonomy");
    }
    for (ClassId y : s->test) {
      if (!b.graph.contains(y)) throw ConfigError("split names class " + std::to_string(y) + " missing from taxonomy");
    }
  }
  return b;
}

}  // namespace gpn
