// SPDX-License-Identifier: Apache-2.0
#include <gpn/errors.hpp>
#include <gpn/sampling.hpp>

#include <algorithm>
#include <set>

namespace gpn {

std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw ArgumentError("uniform_index: empty range");
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  return pick(rng);
}

std::vector<ClassId> sample_random(std::span<const ClassId> eligible, std::size_t n, Rng& rng) {
  if (n > eligible.size()) {
    throw ArgumentError("sample_random: requested " + std::to_string(n) + " classes but only " +
                        std::to_string(eligible.size()) + " are eligible");
  }
  std::vector<ClassId> pool(eligible.begin(), eligible.end());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  return pool;
}

bool SnowballSample::any_fallback() const {
  return std::find(fallback.begin(), fallback.end(), true) != fallback.end();
}

SnowballSample sample_snowball(const CategoryGraph& g, std::span<const ClassId> eligible,
                               std::size_t n, int hop_radius, Rng& rng) {
  if (n < 1) throw ArgumentError("sample_snowball: n must be >= 1");
  if (hop_radius < 1) throw ArgumentError("sample_snowball: hop radius must be >= 1");
  if (n > eligible.size()) {
    throw ArgumentError("sample_snowball: requested " + std::to_string(n) + " classes but only " +
                        std::to_string(eligible.size()) + " are eligible");
  }
  std::vector<bool> is_eligible(g.capacity(), false);
  for (ClassId id : eligible) {
    if (!g.contains(id)) throw ArgumentError("sample_snowball: unknown class id " + std::to_string(id));
    is_eligible[id] = true;
  }

  SnowballSample out;
  std::set<ClassId> selected;
  std::set<ClassId> frontier;
  auto select = [&](ClassId c, bool was_fallback) {
    out.classes.push_back(c);
    out.fallback.push_back(was_fallback);
    selected.insert(c);
    frontier.erase(c);
    const auto dist = g.hop_distances_from(c, hop_radius);
    for (std::size_t v = 0; v < dist.size(); ++v) {
      const auto id = static_cast<ClassId>(v);
      if (dist[v] > 0 && is_eligible[v] && !selected.contains(id)) frontier.insert(id);
    }
  };

  select(eligible[uniform_index(rng, eligible.size())], false);
  while (out.classes.size() < n) {
    if (!frontier.empty()) {
      auto it = frontier.begin();
      std::advance(it, static_cast<std::ptrdiff_t>(uniform_index(rng, frontier.size())));
      select(*it, false);
      continue;
    }
    std::vector<ClassId> remaining;
    for (ClassId id : eligible) {
      if (!selected.contains(id)) remaining.push_back(id);
    }
    select(remaining[uniform_index(rng, remaining.size())], true);
  }
  return out;
}

}  // namespace gpn
