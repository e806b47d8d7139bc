// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <gpn/graph.hpp>

#include <span>
#include <vector>

namespace gpn {

/// Uniform index in [0, n). n must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// `n` distinct classes drawn uniformly without replacement from `eligible`,
/// in draw order.
std::vector<ClassId> sample_random(std::span<const ClassId> eligible, std::size_t n, Rng& rng);

struct SnowballSample {
  std::vector<ClassId> classes;
  // fallback[i] is true when classes[i] was drawn because the hop-k_n frontier
  // was empty (the first class is never a fallback).
  std::vector<bool> fallback;

  bool any_fallback() const;
};

/// Sequential snowball sampling: the first class is uniform over `eligible`;
/// each next class is uniform over eligible classes within `hop_radius`
/// undirected hops of any selected class. An empty frontier falls back to
/// uniform over the remaining eligible classes.
SnowballSample sample_snowball(const CategoryGraph& g, std::span<const ClassId> eligible,
                               std::size_t n, int hop_radius, Rng& rng);

}  // namespace gpn
