// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <map>
#include <random>
#include <vector>

namespace gpn {

// Dense class index in [0, |classes|).
using ClassId = std::int32_t;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// All sampling in the library draws from this engine; its output sequence is
// fixed by the standard, which keeps seeded runs reproducible.
using Rng = std::mt19937_64;

using PrototypeMap = std::map<ClassId, Vector>;

/// Engine seeded from a tuple of 64-bit keys (both halves of each key feed
/// the seed sequence).
inline Rng derive_rng(std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  words.reserve(keys.size() * 2);
  for (std::uint64_t k : keys) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

}  // namespace gpn
