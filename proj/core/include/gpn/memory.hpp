// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <gpn/params.hpp>
#include <gpn/types.hpp>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace gpn {

class Encoder;

// Sample pools per class; each row of a pool is one raw feature vector.
using ClassPools = std::map<ClassId, Matrix>;

struct MemoryEntry {
  Vector prototype;
  std::int64_t refreshed_at = 0;
};

/// Persistent class -> prototype store. Entries are plain values: reads never
/// feed gradients back into the memory.
class PrototypeMemory {
 public:
  /// Stored prototype or nullptr when the class was never refreshed.
  const Vector* fetch(ClassId y) const;
  bool contains(ClassId y) const { return entries_.contains(y); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<ClassId, MemoryEntry>& entries() const { return entries_; }
  PrototypeMap prototypes() const;

  void put(ClassId y, Vector prototype, std::int64_t episode);
  /// Replaces the whole map at once.
  void swap_entries(std::map<ClassId, MemoryEntry>& next) { entries_.swap(next); }

 private:
  std::map<ClassId, MemoryEntry> entries_;
};

struct RefreshOptions {
  // Samples averaged per class and refresh.
  std::size_t sample_cap = 64;
  std::uint64_t seed = 0;
};

struct RefreshReport {
  std::vector<ClassId> refreshed;
  std::vector<ClassId> skipped_empty;
};

/// Recomputes the prototype of every class in `classes` as the mean embedding
/// of up to `sample_cap` rows of its pool. Pools larger than the cap are
/// subsampled without replacement by a generator seeded from (seed, episode,
/// class), so the result is a pure function of its inputs.
RefreshReport refresh(PrototypeMemory& memory, const Encoder& encoder, const ParameterStore& params,
                      const ClassPools& pools, std::span<const ClassId> classes,
                      std::int64_t episode, const RefreshOptions& options);

// Snapshot uses the checkpoint container: one rank-1 record `memory/<id>` per
// class plus `memory_stamps` (n x 2 rows of id, episode).
TensorContainer memory_to_container(const PrototypeMemory& memory);
PrototypeMemory memory_from_container(const TensorContainer& c);
void save_memory(const std::string& path, const PrototypeMemory& memory);
PrototypeMemory load_memory(const std::string& path);

}  // namespace gpn
