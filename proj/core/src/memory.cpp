// SPDX-License-Identifier: Apache-2.0
#include <gpn/encoder.hpp>
#include <gpn/errors.hpp>
#include <gpn/memory.hpp>

#include <algorithm>
#include <numeric>

namespace gpn {

const Vector* PrototypeMemory::fetch(ClassId y) const {
  const auto it = entries_.find(y);
  return it == entries_.end() ? nullptr : &it->second.prototype;
}

PrototypeMap PrototypeMemory::prototypes() const {
  PrototypeMap out;
  for (const auto& [id, e] : entries_) out.emplace(id, e.prototype);
  return out;
}

void PrototypeMemory::put(ClassId y, Vector prototype, std::int64_t episode) {
  if (!prototype.allFinite()) throw NumericDomainError("memory: non-finite prototype");
  if (const auto it = entries_.find(y); it != entries_.end() && it->second.refreshed_at > episode) {
    throw StateError("memory: refresh stamps must not decrease");
  }
  entries_[y] = MemoryEntry{std::move(prototype), episode};
}

RefreshReport refresh(PrototypeMemory& memory, const Encoder& encoder, const ParameterStore& params,
                      const ClassPools& pools, std::span<const ClassId> classes,
                      std::int64_t episode, const RefreshOptions& options) {
  if (options.sample_cap == 0) throw ArgumentError("refresh: sample cap must be positive");
  RefreshReport report;
  std::map<ClassId, MemoryEntry> next = memory.entries();
  for (ClassId y : classes) {
    const auto it = pools.find(y);
    if (it == pools.end() || it->second.rows() == 0) {
      report.skipped_empty.push_back(y);
      continue;
    }
    const Matrix& pool = it->second;
    const auto n = static_cast<std::size_t>(pool.rows());
    Matrix batch;
    if (n <= options.sample_cap) {
      batch = pool;
    } else {
      Rng rng = derive_rng({options.seed, static_cast<std::uint64_t>(episode), static_cast<std::uint64_t>(y)});
      std::vector<Eigen::Index> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t i = 0; i < options.sample_cap; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
      }
      batch.resize(static_cast<Eigen::Index>(options.sample_cap), pool.cols());
      for (std::size_t i = 0; i < options.sample_cap; ++i) {
        batch.row(static_cast<Eigen::Index>(i)) = pool.row(idx[i]);
      }
    }
    const Matrix emb = encoder.embed(params, batch);
    Vector proto = emb.colwise().mean().transpose();
    if (!proto.allFinite()) throw NumericDomainError("refresh: non-finite prototype for class " + std::to_string(y));
    if (const auto prev = next.find(y); prev != next.end() && prev->second.refreshed_at > episode) {
      throw StateError("memory: refresh stamps must not decrease");
    }
    next[y] = MemoryEntry{std::move(proto), episode};
    report.refreshed.push_back(y);
  }
  memory.swap_entries(next);
  return report;
}

TensorContainer memory_to_container(const PrototypeMemory& memory) {
  TensorContainer c;
  TensorRecord stamps{"memory_stamps", {memory.size(), 2}, {}};
  for (const auto& [id, e] : memory.entries()) {
    c.records.push_back({"memory/" + std::to_string(id),
                         {static_cast<std::uint64_t>(e.prototype.size())},
                         std::vector<double>(e.prototype.data(), e.prototype.data() + e.prototype.size())});
    stamps.values.push_back(static_cast<double>(id));
    stamps.values.push_back(static_cast<double>(e.refreshed_at));
  }
  c.records.push_back(std::move(stamps));
  return c;
}

PrototypeMemory memory_from_container(const TensorContainer& c) {
  std::map<ClassId, MemoryEntry> entries;
  const TensorRecord* stamps = nullptr;
  for (const auto& r : c.records) {
    if (r.name == "memory_stamps") {
      stamps = &r;
      continue;
    }
    if (r.name.rfind("memory/", 0) != 0) throw ConfigError("memory snapshot: unexpected record " + r.name);
    const ClassId id = static_cast<ClassId>(std::stol(r.name.substr(7)));
    Vector v(static_cast<Eigen::Index>(r.values.size()));
    std::copy(r.values.begin(), r.values.end(), v.data());
    entries[id] = MemoryEntry{std::move(v), 0};
  }
  if (stamps != nullptr) {
    for (std::size_t i = 0; i + 1 < stamps->values.size(); i += 2) {
      const auto id = static_cast<ClassId>(stamps->values[i]);
      if (auto it = entries.find(id); it != entries.end()) {
        it->second.refreshed_at = static_cast<std::int64_t>(stamps->values[i + 1]);
      }
    }
  }
  PrototypeMemory m;
  m.swap_entries(entries);
  return m;
}

void save_memory(const std::string& path, const PrototypeMemory& memory) {
  write_container_file(path, memory_to_container(memory));
}

PrototypeMemory load_memory(const std::string& path) {
  return memory_from_container(read_container_file(path));
}

}  // namespace gpn
