// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <gpn/types.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gpn {

struct ParamSlot {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;
  // Set when a backward pass reached this slot since the last zero_grad().
  bool touched = false;
  // Adam state.
  Matrix first_moment;
  Matrix second_moment;
  std::int64_t steps = 0;
};

/// Named trainable tensors with paired gradient buffers. Names are
/// slash-separated; the first component is the namespace ("enc", "prop", "fc").
class ParameterStore {
 public:
  std::size_t add(std::string name, Matrix init, bool trainable = true);

  std::size_t index(std::string_view name) const;
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t size() const { return slots_.size(); }

  ParamSlot& slot(std::size_t i) { return slots_.at(i); }
  const ParamSlot& slot(std::size_t i) const { return slots_.at(i); }
  const std::vector<ParamSlot>& slots() const { return slots_; }

  /// Slots whose name starts with `prefix` + "/".
  std::vector<std::size_t> in_namespace(std::string_view prefix) const;

  void zero_grad();
  std::size_t parameter_count() const;

 private:
  std::vector<ParamSlot> slots_;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Classic L2: weight_decay * theta is added to the gradient before the
  // moment updates.
  double weight_decay = 1e-5;
};

/// One Adam update over every trainable slot a backward pass touched.
/// Untouched slots keep their values and moments.
void adam_step(ParameterStore& store, const AdamOptions& options);

// Binary container shared by parameter checkpoints and memory snapshots.
// Layout (little-endian):
//   "GPNCKPT\0" | u32 version | u32 record count
//   per record: u32 name length | name | u32 rank | u64 dims[rank] | f64 values
//   u32 moment count
//   per moment: u32 name length | name | i64 steps | f64 first[] | f64 second[]
// Moment arrays have the element count of the record with the same name.
struct TensorRecord {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<double> values;
};

struct MomentRecord {
  std::string name;
  std::int64_t steps = 0;
  std::vector<double> first;
  std::vector<double> second;
};

struct TensorContainer {
  std::vector<TensorRecord> records;
  std::vector<MomentRecord> moments;
};

inline constexpr std::uint32_t kContainerVersion = 1;

void write_container(std::ostream& out, const TensorContainer& c);
TensorContainer read_container(std::istream& in);
void write_container_file(const std::string& path, const TensorContainer& c);
TensorContainer read_container_file(const std::string& path);

TensorContainer to_container(const ParameterStore& store, bool with_moments = true);
/// Rebuilds a store from a container; slots keep the container's order.
ParameterStore store_from_container(const TensorContainer& c);

void save_checkpoint(const std::string& path, const ParameterStore& store);
ParameterStore load_checkpoint(const std::string& path);

}  // namespace gpn
