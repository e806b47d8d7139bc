// SPDX-License-Identifier: Apache-2.0
#include <gpn/errors.hpp>
#include <gpn/params.hpp>

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace gpn {

std::size_t ParameterStore::add(std::string name, Matrix init, bool trainable) {
  if (find(name)) throw ArgumentError("ParameterStore: duplicate slot " + name);
  ParamSlot s;
  s.name = std::move(name);
  s.grad = Matrix::Zero(init.rows(), init.cols());
  s.first_moment = Matrix::Zero(init.rows(), init.cols());
  s.second_moment = Matrix::Zero(init.rows(), init.cols());
  s.value = std::move(init);
  s.trainable = trainable;
  slots_.push_back(std::move(s));
  return slots_.size() - 1;
}

std::optional<std::size_t> ParameterStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ParameterStore::index(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw ArgumentError("ParameterStore: no slot named " + std::string(name));
}

std::vector<std::size_t> ParameterStore::in_namespace(std::string_view prefix) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    const auto& n = slots_[i].name;
    if (n.size() > prefix.size() && n.compare(0, prefix.size(), prefix) == 0 &&
        n[prefix.size()] == '/') {
      out.push_back(i);
    }
  }
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& s : slots_) {
    s.grad.setZero();
    s.touched = false;
  }
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& s : slots_) n += static_cast<std::size_t>(s.value.size());
  return n;
}

void adam_step(ParameterStore& store, const AdamOptions& o) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    ParamSlot& s = store.slot(i);
    if (!s.trainable || !s.touched) continue;
    ++s.steps;
    const Matrix g = s.grad + o.weight_decay * s.value;
    s.first_moment = o.beta1 * s.first_moment + (1.0 - o.beta1) * g;
    s.second_moment = o.beta2 * s.second_moment + (1.0 - o.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(s.steps));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(s.steps));
    s.value.array() -= o.lr * (s.first_moment.array() / c1) /
                       ((s.second_moment.array() / c2).sqrt() + o.eps);
  }
}

namespace {

constexpr std::array<char, 8> kMagic = {'G', 'P', 'N', 'C', 'K', 'P', 'T', '\0'};

template <class T>
void put(std::ostream& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(v);
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

template <class T>
T get(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw ConfigError("container: unexpected end of file");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(bytes[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

void put_name(std::ostream& out, const std::string& name) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
}

std::string get_name(std::istream& in) {
  const auto len = get<std::uint32_t>(in);
  if (len > (1u << 20)) throw ConfigError("container: implausible name length");
  std::string name(len, '\0');
  in.read(name.data(), len);
  if (!in) throw ConfigError("container: truncated name");
  return name;
}

std::size_t element_count(const std::vector<std::uint64_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

std::vector<double> flatten(const Matrix& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

Matrix unflatten(const std::vector<std::uint64_t>& dims, const std::vector<double>& values) {
  Eigen::Index rows = 1;
  Eigen::Index cols = 1;
  if (dims.size() == 1) {
    rows = 1;
    cols = static_cast<Eigen::Index>(dims[0]);
  } else if (dims.size() == 2) {
    rows = static_cast<Eigen::Index>(dims[0]);
    cols = static_cast<Eigen::Index>(dims[1]);
  } else if (!dims.empty()) {
    throw ConfigError("container: rank > 2 is not supported for parameters");
  }
  Matrix m(rows, cols);
  std::memcpy(m.data(), values.data(), values.size() * sizeof(double));
  return m;
}

}  // namespace

void write_container(std::ostream& out, const TensorContainer& c) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.records.size()));
  for (const auto& r : c.records) {
    if (element_count(r.dims) != r.values.size()) {
      throw ArgumentError("container: record " + r.name + " dims do not match value count");
    }
    put_name(out, r.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.dims.size()));
    for (auto d : r.dims) put<std::uint64_t>(out, d);
    for (double v : r.values) put<double>(out, v);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.moments.size()));
  for (const auto& m : c.moments) {
    put_name(out, m.name);
    put<std::int64_t>(out, m.steps);
    for (double v : m.first) put<double>(out, v);
    for (double v : m.second) put<double>(out, v);
  }
}

TensorContainer read_container(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ConfigError("container: bad magic");
  if (get<std::uint32_t>(in) != kContainerVersion) throw ConfigError("container: unsupported version");
  TensorContainer c;
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorRecord r;
    r.name = get_name(in);
    const auto rank = get<std::uint32_t>(in);
    if (rank > 8) throw ConfigError("container: implausible rank");
    for (std::uint32_t k = 0; k < rank; ++k) r.dims.push_back(get<std::uint64_t>(in));
    const std::size_t n = element_count(r.dims);
    if (n > (std::size_t{1} << 32)) throw ConfigError("container: implausible tensor size");
    r.values.resize(n);
    for (auto& v : r.values) v = get<double>(in);
    c.records.push_back(std::move(r));
  }
  const auto moments = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < moments; ++i) {
    MomentRecord m;
    m.name = get_name(in);
    const TensorRecord* owner = nullptr;
    for (const auto& r : c.records) {
      if (r.name == m.name) owner = &r;
    }
    if (owner == nullptr) throw ConfigError("container: moments for unknown record " + m.name);
    m.steps = get<std::int64_t>(in);
    m.first.resize(owner->values.size());
    m.second.resize(owner->values.size());
    for (auto& v : m.first) v = get<double>(in);
    for (auto& v : m.second) v = get<double>(in);
    c.moments.push_back(std::move(m));
  }
  return c;
}

void write_container_file(const std::string& path, const TensorContainer& c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path);
  write_container(out, c);
  if (!out) throw ConfigError("write failed for " + path);
}

TensorContainer read_container_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  return read_container(in);
}

TensorContainer to_container(const ParameterStore& store, bool with_moments) {
  TensorContainer c;
  for (const auto& s : store.slots()) {
    c.records.push_back({s.name,
                         {static_cast<std::uint64_t>(s.value.rows()),
                          static_cast<std::uint64_t>(s.value.cols())},
                         flatten(s.value)});
    if (with_moments) {
      c.moments.push_back({s.name, s.steps, flatten(s.first_moment), flatten(s.second_moment)});
    }
  }
  return c;
}

ParameterStore store_from_container(const TensorContainer& c) {
  ParameterStore store;
  for (const auto& r : c.records) store.add(r.name, unflatten(r.dims, r.values));
  for (const auto& m : c.moments) {
    ParamSlot& s = store.slot(store.index(m.name));
    s.steps = m.steps;
    std::memcpy(s.first_moment.data(), m.first.data(), m.first.size() * sizeof(double));
    std::memcpy(s.second_moment.data(), m.second.data(), m.second.size() * sizeof(double));
  }
  return store;
}

void save_checkpoint(const std::string& path, const ParameterStore& store) {
  write_container_file(path, to_container(store, true));
}

ParameterStore load_checkpoint(const std::string& path) {
  return store_from_container(read_container_file(path));
}

}  // namespace gpn
