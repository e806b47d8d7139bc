// SPDX-License-Identifier: Apache-2.0
#include <gpn/encoder.hpp>
#include <gpn/errors.hpp>

#include <cmath>
#include <string>

namespace gpn {

void EncoderConfig::validate() const {
  if (input_dim < 1 || embed_dim < 1) throw ArgumentError("encoder: dims must be >= 1");
  for (int h : hidden_dims) {
    if (h < 1) throw ArgumentError("encoder: hidden dims must be >= 1");
  }
}

Matrix fan_in_uniform(Eigen::Index rows, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, fan_in);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Encoder Encoder::create(const EncoderConfig& config, ParameterStore& store, Rng& rng) {
  config.validate();
  Encoder e;
  e.config_ = config;
  std::vector<int> dims{config.input_dim};
  dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
  dims.push_back(config.embed_dim);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto i = std::to_string(l);
    e.weights_.push_back(store.add("enc/W" + i, fan_in_uniform(dims[l + 1], dims[l], rng)));
    e.biases_.push_back(store.add("enc/b" + i, Matrix::Zero(1, dims[l + 1])));
  }
  return e;
}

Encoder Encoder::bind(const EncoderConfig& config, const ParameterStore& store) {
  config.validate();
  Encoder e;
  e.config_ = config;
  const std::size_t layers = config.hidden_dims.size() + 1;
  int in = config.input_dim;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto i = std::to_string(l);
    const std::size_t w = store.index("enc/W" + i);
    const std::size_t b = store.index("enc/b" + i);
    const int out = l + 1 < layers ? config.hidden_dims[l] : config.embed_dim;
    const Matrix& wv = store.slot(w).value;
    if (wv.rows() != out || wv.cols() != in || store.slot(b).value.cols() != out) {
      throw ConfigError("encoder: checkpoint layer " + i + " has unexpected shape");
    }
    e.weights_.push_back(w);
    e.biases_.push_back(b);
    in = out;
  }
  return e;
}

void Encoder::check_input(const Matrix& x) const {
  if (x.cols() != config_.input_dim) {
    throw ArgumentError("encoder: expected " + std::to_string(config_.input_dim) +
                        " features, got " + std::to_string(x.cols()));
  }
  if (!x.allFinite()) throw ArgumentError("encoder: non-finite input");
}

Var Encoder::embed(Tape& tape, ParamView params, Var x) const {
  check_input(x.value());
  Var h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = ad::linear(params.get(tape, weights_[l]), params.get(tape, biases_[l]), h);
    if (l + 1 < weights_.size()) h = ad::relu(h);
  }
  return h;
}

Matrix Encoder::embed(const ParameterStore& store, const Matrix& x) const {
  check_input(x);
  Matrix h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix next = h * store.slot(weights_[l]).value.transpose();
    next.rowwise() += store.slot(biases_[l]).value.row(0);
    if (l + 1 < weights_.size()) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

Vector Encoder::embed(const ParameterStore& store, const Vector& x) const {
  const Matrix row = x.transpose();
  return embed(store, row).row(0).transpose();
}

AuxHead AuxHead::create(int embed_dim, int num_classes, ParameterStore& store, Rng& rng) {
  if (num_classes < 1) throw ArgumentError("aux head: need at least one class");
  AuxHead h;
  h.num_classes_ = num_classes;
  h.weight_ = store.add("fc/W", fan_in_uniform(num_classes, embed_dim, rng));
  h.bias_ = store.add("fc/b", Matrix::Zero(1, num_classes));
  return h;
}

AuxHead AuxHead::bind(const ParameterStore& store) {
  AuxHead h;
  h.weight_ = store.index("fc/W");
  h.bias_ = store.index("fc/b");
  h.num_classes_ = static_cast<int>(store.slot(h.weight_).value.rows());
  return h;
}

Var AuxHead::logits(Tape& tape, ParamView params, Var embeddings) const {
  return ad::linear(params.get(tape, weight_), params.get(tape, bias_), embeddings);
}

Var aux_loss(Tape& tape, ParamView params, const Encoder& encoder, const AuxHead& head,
             const Matrix& batch, std::span<const int> labels) {
  if (batch.rows() == 0) throw ArgumentError("aux_loss: empty batch");
  for (int y : labels) {
    if (y < 0 || y >= head.num_classes()) throw ArgumentError("aux_loss: label out of range");
  }
  const Var x = tape.constant(batch);
  return ad::cross_entropy(head.logits(tape, params, encoder.embed(tape, params, x)), labels);
}

}  // namespace gpn
