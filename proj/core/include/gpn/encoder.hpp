// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <gpn/autodiff.hpp>
#include <gpn/params.hpp>
#include <gpn/types.hpp>

#include <span>
#include <vector>

namespace gpn {

enum class Nonlinearity { kRelu };

struct EncoderConfig {
  int input_dim = 20;
  std::vector<int> hidden_dims = {64, 64};
  // Prototype dimension for the whole model.
  int embed_dim = 32;
  Nonlinearity nonlinearity = Nonlinearity::kRelu;

  void validate() const;
};

/// MLP feature encoder f(x). Parameters live in the "enc" namespace of a
/// ParameterStore as enc/W<i> (out x in) and enc/b<i> (1 x out).
class Encoder {
 public:
  /// Registers freshly initialized parameters (uniform +-1/sqrt(fan_in)).
  static Encoder create(const EncoderConfig& config, ParameterStore& store, Rng& rng);
  /// Binds to parameters already present in `store`.
  static Encoder bind(const EncoderConfig& config, const ParameterStore& store);

  const EncoderConfig& config() const { return config_; }
  std::size_t layer_count() const { return weights_.size(); }

  /// Rows of `x` are samples. Throws ArgumentError on wrong width or
  /// non-finite input.
  Var embed(Tape& tape, ParamView params, Var x) const;
  Matrix embed(const ParameterStore& store, const Matrix& x) const;
  Vector embed(const ParameterStore& store, const Vector& x) const;

 private:
  void check_input(const Matrix& x) const;

  EncoderConfig config_;
  std::vector<std::size_t> weights_;
  std::vector<std::size_t> biases_;
};

/// Linear classifier over embeddings used by the auxiliary supervised task.
/// Parameters: fc/W (classes x embed_dim), fc/b (1 x classes).
class AuxHead {
 public:
  static AuxHead create(int embed_dim, int num_classes, ParameterStore& store, Rng& rng);
  static AuxHead bind(const ParameterStore& store);

  int num_classes() const { return num_classes_; }
  Var logits(Tape& tape, ParamView params, Var embeddings) const;

 private:
  std::size_t weight_ = 0;
  std::size_t bias_ = 0;
  int num_classes_ = 0;
};

/// Mean cross-entropy of softmax(head(f(x))) over a batch; `labels` index the
/// head's classes.
Var aux_loss(Tape& tape, ParamView params, const Encoder& encoder, const AuxHead& head,
             const Matrix& batch, std::span<const int> labels);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) matrix of shape rows x fan_in.
Matrix fan_in_uniform(Eigen::Index rows, Eigen::Index fan_in, Rng& rng);

}  // namespace gpn
