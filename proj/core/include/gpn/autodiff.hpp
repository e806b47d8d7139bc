// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <gpn/types.hpp>

#include <functional>
#include <span>
#include <vector>

namespace gpn {

class ParameterStore;
class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double item() const;
  /// Gradient after backward(); zero-shaped if the node needs no gradient.
  const Matrix& grad() const;
  bool requires_grad() const;

  Tape& tape() const { return *tape_; }
  int index() const { return index_; }

 private:
  friend class Tape;
  Var(Tape* tape, int index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  int index_ = -1;
};

/// Records primitive operations in execution order and replays them in
/// reverse to accumulate gradients. One tape per episode; a tape can be
/// differentiated once.
class Tape {
 public:
  enum class Mode { kTrain, kInference };
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  explicit Tape(Mode mode = Mode::kTrain) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Mode mode() const { return mode_; }
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  Var constant(Matrix value);
  Var constant(double value);
  /// Differentiable leaf not bound to a parameter store.
  Var leaf(Matrix value);
  /// Differentiable view of a store slot; backward() adds into the slot's
  /// gradient buffer. In inference mode the slot enters as a constant.
  Var parameter(ParameterStore& store, std::size_t slot);
  /// Read-only slot access: always a constant.
  Var parameter(const ParameterStore& store, std::size_t slot);

  /// Appends a computed node. `inputs` decide whether it needs a gradient.
  Var record(Matrix value, std::span<const Var> inputs, Backward backward);

  /// Seeds d(loss)/d(loss) = 1 and runs the recorded ops in reverse.
  void backward(Var loss);

  /// Adds `g` into input node `index`'s gradient if that node tracks one.
  void accumulate(int index, const Matrix& g);

  const Matrix& value_of(int index) const { return nodes_[index].value; }
  const Matrix& grad_of(int index) const { return nodes_[index].grad; }
  bool requires_grad(int index) const { return nodes_[index].requires_grad; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
    ParameterStore* store = nullptr;
    std::size_t slot = 0;
  };

  Var push(Node node);

  Mode mode_;
  bool consumed_ = false;
  std::vector<Node> nodes_;
};

/// Non-owning parameter source: a mutable store yields trainable nodes, a
/// const store yields constants.
class ParamView {
 public:
  ParamView(ParameterStore& store) : mutable_(&store), store_(&store) {}  // NOLINT
  ParamView(const ParameterStore& store) : store_(&store) {}              // NOLINT

  Var get(Tape& tape, std::size_t slot) const;
  const ParameterStore& store() const { return *store_; }

 private:
  ParameterStore* mutable_ = nullptr;
  const ParameterStore* store_;
};

namespace ad {

// Affine map over rows: X (n x in), W (out x in), b (1 x out) or invalid for
// no bias. Returns X W^T + 1 b.
Var linear(Var w, Var b, Var x);
Var matmul(Var a, Var b);

// Elementwise on equal shapes; mul also accepts a 1x1 operand on either side.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(double c, Var a);

Var relu(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);

Var sum(Var a);
Var mean_rows(Var x);
Var row(Var x, Eigen::Index i);
Var gather_rows(Var x, std::span<const Eigen::Index> rows);
Var stack_rows(std::span<const Var> parts);
/// Concatenates 1x1 nodes into a 1 x n row.
Var concat_scalars(std::span<const Var> parts);
Var element(Var a, Eigen::Index r, Eigen::Index c);

Var dot(Var p, Var q);
/// Cosine similarity of two row vectors. Throws NumericDomainError when either
/// norm is zero.
Var cosine(Var p, Var q);
/// Row-wise softmax of `temperature * v`.
Var softmax(Var v, double temperature = 1.0);
Var sqdist(Var p, Var q);
/// D(i, j) = ||q_i - p_j||^2 for rows of Q (n x d) and P (c x d).
Var pairwise_sqdist(Var queries, Var prototypes);
/// Mean over rows of -log softmax(logits)[label].
Var cross_entropy(Var logits, std::span<const int> labels);

// Batched helpers used by prototype propagation.

/// c(i) = cos(a_i, b_i) for equal-shaped A, B; returns n x 1.
Var cosine_rowwise(Var a, Var b);
/// Horizontal concatenation of equal-height blocks.
Var concat_cols(Var a, Var b);
Var column(Var x, Eigen::Index j);
/// Row i of X scaled by s(i); s is n x 1.
Var scale_rows(Var s, Var x);
/// R x C matrix of zeros with values(k) placed at (rows[k], cols[k]).
/// Positions must be distinct.
Var scatter(Var values, std::span<const Eigen::Index> rows, std::span<const Eigen::Index> cols,
            Eigen::Index out_rows, Eigen::Index out_cols);
/// Copy of `base` with rows[k] replaced by row k of `values`.
Var replace_rows(Var base, std::span<const Eigen::Index> rows, Var values);
/// Softmax of `temperature * values` (m x 1) within each group of entries
/// sharing a segment id.
Var segment_softmax(Var values, std::span<const Eigen::Index> segments, double temperature = 1.0);

}  // namespace ad

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator*(double c, Var a);

}  // namespace gpn
