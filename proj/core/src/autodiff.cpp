// SPDX-License-Identifier: Apache-2.0
#include <gpn/autodiff.hpp>
#include <gpn/errors.hpp>
#include <gpn/params.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace gpn {

const Matrix& Var::value() const { return tape_->value_of(index_); }
const Matrix& Var::grad() const { return tape_->grad_of(index_); }
bool Var::requires_grad() const { return tape_->requires_grad(index_); }

double Var::item() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ArgumentError("Var::item: node is " + std::to_string(v.rows()) + "x" +
                        std::to_string(v.cols()) + ", expected 1x1");
  }
  return v(0, 0);
}

Var Tape::push(Node node) {
  if (consumed_) throw StateError("Tape: cannot record on a tape that ran backward");
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

Var Tape::leaf(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = mode_ == Mode::kTrain;
  return push(std::move(n));
}

Var Tape::parameter(ParameterStore& store, std::size_t slot) {
  const ParamSlot& s = store.slot(slot);
  Node n;
  n.value = s.value;
  if (mode_ == Mode::kTrain && s.trainable) {
    n.requires_grad = true;
    n.store = &store;
    n.slot = slot;
  }
  return push(std::move(n));
}

Var Tape::parameter(const ParameterStore& store, std::size_t slot) {
  return constant(store.slot(slot).value);
}

Var ParamView::get(Tape& tape, std::size_t slot) const {
  return mutable_ != nullptr ? tape.parameter(*mutable_, slot) : tape.parameter(*store_, slot);
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  if (mode_ == Mode::kTrain) {
    for (const Var& in : inputs) {
      if (in.tape_ != this) throw ArgumentError("Tape: input belongs to another tape");
      if (nodes_[in.index_].requires_grad) n.requires_grad = true;
    }
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::accumulate(int index, const Matrix& g) {
  Node& n = nodes_[index];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss) {
  if (consumed_) throw StateError("Tape::backward: tape already consumed");
  if (loss.tape_ != this) throw ArgumentError("Tape::backward: loss belongs to another tape");
  const Matrix& lv = nodes_[loss.index_].value;
  if (lv.rows() != 1 || lv.cols() != 1) throw ArgumentError("Tape::backward: loss must be 1x1");
  consumed_ = true;
  if (!nodes_[loss.index_].requires_grad) return;
  nodes_[loss.index_].grad = Matrix::Ones(1, 1);
  for (int i = loss.index_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.store != nullptr) {
      ParamSlot& s = n.store->slot(n.slot);
      s.grad += n.grad;
      s.touched = true;
    }
  }
}

namespace ad {
namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
  }
}

void require_row(const Var& a, const char* op) {
  if (a.rows() != 1) throw ArgumentError(std::string(op) + ": expected a row vector");
}

bool is_scalar(const Var& a) { return a.rows() == 1 && a.cols() == 1; }

}  // namespace

Var linear(Var w, Var b, Var x) {
  if (x.cols() != w.cols()) throw ArgumentError("linear: input width does not match weight columns");
  if (b.valid() && (b.rows() != 1 || b.cols() != w.rows())) {
    throw ArgumentError("linear: bias must be 1 x out");
  }
  Matrix out = x.value() * w.value().transpose();
  if (b.valid()) out.rowwise() += b.value().row(0);
  Tape& t = x.tape();
  const int wi = w.index();
  const int xi = x.index();
  const int bi = b.valid() ? b.index() : -1;
  std::vector<Var> inputs{w, x};
  if (b.valid()) inputs.push_back(b);
  return t.record(std::move(out), inputs, [wi, xi, bi](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(xi)) tp.accumulate(xi, g * tp.value_of(wi));
    if (tp.requires_grad(wi)) tp.accumulate(wi, g.transpose() * tp.value_of(xi));
    if (bi >= 0 && tp.requires_grad(bi)) tp.accumulate(bi, g.colwise().sum());
  });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw ArgumentError("matmul: inner dimensions differ");
  const int ai = a.index();
  const int bi = b.index();
  const Var inputs[] = {a, b};
  return a.tape().record(a.value() * b.value(), inputs, [ai, bi](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(ai)) tp.accumulate(ai, g * tp.value_of(bi).transpose());
    if (tp.requires_grad(bi)) tp.accumulate(bi, tp.value_of(ai).transpose() * g);
  });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  const int ai = a.index();
  const int bi = b.index();
  const Var inputs[] = {a, b};
  return a.tape().record(a.value() + b.value(), inputs, [ai, bi](Tape& tp, const Matrix& g) {
    tp.accumulate(ai, g);
    tp.accumulate(bi, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  const int ai = a.index();
  const int bi = b.index();
  const Var inputs[] = {a, b};
  return a.tape().record(a.value() - b.value(), inputs, [ai, bi](Tape& tp, const Matrix& g) {
    tp.accumulate(ai, g);
    tp.accumulate(bi, -g);
  });
}

Var mul(Var a, Var b) {
  const int ai = a.index();
  const int bi = b.index();
  const Var inputs[] = {a, b};
  if (is_scalar(a) && !is_scalar(b)) std::swap(a, b);
  if (is_scalar(b) && !is_scalar(a)) {
    // tensor a times scalar b
    const int ti = a.index();
    const int si = b.index();
    return a.tape().record(a.value() * b.item(), inputs, [ti, si](Tape& tp, const Matrix& g) {
      if (tp.requires_grad(ti)) tp.accumulate(ti, g * tp.value_of(si)(0, 0));
      if (tp.requires_grad(si)) {
        Matrix gs(1, 1);
        gs(0, 0) = g.cwiseProduct(tp.value_of(ti)).sum();
        tp.accumulate(si, gs);
      }
    });
  }
  require_same_shape(a, b, "mul");
  return a.tape().record(a.value().cwiseProduct(b.value()), inputs,
                         [ai, bi](Tape& tp, const Matrix& g) {
                           if (tp.requires_grad(ai)) tp.accumulate(ai, g.cwiseProduct(tp.value_of(bi)));
                           if (tp.requires_grad(bi)) tp.accumulate(bi, g.cwiseProduct(tp.value_of(ai)));
                         });
}

Var scale(double c, Var a) {
  const int ai = a.index();
  const Var inputs[] = {a};
  return a.tape().record(c * a.value(), inputs,
                         [ai, c](Tape& tp, const Matrix& g) { tp.accumulate(ai, c * g); });
}

Var relu(Var a) {
  const int ai = a.index();
  const Var inputs[] = {a};
  return a.tape().record(a.value().cwiseMax(0.0), inputs, [ai](Tape& tp, const Matrix& g) {
    const Matrix& x = tp.value_of(ai);
    tp.accumulate(ai, (x.array() > 0.0).select(g, 0.0).matrix());
  });
}

Var tanh(Var a) {
  Matrix y = a.value().array().tanh().matrix();
  const int ai = a.index();
  const Var inputs[] = {a};
  return a.tape().record(std::move(y), inputs, [ai](Tape& tp, const Matrix& g) {
    const Matrix th = tp.value_of(ai).array().tanh().matrix();
    tp.accumulate(ai, g.cwiseProduct((1.0 - th.array().square()).matrix()));
  });
}

Var exp(Var a) {
  const int ai = a.index();
  const Var inputs[] = {a};
  return a.tape().record(a.value().array().exp().matrix(), inputs, [ai](Tape& tp, const Matrix& g) {
    tp.accumulate(ai, g.cwiseProduct(tp.value_of(ai).array().exp().matrix()));
  });
}

Var log(Var a) {
  if ((a.value().array() <= 0.0).any()) throw NumericDomainError("log: non-positive input");
  const int ai = a.index();
  const Var inputs[] = {a};
  return a.tape().record(a.value().array().log().matrix(), inputs, [ai](Tape& tp, const Matrix& g) {
    tp.accumulate(ai, g.cwiseQuotient(tp.value_of(ai)));
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const int ai = a.index();
  const Eigen::Index r = a.rows();
  const Eigen::Index c = a.cols();
  const Var inputs[] = {a};
  return a.tape().record(std::move(out), inputs, [ai, r, c](Tape& tp, const Matrix& g) {
    tp.accumulate(ai, Matrix::Constant(r, c, g(0, 0)));
  });
}

Var mean_rows(Var x) {
  if (x.rows() == 0) throw ArgumentError("mean_rows: no rows");
  const Eigen::Index n = x.rows();
  Matrix out = x.value().colwise().sum() / static_cast<double>(n);
  const int xi = x.index();
  const Var inputs[] = {x};
  return x.tape().record(std::move(out), inputs, [xi, n](Tape& tp, const Matrix& g) {
    tp.accumulate(xi, g.replicate(n, 1) / static_cast<double>(n));
  });
}

Var row(Var x, Eigen::Index i) {
  if (i < 0 || i >= x.rows()) throw ArgumentError("row: index out of range");
  const int xi = x.index();
  const Eigen::Index r = x.rows();
  const Var inputs[] = {x};
  return x.tape().record(x.value().row(i), inputs, [xi, i, r](Tape& tp, const Matrix& g) {
    Matrix full = Matrix::Zero(r, g.cols());
    full.row(i) = g.row(0);
    tp.accumulate(xi, full);
  });
}

Var gather_rows(Var x, std::span<const Eigen::Index> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= x.rows()) throw ArgumentError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(k)) = x.value().row(rows[k]);
  }
  const int xi = x.index();
  const Eigen::Index r = x.rows();
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  const Var inputs[] = {x};
  return x.tape().record(std::move(out), inputs, [xi, r, idx](Tape& tp, const Matrix& g) {
    Matrix full = Matrix::Zero(r, g.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) full.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
    tp.accumulate(xi, full);
  });
}

Var stack_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("stack_rows: nothing to stack");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index total = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ArgumentError("stack_rows: column counts differ");
    total += p.rows();
  }
  Matrix out(total, cols);
  std::vector<int> idx;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    idx.push_back(p.index());
    offsets.push_back(at);
    at += p.rows();
  }
  return parts[0].tape().record(std::move(out), parts, [idx, offsets](Tape& tp, const Matrix& g) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (!tp.requires_grad(idx[k])) continue;
      const Eigen::Index n = tp.value_of(idx[k]).rows();
      tp.accumulate(idx[k], g.middleRows(offsets[k], n));
    }
  });
}

Var concat_scalars(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat_scalars: nothing to concatenate");
  Matrix out(1, static_cast<Eigen::Index>(parts.size()));
  std::vector<int> idx;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (!is_scalar(parts[k])) throw ArgumentError("concat_scalars: expected 1x1 parts");
    out(0, static_cast<Eigen::Index>(k)) = parts[k].item();
    idx.push_back(parts[k].index());
  }
  return parts[0].tape().record(std::move(out), parts, [idx](Tape& tp, const Matrix& g) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Matrix gk(1, 1);
      gk(0, 0) = g(0, static_cast<Eigen::Index>(k));
      tp.accumulate(idx[k], gk);
    }
  });
}

Var element(Var a, Eigen::Index r, Eigen::Index c) {
  if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols()) throw ArgumentError("element: out of range");
  Matrix out(1, 1);
  out(0, 0) = a.value()(r, c);
  const int ai = a.index();
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  const Var inputs[] = {a};
  return a.tape().record(std::move(out), inputs, [ai, r, c, rows, cols](Tape& tp, const Matrix& g) {
    Matrix full = Matrix::Zero(rows, cols);
    full(r, c) = g(0, 0);
    tp.accumulate(ai, full);
  });
}

Var dot(Var p, Var q) {
  require_row(p, "dot");
  require_same_shape(p, q, "dot");
  Matrix out(1, 1);
  out(0, 0) = p.value().row(0).dot(q.value().row(0));
  const int pi = p.index();
  const int qi = q.index();
  const Var inputs[] = {p, q};
  return p.tape().record(std::move(out), inputs, [pi, qi](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(pi)) tp.accumulate(pi, g(0, 0) * tp.value_of(qi));
    if (tp.requires_grad(qi)) tp.accumulate(qi, g(0, 0) * tp.value_of(pi));
  });
}

Var cosine(Var p, Var q) {
  require_row(p, "cosine");
  require_same_shape(p, q, "cosine");
  const double np = p.value().norm();
  const double nq = q.value().norm();
  if (!(np > 0.0) || !(nq > 0.0)) throw NumericDomainError("cosine: zero-norm input");
  const double c = p.value().row(0).dot(q.value().row(0)) / (np * nq);
  Matrix out(1, 1);
  out(0, 0) = c;
  const int pi = p.index();
  const int qi = q.index();
  const Var inputs[] = {p, q};
  return p.tape().record(std::move(out), inputs, [pi, qi, np, nq, c](Tape& tp, const Matrix& g) {
    const Matrix& pv = tp.value_of(pi);
    const Matrix& qv = tp.value_of(qi);
    const double s = g(0, 0);
    if (tp.requires_grad(pi)) tp.accumulate(pi, s * (qv / (np * nq) - c * pv / (np * np)));
    if (tp.requires_grad(qi)) tp.accumulate(qi, s * (pv / (np * nq) - c * qv / (nq * nq)));
  });
}

Var softmax(Var v, double temperature) {
  Matrix z = temperature * v.value();
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    z.row(r) = (z.row(r).array() - m).exp().matrix();
    z.row(r) /= z.row(r).sum();
  }
  const int vi = v.index();
  Matrix s = z;
  const Var inputs[] = {v};
  return v.tape().record(std::move(z), inputs, [vi, s, temperature](Tape& tp, const Matrix& g) {
    Matrix dv(s.rows(), s.cols());
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      const double inner = g.row(r).dot(s.row(r));
      dv.row(r) = temperature * s.row(r).cwiseProduct((g.row(r).array() - inner).matrix());
    }
    tp.accumulate(vi, dv);
  });
}

Var sqdist(Var p, Var q) {
  require_row(p, "sqdist");
  require_same_shape(p, q, "sqdist");
  return pairwise_sqdist(p, q);
}

Var pairwise_sqdist(Var queries, Var prototypes) {
  if (queries.cols() != prototypes.cols()) throw ArgumentError("pairwise_sqdist: dims differ");
  const Matrix& q = queries.value();
  const Matrix& p = prototypes.value();
  Matrix d(q.rows(), p.rows());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.rows(); ++j) d(i, j) = (q.row(i) - p.row(j)).squaredNorm();
  }
  const int qi = queries.index();
  const int pi = prototypes.index();
  const Var inputs[] = {queries, prototypes};
  return queries.tape().record(std::move(d), inputs, [qi, pi](Tape& tp, const Matrix& g) {
    const Matrix& qv = tp.value_of(qi);
    const Matrix& pv = tp.value_of(pi);
    if (tp.requires_grad(qi)) {
      Matrix dq = 2.0 * (g.rowwise().sum().asDiagonal() * qv - g * pv);
      tp.accumulate(qi, dq);
    }
    if (tp.requires_grad(pi)) {
      Matrix dp = 2.0 * (g.colwise().sum().transpose().asDiagonal() * pv - g.transpose() * qv);
      tp.accumulate(pi, dp);
    }
  });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Eigen::Index n = logits.rows();
  const Eigen::Index c = logits.cols();
  if (n == 0) throw ArgumentError("cross_entropy: empty batch");
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw ArgumentError("cross_entropy: label count does not match rows");
  }
  Matrix probs(n, c);
  double total = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= c) throw ArgumentError("cross_entropy: label out of range");
    const double m = logits.value().row(r).maxCoeff();
    const auto shifted = (logits.value().row(r).array() - m).eval();
    const double lse = std::log(shifted.exp().sum());
    total += lse - shifted(y);
    probs.row(r) = (shifted - lse).exp().matrix();
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(n);
  const int li = logits.index();
  std::vector<int> ys(labels.begin(), labels.end());
  const Var inputs[] = {logits};
  return logits.tape().record(std::move(out), inputs, [li, probs, ys, n](Tape& tp, const Matrix& g) {
    Matrix d = probs;
    for (Eigen::Index r = 0; r < n; ++r) d(r, ys[static_cast<std::size_t>(r)]) -= 1.0;
    tp.accumulate(li, d * (g(0, 0) / static_cast<double>(n)));
  });
}

Var cosine_rowwise(Var a, Var b) {
  require_same_shape(a, b, "cosine_rowwise");
  const Eigen::Index n = a.rows();
  Vector na = a.value().rowwise().norm();
  Vector nb = b.value().rowwise().norm();
  if (!(na.array() > 0.0).all() || !(nb.array() > 0.0).all()) {
    throw NumericDomainError("cosine_rowwise: zero-norm row");
  }
  Matrix c(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) c(i, 0) = a.value().row(i).dot(b.value().row(i)) / (na(i) * nb(i));
  const int ai = a.index();
  const int bi = b.index();
  const Var inputs[] = {a, b};
  Matrix cv = c;
  return a.tape().record(std::move(c), inputs, [ai, bi, na, nb, cv](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value_of(ai);
    const Matrix& bv = tp.value_of(bi);
    const Eigen::Index n = av.rows();
    if (tp.requires_grad(ai)) {
      Matrix da(n, av.cols());
      for (Eigen::Index i = 0; i < n; ++i) {
        da.row(i) = g(i, 0) * (bv.row(i) / (na(i) * nb(i)) - cv(i, 0) * av.row(i) / (na(i) * na(i)));
      }
      tp.accumulate(ai, da);
    }
    if (tp.requires_grad(bi)) {
      Matrix db(n, bv.cols());
      for (Eigen::Index i = 0; i < n; ++i) {
        db.row(i) = g(i, 0) * (av.row(i) / (na(i) * nb(i)) - cv(i, 0) * bv.row(i) / (nb(i) * nb(i)));
      }
      tp.accumulate(bi, db);
    }
  });
}

Var concat_cols(Var a, Var b) {
  if (a.rows() != b.rows()) throw ArgumentError("concat_cols: row counts differ");
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a.value();
  out.rightCols(b.cols()) = b.value();
  const int ai = a.index();
  const int bi = b.index();
  const Eigen::Index ac = a.cols();
  const Eigen::Index bc = b.cols();
  const Var inputs[] = {a, b};
  return a.tape().record(std::move(out), inputs, [ai, bi, ac, bc](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(ai)) tp.accumulate(ai, g.leftCols(ac));
    if (tp.requires_grad(bi)) tp.accumulate(bi, g.rightCols(bc));
  });
}

Var column(Var x, Eigen::Index j) {
  if (j < 0 || j >= x.cols()) throw ArgumentError("column: index out of range");
  const int xi = x.index();
  const Eigen::Index cols = x.cols();
  const Var inputs[] = {x};
  return x.tape().record(x.value().col(j), inputs, [xi, j, cols](Tape& tp, const Matrix& g) {
    Matrix full = Matrix::Zero(g.rows(), cols);
    full.col(j) = g.col(0);
    tp.accumulate(xi, full);
  });
}

Var scale_rows(Var s, Var x) {
  if (s.cols() != 1 || s.rows() != x.rows()) throw ArgumentError("scale_rows: expected n x 1 scales");
  Matrix out = s.value().col(0).asDiagonal() * x.value();
  const int si = s.index();
  const int xi = x.index();
  const Var inputs[] = {s, x};
  return x.tape().record(std::move(out), inputs, [si, xi](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(xi)) tp.accumulate(xi, tp.value_of(si).col(0).asDiagonal() * g);
    if (tp.requires_grad(si)) tp.accumulate(si, g.cwiseProduct(tp.value_of(xi)).rowwise().sum());
  });
}

Var scatter(Var values, std::span<const Eigen::Index> rows, std::span<const Eigen::Index> cols,
            Eigen::Index out_rows, Eigen::Index out_cols) {
  if (values.cols() != 1 || values.rows() != static_cast<Eigen::Index>(rows.size()) ||
      rows.size() != cols.size()) {
    throw ArgumentError("scatter: expected one m x 1 value per position");
  }
  Matrix out = Matrix::Zero(out_rows, out_cols);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= out_rows || cols[k] < 0 || cols[k] >= out_cols) {
      throw ArgumentError("scatter: position out of range");
    }
    out(rows[k], cols[k]) = values.value()(static_cast<Eigen::Index>(k), 0);
  }
  const int vi = values.index();
  std::vector<Eigen::Index> r(rows.begin(), rows.end());
  std::vector<Eigen::Index> c(cols.begin(), cols.end());
  const Var inputs[] = {values};
  return values.tape().record(std::move(out), inputs, [vi, r, c](Tape& tp, const Matrix& g) {
    Matrix dv(static_cast<Eigen::Index>(r.size()), 1);
    for (std::size_t k = 0; k < r.size(); ++k) dv(static_cast<Eigen::Index>(k), 0) = g(r[k], c[k]);
    tp.accumulate(vi, dv);
  });
}

Var replace_rows(Var base, std::span<const Eigen::Index> rows, Var values) {
  if (values.rows() != static_cast<Eigen::Index>(rows.size()) || values.cols() != base.cols()) {
    throw ArgumentError("replace_rows: values shape does not match row list");
  }
  Matrix out = base.value();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= base.rows()) throw ArgumentError("replace_rows: row out of range");
    out.row(rows[k]) = values.value().row(static_cast<Eigen::Index>(k));
  }
  const int bi = base.index();
  const int vi = values.index();
  std::vector<Eigen::Index> r(rows.begin(), rows.end());
  const Var inputs[] = {base, values};
  return base.tape().record(std::move(out), inputs, [bi, vi, r](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(bi)) {
      Matrix gb = g;
      for (Eigen::Index row : r) gb.row(row).setZero();
      tp.accumulate(bi, gb);
    }
    if (tp.requires_grad(vi)) {
      Matrix gv(static_cast<Eigen::Index>(r.size()), g.cols());
      for (std::size_t k = 0; k < r.size(); ++k) gv.row(static_cast<Eigen::Index>(k)) = g.row(r[k]);
      tp.accumulate(vi, gv);
    }
  });
}

Var segment_softmax(Var values, std::span<const Eigen::Index> segments, double temperature) {
  if (values.cols() != 1 || values.rows() != static_cast<Eigen::Index>(segments.size())) {
    throw ArgumentError("segment_softmax: expected one segment id per value");
  }
  const Eigen::Index m = values.rows();
  std::map<Eigen::Index, std::vector<Eigen::Index>> groups;
  for (Eigen::Index k = 0; k < m; ++k) groups[segments[static_cast<std::size_t>(k)]].push_back(k);
  Matrix out(m, 1);
  for (const auto& [seg, members] : groups) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k : members) mx = std::max(mx, temperature * values.value()(k, 0));
    double total = 0.0;
    for (Eigen::Index k : members) {
      out(k, 0) = std::exp(temperature * values.value()(k, 0) - mx);
      total += out(k, 0);
    }
    for (Eigen::Index k : members) out(k, 0) /= total;
  }
  const int vi = values.index();
  Matrix s = out;
  const Var inputs[] = {values};
  return values.tape().record(std::move(out), inputs, [vi, s, groups, temperature](Tape& tp, const Matrix& g) {
    Matrix dv(s.rows(), 1);
    for (const auto& [seg, members] : groups) {
      double inner = 0.0;
      for (Eigen::Index k : members) inner += g(k, 0) * s(k, 0);
      for (Eigen::Index k : members) dv(k, 0) = temperature * s(k, 0) * (g(k, 0) - inner);
    }
    tp.accumulate(vi, dv);
  });
}

}  // namespace ad

Var operator+(Var a, Var b) { return ad::add(a, b); }
Var operator-(Var a, Var b) { return ad::sub(a, b); }
Var operator*(Var a, Var b) { return ad::mul(a, b); }
Var operator*(double c, Var a) { return ad::scale(c, a); }

}  // namespace gpn
