// SPDX-License-Identifier: Apache-2.0
// Central-difference gradient checking for tests.
#pragma once

#include <gpn/autodiff.hpp>
#include <gpn/params.hpp>

#include <algorithm>
#include <cmath>
#include <functional>

namespace gpn::testing {

// |a - n| / max(|a|, |n|, floor). The floor keeps entries that are zero up to
// rounding from dominating the ratio.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Entry with the largest error.
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  void record(double analytic, double numeric) {
    const double e = relative_error(analytic, numeric);
    if (e > max_rel_error) {
      max_rel_error = e;
      worst_analytic = analytic;
      worst_numeric = numeric;
    }
    ++checked;
  }
};

// `loss(store, tape)` must build the loss on `tape` reading parameters from
// `store`. Every entry of every trainable slot is perturbed by +-step.
inline GradCheckResult check_store_gradient(ParameterStore& store,
                                            const std::function<Var(ParameterStore&, Tape&)>& loss,
                                            double step = 1e-5) {
  store.zero_grad();
  {
    Tape tape;
    tape.backward(loss(store, tape));
  }
  std::vector<Matrix> analytic;
  for (const auto& s : store.slots()) {
    analytic.push_back(s.grad.size() ? s.grad : Matrix::Zero(s.value.rows(), s.value.cols()));
  }
  // Inference tapes read the store as constants.
  auto eval = [&] {
    Tape tape(Tape::Mode::kInference);
    return loss(store, tape).item();
  };
  GradCheckResult r;
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& slot = store.slot(i);
    if (!slot.trainable) continue;
    for (Eigen::Index k = 0; k < slot.value.size(); ++k) {
      double& theta = slot.value.data()[k];
      const double saved = theta;
      theta = saved + step;
      const double up = eval();
      theta = saved - step;
      const double down = eval();
      theta = saved;
      r.record(analytic[i].data()[k], (up - down) / (2.0 * step));
    }
  }
  return r;
}

// Same check for leaves created directly on the tape: `build(tape, leaves)`
// receives one differentiable leaf per entry of `inputs`.
inline GradCheckResult check_leaf_gradient(std::vector<Matrix> inputs,
                                           const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                                           double step = 1e-5) {
  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& m : inputs) leaves.push_back(tape.leaf(m));
    const Var out = build(tape, leaves);
    tape.backward(out);
    for (const auto& v : leaves) analytic.push_back(v.grad().size() ? v.grad() : Matrix::Zero(v.rows(), v.cols()));
  }
  auto eval = [&] {
    Tape tape(Tape::Mode::kInference);
    std::vector<Var> leaves;
    for (const auto& m : inputs) leaves.push_back(tape.constant(m));
    return build(tape, leaves).item();
  };
  GradCheckResult r;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (Eigen::Index k = 0; k < inputs[i].size(); ++k) {
      double& x = inputs[i].data()[k];
      const double saved = x;
      x = saved + step;
      const double up = eval();
      x = saved - step;
      const double down = eval();
      x = saved;
      r.record(analytic[i].data()[k], (up - down) / (2.0 * step));
    }
  }
  return r;
}

}  // namespace gpn::testing
