// SPDX-License-Identifier: Apache-2.0
#include <gpn/encoder.hpp>
#include <gpn/errors.hpp>
#include <gpn/propagation.hpp>

#include <algorithm>
#include <numeric>

namespace gpn {

std::string to_string(PropagationVariant v) {
  switch (v) {
    case PropagationVariant::kNeighbors: return "N->C";
    case PropagationVariant::kParents: return "F->C";
    case PropagationVariant::kChildren: return "C->C";
    case PropagationVariant::kForwardBackward: return "B->P";
    case PropagationVariant::kAlternating: return "M->P";
  }
  return "?";
}

std::string to_string(AttentionKind a) {
  return a == AttentionKind::kMultiplicative ? "multiplicative" : "additive";
}

PropagationVariant parse_variant(std::string_view text) {
  if (text == "N->C" || text == "N→C" || text == "neighbors") return PropagationVariant::kNeighbors;
  if (text == "F->C" || text == "F→C" || text == "parents") return PropagationVariant::kParents;
  if (text == "C->C" || text == "C→C" || text == "children") return PropagationVariant::kChildren;
  if (text == "B->P" || text == "B→P" || text == "forward-backward") return PropagationVariant::kForwardBackward;
  if (text == "M->P" || text == "M→P" || text == "alternating") return PropagationVariant::kAlternating;
  throw ConfigError("unknown propagation variant '" + std::string(text) + "'");
}

AttentionKind parse_attention(std::string_view text) {
  if (text == "multiplicative" || text == "M-A") return AttentionKind::kMultiplicative;
  if (text == "additive" || text == "A-A") return AttentionKind::kAdditive;
  throw ConfigError("unknown attention kind '" + std::string(text) + "'");
}

void PropagationConfig::validate() const {
  if (t_steps < 0) throw ArgumentError("propagation: t_steps must be >= 0");
  if (heads < 1) throw ArgumentError("propagation: heads must be >= 1");
  if (!(gamma >= 0.0)) throw ArgumentError("propagation: gamma must be >= 0");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ArgumentError("propagation: lambda must be in [0, 1]");
}

std::vector<SenderRule> PropagationConfig::schedule() const {
  std::vector<SenderRule> out;
  for (int t = 0; t < t_steps; ++t) {
    switch (variant) {
      case PropagationVariant::kNeighbors: out.push_back(SenderRule::kAll); break;
      case PropagationVariant::kParents: out.push_back(SenderRule::kParents); break;
      case PropagationVariant::kChildren: out.push_back(SenderRule::kChildren); break;
      case PropagationVariant::kForwardBackward: out.push_back(SenderRule::kParents); break;
      case PropagationVariant::kAlternating:
        out.push_back(SenderRule::kParents);
        out.push_back(SenderRule::kChildren);
        break;
    }
  }
  if (variant == PropagationVariant::kForwardBackward) {
    for (int t = 0; t < t_steps; ++t) out.push_back(SenderRule::kChildren);
  }
  return out;
}

namespace {

Matrix near_identity(int dim, Rng& rng) {
  return Matrix::Identity(dim, dim) + 0.1 * fan_in_uniform(dim, dim, rng);
}

}  // namespace

PropagationModel PropagationModel::create(const PropagationConfig& config, int embed_dim,
                                          ParameterStore& store, Rng& rng) {
  config.validate();
  PropagationModel m;
  m.config_ = config;
  m.embed_dim_ = embed_dim;
  for (int k = 0; k < config.heads; ++k) {
    const std::string p = "prop/head" + std::to_string(k) + "/";
    HeadParams h;
    if (config.attention == AttentionKind::kMultiplicative) {
      h.w1 = store.add(p + "h1/W", near_identity(embed_dim, rng));
      h.b1 = store.add(p + "h1/b", Matrix::Zero(1, embed_dim));
      h.w2 = store.add(p + "h2/W", near_identity(embed_dim, rng));
      h.b2 = store.add(p + "h2/b", Matrix::Zero(1, embed_dim));
    } else {
      h.w1 = store.add(p + "add/W1", fan_in_uniform(embed_dim, embed_dim, rng));
      h.b1 = store.add(p + "add/b", Matrix::Zero(1, embed_dim));
      h.w2 = store.add(p + "add/W2", fan_in_uniform(embed_dim, embed_dim, rng));
      h.v = store.add(p + "add/v", fan_in_uniform(1, embed_dim, rng));
    }
    m.heads_.push_back(h);
  }
  return m;
}

PropagationModel PropagationModel::bind(const PropagationConfig& config, int embed_dim,
                                        const ParameterStore& store) {
  config.validate();
  PropagationModel m;
  m.config_ = config;
  m.embed_dim_ = embed_dim;
  for (int k = 0; k < config.heads; ++k) {
    const std::string p = "prop/head" + std::to_string(k) + "/";
    HeadParams h;
    if (config.attention == AttentionKind::kMultiplicative) {
      h.w1 = store.index(p + "h1/W");
      h.b1 = store.index(p + "h1/b");
      h.w2 = store.index(p + "h2/W");
      h.b2 = store.index(p + "h2/b");
    } else {
      h.w1 = store.index(p + "add/W1");
      h.b1 = store.index(p + "add/b");
      h.w2 = store.index(p + "add/W2");
      h.v = store.index(p + "add/v");
    }
    if (store.slot(h.w1).value.rows() != embed_dim) {
      throw ConfigError("propagation: checkpoint head " + std::to_string(k) + " has the wrong width");
    }
    m.heads_.push_back(h);
  }
  return m;
}

Var init_prototype(Var support_embeddings) {
  if (support_embeddings.rows() == 0) throw ArgumentError("init_prototype: no support embeddings");
  return ad::mean_rows(support_embeddings);
}

Var attention_weight(Tape& tape, ParamView params, const HeadParams& head, AttentionKind kind, Var p,
                     Var q) {
  if (kind == AttentionKind::kMultiplicative) {
    const Var hp = ad::linear(params.get(tape, head.w1), params.get(tape, head.b1), p);
    const Var hq = ad::linear(params.get(tape, head.w2), params.get(tape, *head.b2), q);
    return ad::cosine(hp, hq);
  }
  const Var a = ad::linear(params.get(tape, head.w1), params.get(tape, head.b1), p);
  const Var b = ad::linear(params.get(tape, head.w2), Var{}, q);
  const Var hidden = ad::tanh(ad::add(a, b));
  return ad::tanh(ad::linear(params.get(tape, *head.v), Var{}, hidden));
}

std::optional<Var> aggregate_neighbors(std::span<const Var> weights, std::span<const Var> senders) {
  if (weights.size() != senders.size()) throw ArgumentError("aggregate_neighbors: one weight per sender");
  if (senders.empty()) return std::nullopt;
  return ad::matmul(ad::concat_scalars(weights), ad::stack_rows(senders));
}

GateResult gate_mix(Var p0, Var self_msg, Var nbr_msg, double gamma) {
  const Var scores = ad::concat_scalars(std::vector<Var>{ad::cosine(p0, self_msg), ad::cosine(p0, nbr_msg)});
  const Var s = ad::softmax(scores, gamma);
  const Var g = ad::element(s, 0, 0);
  const Var rest = ad::element(s, 0, 1);
  return {ad::add(ad::mul(g, self_msg), ad::mul(rest, nbr_msg)), g};
}

namespace {

bool sends(SenderRule rule, NeighborRole role) {
  switch (rule) {
    case SenderRule::kAll: return true;
    case SenderRule::kParents: return role == NeighborRole::kParent;
    case SenderRule::kChildren: return role == NeighborRole::kChild;
  }
  return false;
}

}  // namespace

Var propagate_step(Tape& tape, ParamView params, const PropagationModel& model,
                   const PropagationPathway& pathway, Var initial, Var current, SenderRule rule,
                   std::span<const std::size_t> receiver_order) {
  const auto& members = pathway.members();
  const auto n = static_cast<Eigen::Index>(members.size());
  if (current.rows() != n || initial.rows() != n) {
    throw ArgumentError("propagate_step: state rows do not match pathway members");
  }
  std::vector<std::size_t> order(members.size());
  if (receiver_order.empty()) {
    std::iota(order.begin(), order.end(), std::size_t{0});
  } else {
    if (receiver_order.size() != members.size()) throw ArgumentError("propagate_step: bad receiver order");
    order.assign(receiver_order.begin(), receiver_order.end());
  }

  // (receiver, sender) positions and the receivers that get any message.
  std::vector<Eigen::Index> recv;
  std::vector<Eigen::Index> send;
  std::vector<Eigen::Index> receivers;
  for (std::size_t i : order) {
    bool any = false;
    for (const PathwayNeighbor& nb : pathway.neighbors(members[i])) {
      if (!sends(rule, nb.role)) continue;
      recv.push_back(static_cast<Eigen::Index>(i));
      send.push_back(static_cast<Eigen::Index>(pathway.position(nb.id)));
      any = true;
    }
    if (any) receivers.push_back(static_cast<Eigen::Index>(i));
  }
  if (receivers.empty()) return current;

  const PropagationConfig& cfg = model.config();
  const Var p0_r = ad::gather_rows(initial, receivers);
  const Var self_r = ad::gather_rows(current, receivers);

  std::vector<Var> head_outputs;
  head_outputs.reserve(model.heads().size());
  for (const HeadParams& head : model.heads()) {
    Var weights;
    if (cfg.attention == AttentionKind::kMultiplicative) {
      const Var h1 = ad::linear(params.get(tape, head.w1), params.get(tape, head.b1), current);
      const Var h2 = ad::linear(params.get(tape, head.w2), params.get(tape, *head.b2), current);
      weights = ad::cosine_rowwise(ad::gather_rows(h1, recv), ad::gather_rows(h2, send));
    } else {
      const Var a = ad::linear(params.get(tape, head.w1), params.get(tape, head.b1), current);
      const Var b = ad::linear(params.get(tape, head.w2), Var{}, current);
      const Var hidden = ad::tanh(ad::add(ad::gather_rows(a, recv), ad::gather_rows(b, send)));
      weights = ad::tanh(ad::linear(params.get(tape, *head.v), Var{}, hidden));
    }
    if (cfg.normalize_attention) weights = ad::segment_softmax(weights, recv);
    const Var adjacency = ad::scatter(weights, recv, send, n, n);
    const Var nbr_r = ad::gather_rows(ad::matmul(adjacency, current), receivers);

    const Var c_self = ad::cosine_rowwise(p0_r, self_r);
    const Var c_nbr = ad::cosine_rowwise(p0_r, nbr_r);
    const Var gate = ad::softmax(ad::concat_cols(c_self, c_nbr), cfg.gamma);
    const Var mixed = ad::add(ad::scale_rows(ad::column(gate, 0), self_r),
                              ad::scale_rows(ad::column(gate, 1), nbr_r));
    head_outputs.push_back(ad::replace_rows(current, receivers, mixed));
  }

  // mean = h_0 + sum_k (h_k - h_0) / K, so identical heads give h_0 exactly.
  Var out = head_outputs.front();
  if (head_outputs.size() > 1) {
    Var spread = ad::sub(head_outputs[1], head_outputs[0]);
    for (std::size_t k = 2; k < head_outputs.size(); ++k) {
      spread = ad::add(spread, ad::sub(head_outputs[k], head_outputs[0]));
    }
    out = ad::add(out, ad::scale(1.0 / static_cast<double>(head_outputs.size()), spread));
  }
  return out;
}

PrototypeState run_propagation(Tape& tape, ParamView params, const PropagationModel& model,
                               const PropagationPathway& pathway, Var initial) {
  PrototypeState state;
  state.initial = initial;
  state.steps.push_back(initial);
  for (SenderRule rule : model.config().schedule()) {
    state.steps.push_back(propagate_step(tape, params, model, pathway, initial, state.last(), rule));
  }
  return state;
}

Var mix_final(const PrototypeState& state, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ArgumentError("mix_final: lambda must be in [0, 1]");
  if (lambda == 1.0 || state.steps.size() <= 1) return state.initial;
  if (lambda == 0.0) return state.last();
  return ad::add(ad::scale(lambda, state.initial), ad::scale(1.0 - lambda, state.last()));
}

}  // namespace gpn
