// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <gpn/autodiff.hpp>
#include <gpn/params.hpp>
#include <gpn/pathway.hpp>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gpn {

// Message-passing direction variants. Neighbors is the default model; the
// rest exist for ablations.
enum class PropagationVariant {
  kNeighbors,        // N->C: parents and children send
  kParents,          // F->C: only parents send
  kChildren,         // C->C: only children send
  kForwardBackward,  // B->P: t_steps parent steps, then t_steps child steps
  kAlternating,      // M->P: parent step, child step, repeated t_steps times
};

enum class AttentionKind { kMultiplicative, kAdditive };

enum class SenderRule { kAll, kParents, kChildren };

std::string to_string(PropagationVariant v);
std::string to_string(AttentionKind a);
PropagationVariant parse_variant(std::string_view text);
AttentionKind parse_attention(std::string_view text);

struct PropagationConfig {
  int t_steps = 2;
  int heads = 5;
  // Gate temperature.
  double gamma = 10.0;
  // Mixing weight of the initial prototype in the final one.
  double lambda = 0.0;
  PropagationVariant variant = PropagationVariant::kNeighbors;
  AttentionKind attention = AttentionKind::kMultiplicative;
  // Softmax-normalize attention weights over each receiver's senders. Off
  // means the raw cosine weights are summed.
  bool normalize_attention = false;

  void validate() const;
  /// Sender rule of every propagation step, in execution order.
  std::vector<SenderRule> schedule() const;
};

/// Slots of one attention head. Multiplicative heads use h1 = (w1, b1) and
/// h2 = (w2, b2); additive heads score v . tanh(w1 p + b1 + w2 q).
struct HeadParams {
  std::size_t w1 = 0;
  std::size_t b1 = 0;
  std::size_t w2 = 0;
  std::optional<std::size_t> b2;
  std::optional<std::size_t> v;
};

/// The learnable propagation parameters ("prop" namespace).
class PropagationModel {
 public:
  static PropagationModel create(const PropagationConfig& config, int embed_dim, ParameterStore& store,
                                 Rng& rng);
  static PropagationModel bind(const PropagationConfig& config, int embed_dim,
                               const ParameterStore& store);

  const PropagationConfig& config() const { return config_; }
  PropagationConfig& config() { return config_; }
  const std::vector<HeadParams>& heads() const { return heads_; }
  int embed_dim() const { return embed_dim_; }

 private:
  PropagationConfig config_;
  std::vector<HeadParams> heads_;
  int embed_dim_ = 0;
};

// ---- single-class building blocks ----

/// Mean of K support embeddings (K x E). Throws ArgumentError when K == 0.
Var init_prototype(Var support_embeddings);

/// Attention score a(p, q) of one head for receiver p and sender q (1 x E).
/// Multiplicative: cos(h1(p), h2(q)). Additive: tanh(v . tanh(w1 p + b1 + w2 q)).
Var attention_weight(Tape& tape, ParamView params, const HeadParams& head, AttentionKind kind, Var p,
                     Var q);

/// Sum_k weights[k] * senders[k]; nullopt when there are no senders.
std::optional<Var> aggregate_neighbors(std::span<const Var> weights, std::span<const Var> senders);

struct GateResult {
  Var prototype;
  Var gate;  // weight of the self message
};

/// g = softmax(gamma * [cos(p0, self), cos(p0, nbr)])[0];
/// result = g * self + (1 - g) * nbr.
GateResult gate_mix(Var p0, Var self_msg, Var nbr_msg, double gamma);

// ---- batched propagation over a pathway ----

/// Prototypes of all pathway members; row i belongs to pathway.members()[i].
struct PrototypeState {
  Var initial;
  std::vector<Var> steps;  // steps[0] == initial, then one entry per step

  Var last() const { return steps.back(); }
};

/// One simultaneous update of every pathway member: each head gates between
/// the member's own prototype and its attention-weighted sender sum, and the
/// heads are averaged. Members with no senders keep their prototype exactly.
/// `receiver_order` only changes the order members are visited in.
Var propagate_step(Tape& tape, ParamView params, const PropagationModel& model,
                   const PropagationPathway& pathway, Var initial, Var current, SenderRule rule,
                   std::span<const std::size_t> receiver_order = {});

/// Runs the configured step schedule starting from `initial`.
PrototypeState run_propagation(Tape& tape, ParamView params, const PropagationModel& model,
                               const PropagationPathway& pathway, Var initial);

/// lambda * P0 + (1 - lambda) * PT, returning P0 itself when lambda == 1 or no
/// steps ran, and PT itself when lambda == 0.
Var mix_final(const PrototypeState& state, double lambda);

}  // namespace gpn
