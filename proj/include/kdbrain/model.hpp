#pragma once

#include <optional>
#include <vector>

#include "kdbrain/autodiff.hpp"
#include "kdbrain/encoder.hpp"
#include "kdbrain/graphdata.hpp"
#include "kdbrain/priors.hpp"
#include "kdbrain/ssil.hpp"
#include "kdbrain/weights.hpp"

namespace kdbrain {

struct Model {
  Topology topology;
  ModelConfig config;
  ModelWeights<Tensor> weights;
};

inline Topology topology_of(const Dataset& d) {
  return {d.partition.names, d.partition.sizes(), d.n_channels};
}

inline Model make_model(const Topology& topo, const ModelConfig& cfg, std::uint64_t seed) {
  return {topo, cfg, init_weights(topo, cfg, seed)};
}

// Records every weight on the tape, as leaves or as constants.
inline ModelWeights<ad::Var> bind_weights(ad::Tape& tape, const ModelWeights<Tensor>& w, bool differentiable) {
  return map_weights<ad::Var>(w, [&](const std::string&, const Tensor& t) {
    return differentiable ? tape.leaf(t) : tape.constant(t);
  });
}

// blocks[k][c]: channel c of subnetwork k, recorded as leaves when the input
// gradient is wanted (saliency).
inline std::vector<std::vector<ad::Var>> bind_blocks(ad::Tape& tape, const Connectome& c, const Partition& p,
                                                     bool differentiable) {
  std::vector<std::vector<ad::Var>> blocks(p.size());
  for (std::size_t k = 0; k < p.size(); ++k)
    for (Tensor& b : extract_subnetwork(c, p, k))
      blocks[k].push_back(differentiable ? tape.leaf(std::move(b)) : tape.constant(std::move(b)));
  return blocks;
}

struct ForwardPass {
  ad::Var initial;              // Z^(0)
  ssil::Trace trace;            // alpha^(1..q) and Z^(q)
  ad::Var logits;               // 1 x 2
};

inline ForwardPass forward(const std::vector<std::vector<ad::Var>>& blocks, const ModelWeights<ad::Var>& w,
                           const std::optional<ad::Var>& prior_bank, const ModelConfig& cfg) {
  ForwardPass out;
  out.initial = encoder::encode_all(blocks, w.encoder);
  out.trace = ssil::run_stack(out.initial, prior_bank, w.interaction, cfg.prior_strength, cfg.orders);
  out.logits = ssil::classify(out.trace.embedding, w.classifier);
  return out;
}

inline std::optional<ad::Var> bind_bank(ad::Tape& tape, const SemanticPriorBank* bank) {
  if (!bank) return std::nullopt;
  return tape.constant(bank->embeddings);
}

// Untaped inference result for one sample.
struct Prediction {
  Tensor logits;
  std::vector<Tensor> alphas;
  Tensor embedding;

  int label() const { return logits[1] > logits[0] ? 1 : 0; }
  // P(class 1) under softmax of the logits.
  double patient_probability() const { return kernels::softmax_rows(logits)[1]; }
};

inline void check_compatible(const Model& m, const Dataset& d) {
  const Topology t = topology_of(d);
  if (!(t == m.topology)) {
    throw ValidationError("dataset partition/channels do not match the model topology");
  }
}

inline Prediction predict(const Model& m, const Connectome& c, const Partition& p, const SemanticPriorBank* bank) {
  ad::Tape tape;
  const auto w = bind_weights(tape, m.weights, false);
  const auto blocks = bind_blocks(tape, c, p, false);
  const ForwardPass f = forward(blocks, w, bind_bank(tape, bank), m.config);
  Prediction out;
  out.logits = f.logits.value();
  for (const auto& a : f.trace.alphas) out.alphas.push_back(a.value());
  out.embedding = f.trace.embedding.value();
  return out;
}

}  // namespace kdbrain
