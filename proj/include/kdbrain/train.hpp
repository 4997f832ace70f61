#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kdbrain/autodiff.hpp"
#include "kdbrain/graphdata.hpp"
#include "kdbrain/losses.hpp"
#include "kdbrain/metrics.hpp"
#include "kdbrain/model.hpp"
#include "kdbrain/optimizer.hpp"
#include "kdbrain/priors.hpp"

namespace kdbrain {

struct TrainConfig {
  ModelConfig model;
  double beta = 0.5;
  AdamConfig adam;
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  PmcOrders pmc_orders = PmcOrders::Average;
};

inline void validate(const TrainConfig& c) {
  validate(c.model);
  if (!(c.beta >= 0.0) || !std::isfinite(c.beta)) throw ValidationError("train config: beta must be >= 0");
  if (c.epochs < 1) throw ValidationError("train config: epochs must be >= 1");
  if (c.batch_size < 1) throw ValidationError("train config: batch size must be >= 1");
  if (!(c.adam.learning_rate > 0.0)) throw ValidationError("train config: learning rate must be > 0");
  if (!(c.adam.beta1 >= 0.0 && c.adam.beta1 < 1.0) || !(c.adam.beta2 >= 0.0 && c.adam.beta2 < 1.0)) {
    throw ValidationError("train config: Adam decays must lie in [0, 1)");
  }
  if (!(c.adam.epsilon > 0.0)) throw ValidationError("train config: Adam epsilon must be > 0");
}

// Everything a checkpoint holds: the resolved config, weights, optimizer
// moments, and the (partition-aligned) priors the model was trained with.
struct ModelState {
  TrainConfig config;
  Model model;
  AdamState optimizer;
  std::optional<SemanticPriorBank> bank;
  std::optional<PriorInteraction> prior;

  const SemanticPriorBank* bank_ptr() const { return bank ? &*bank : nullptr; }
  const PriorInteraction* prior_ptr() const { return prior ? &*prior : nullptr; }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double ce = 0.0;
  std::optional<double> pmc;
  double accuracy = 0.0;
};

struct Objective {
  ad::Var total;
  ad::Var ce;
  std::optional<ad::Var> pmc;
  std::vector<ForwardPass> passes;
};

// Mean over the batch of L_ce + beta * L_pmc. Without a prior the PMC term is
// absent and the objective is the cross-entropy alone.
inline Objective batch_objective(ad::Tape& tape, const ModelWeights<ad::Var>& w,
                                 std::span<const Connectome* const> batch, const Partition& partition,
                                 const SemanticPriorBank* bank, const PriorInteraction* prior,
                                 const ModelConfig& cfg, double beta, PmcOrders pmc_orders) {
  if (batch.empty()) throw DomainError("batch_objective: empty batch");
  const auto bank_var = bind_bank(tape, bank);
  Objective obj;
  std::vector<ad::Var> logits;
  std::vector<int> labels;
  ad::Var pmc_sum;
  for (const Connectome* c : batch) {
    const auto blocks = bind_blocks(tape, *c, partition, false);
    ForwardPass f = forward(blocks, w, bank_var, cfg);
    logits.push_back(f.logits);
    labels.push_back(c->label);
    if (prior) {
      const ad::Var pmc = pmc_loss(f.trace.alphas, *prior, pmc_orders);
      pmc_sum = pmc_sum.valid() ? ad::add(pmc_sum, pmc) : pmc;
    }
    obj.passes.push_back(std::move(f));
  }
  obj.ce = ad::cross_entropy(ad::concat_rows(logits), labels);
  if (prior) {
    obj.pmc = ad::scale(pmc_sum, 1.0 / static_cast<double>(batch.size()));
    obj.total = total_loss(obj.ce, *obj.pmc, beta);
  } else {
    obj.total = obj.ce;
  }
  return obj;
}

inline double cross_entropy_value(const Tensor& logits, int label) {
  const auto row = logits.row(0);
  const double mx = *std::max_element(row.begin(), row.end());
  double s = 0.0;
  for (double v : row) s += std::exp(v - mx);
  return mx + std::log(s) - row[static_cast<std::size_t>(label)];
}

struct Evaluation {
  double accuracy = 0.0;
  std::optional<double> auc;
  std::vector<double> scores;  // P(patient)
  std::vector<int> predictions;
  std::vector<int> labels;
  double mean_ce = 0.0;
  std::optional<double> mean_pmc;
  std::size_t n_control = 0;
  std::size_t n_patient = 0;
  // Element-wise mean alpha^(l) per class; empty when the class is absent.
  std::vector<Tensor> mean_trace_control;
  std::vector<Tensor> mean_trace_patient;
};

inline Evaluation evaluate(const Model& model, const Dataset& data, const SemanticPriorBank* bank,
                           const PriorInteraction* prior, PmcOrders pmc_orders) {
  check_compatible(model, data);
  if (data.samples.empty()) throw DomainError("evaluate: empty dataset");
  Evaluation ev;
  double ce_sum = 0.0;
  double pmc_sum = 0.0;
  for (const Connectome& c : data.samples) {
    const Prediction p = predict(model, c, data.partition, bank);
    ev.scores.push_back(p.patient_probability());
    ev.predictions.push_back(p.label());
    ev.labels.push_back(c.label);
    ce_sum += cross_entropy_value(p.logits, c.label);
    if (prior) pmc_sum += pmc_value(p.alphas, *prior, data.partition.names, pmc_orders);
    auto& acc = c.label == 1 ? ev.mean_trace_patient : ev.mean_trace_control;
    if (acc.empty()) {
      acc = p.alphas;
    } else {
      for (std::size_t l = 0; l < acc.size(); ++l) kernels::add_into(acc[l], p.alphas[l]);
    }
    (c.label == 1 ? ev.n_patient : ev.n_control) += 1;
  }
  const double n = static_cast<double>(data.size());
  ev.mean_ce = ce_sum / n;
  if (prior) ev.mean_pmc = pmc_sum / n;
  ev.accuracy = metrics::accuracy(ev.predictions, ev.labels);
  ev.auc = metrics::auc(ev.scores, ev.labels);
  for (auto [trace, count] : {std::pair{&ev.mean_trace_control, ev.n_control},
                              std::pair{&ev.mean_trace_patient, ev.n_patient}}) {
    for (Tensor& a : *trace) a = kernels::scale(a, 1.0 / static_cast<double>(count));
  }
  return ev;
}

inline Evaluation evaluate(const ModelState& state, const Dataset& data) {
  return evaluate(state.model, data, state.bank_ptr(), state.prior_ptr(), state.config.pmc_orders);
}

// Per-parameter gradient of the batch objective.
inline ModelWeights<Tensor> batch_gradient(const Model& model, std::span<const Connectome* const> batch,
                                           const Partition& partition, const SemanticPriorBank* bank,
                                           const PriorInteraction* prior, double beta, PmcOrders pmc_orders) {
  ad::Tape tape;
  const auto w = bind_weights(tape, model.weights, true);
  const Objective obj = batch_objective(tape, w, batch, partition, bank, prior, model.config, beta, pmc_orders);
  const ad::Gradients g = tape.backward(obj.total);
  return map_weights<Tensor>(w, [&](const std::string&, const ad::Var& v) { return g[v]; });
}

struct TrainResult {
  ModelState state;
  std::vector<EpochRecord> history;
};

// Requires the semantic bank whenever lambda_sp > 0 and the prior whenever
// beta > 0. Both are aligned to the partition's subnetwork order before use.
inline ModelState initial_state(const Dataset& data, const SemanticPriorBank* bank, const PriorInteraction* prior,
                                const TrainConfig& cfg) {
  validate(cfg);
  validate_dataset(data);
  if (cfg.model.prior_strength > 0.0 && !bank) {
    throw ValidationError("training with lambda_sp > 0 requires a semantic prior bank");
  }
  if (cfg.beta > 0.0 && !prior) throw ValidationError("training with beta > 0 requires a prior interaction matrix");
  ModelState s;
  s.config = cfg;
  const Topology topo = topology_of(data);
  s.model = make_model(topo, cfg.model, cfg.seed);
  s.optimizer = make_adam_state(topo, cfg.model);
  if (bank) s.bank = align_bank(*bank, data.partition.names, cfg.model.embed_dim);
  if (prior) s.prior = align_prior(*prior, data.partition.names);
  return s;
}

inline TrainResult train(const Dataset& data, const SemanticPriorBank* bank, const PriorInteraction* prior,
                         const TrainConfig& cfg) {
  if (data.count_label(0) == 0 || data.count_label(1) == 0) {
    throw ValidationError("train: training data must contain both classes");
  }
  TrainResult result{initial_state(data, bank, prior, cfg), {}};
  ModelState& s = result.state;

  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const Connectome*> batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i)
        batch.push_back(&data.samples[order[i]]);
      const auto grads = batch_gradient(s.model, batch, data.partition, s.bank_ptr(), s.prior_ptr(), cfg.beta,
                                        cfg.pmc_orders);
      adam_step(s.model.weights, s.optimizer, grads, cfg.adam);
    }
    const Evaluation ev = evaluate(s, data);
    result.history.push_back({epoch, ev.mean_ce, ev.mean_pmc, ev.accuracy});
  }
  return result;
}

}  // namespace kdbrain
