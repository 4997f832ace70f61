#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kdbrain/gradcheck.hpp"
#include "kdbrain/train.hpp"

// Finite-difference verification of the full training objective on a small
// random instance.
namespace kdbrain::selfcheck {

struct InstanceSpec {
  std::size_t subnetworks = 3;
  std::size_t regions_per_subnetwork = 4;
  std::size_t n_channels = 1;
  std::size_t batch = 2;
  ModelConfig model{.c_out = 4, .fuse_dim = 8, .embed_dim = 8, .classifier_hidden = 8, .orders = 2,
                    .prior_strength = 1.0};
  double beta = 0.5;
  PmcOrders pmc_orders = PmcOrders::Average;
  std::uint64_t seed = 0;
};

struct Instance {
  Dataset data;
  SemanticPriorBank bank;
  PriorInteraction prior;
  Model model;
};

// Random asymmetric connectomes (so both convolution branches matter), a
// Gaussian prior bank and a random row-stochastic prior with strictly positive rows.
inline Instance make_instance(const InstanceSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.05, 1.0);

  Instance inst;
  const std::size_t n = spec.subnetworks * spec.regions_per_subnetwork;
  inst.data.n_regions = n;
  inst.data.n_channels = spec.n_channels;
  inst.data.partition.n_regions = n;
  for (std::size_t k = 0; k < spec.subnetworks; ++k) {
    inst.data.partition.names.push_back("S" + std::to_string(k));
    std::vector<std::size_t> r;
    for (std::size_t i = 0; i < spec.regions_per_subnetwork; ++i) r.push_back(k * spec.regions_per_subnetwork + i);
    inst.data.partition.regions.push_back(std::move(r));
  }
  for (std::size_t s = 0; s < spec.batch; ++s) {
    Connectome c{"g" + std::to_string(s), static_cast<int>(s % 2), {}};
    for (std::size_t ch = 0; ch < spec.n_channels; ++ch) {
      Tensor a(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = i == j ? 0.0 : normal(rng);
      c.channels.push_back(std::move(a));
    }
    inst.data.samples.push_back(std::move(c));
  }

  const auto& names = inst.data.partition.names;
  inst.bank.disorder = "gradcheck";
  inst.bank.names = names;
  inst.bank.embeddings = Tensor(names.size(), spec.model.embed_dim);
  for (double& v : inst.bank.embeddings.data()) v = normal(rng);

  inst.prior.names = names;
  inst.prior.matrix = Tensor(names.size(), names.size());
  for (std::size_t k = 0; k < names.size(); ++k) {
    double total = 0.0;
    for (std::size_t j = 0; j < names.size(); ++j) total += inst.prior.matrix(k, j) = unit(rng);
    for (std::size_t j = 0; j < names.size(); ++j) inst.prior.matrix(k, j) /= total;
  }

  inst.model = make_model(topology_of(inst.data), spec.model, rng());
  return inst;
}

// Rebuilds the weight layout of `shape` from a flat list of taped variables
// given in for_each_weight order.
inline ModelWeights<ad::Var> weights_from_list(const ModelWeights<Tensor>& shape, std::span<const ad::Var> vars) {
  std::size_t next = 0;
  return map_weights<ad::Var>(shape, [&](const std::string&, const Tensor&) { return vars[next++]; });
}

inline ad::GradCheckReport check_objective(const InstanceSpec& spec, const ad::GradCheckOptions& options) {
  const Instance inst = make_instance(spec);
  std::vector<Tensor> params;
  std::vector<std::string> names;
  for_each_weight(inst.model.weights, [&](const std::string& name, const Tensor& t) {
    names.push_back(name);
    params.push_back(t);
  });
  std::vector<const Connectome*> batch;
  for (const auto& c : inst.data.samples) batch.push_back(&c);

  const ad::LossBuilder build = [&](ad::Tape& tape, std::span<const ad::Var> vars) {
    const auto w = weights_from_list(inst.model.weights, vars);
    return batch_objective(tape, w, batch, inst.data.partition, &inst.bank, &inst.prior, spec.model, spec.beta,
                           spec.pmc_orders)
        .total;
  };
  return ad::grad_check(build, std::move(params), names, options);
}

}  // namespace kdbrain::selfcheck
