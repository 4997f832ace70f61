#pragma once

#include <span>
#include <string>
#include <vector>

#include "kdbrain/autodiff.hpp"
#include "kdbrain/priors.hpp"

namespace kdbrain {

// How the per-order attention matrices are reduced to the single interaction
// distribution P_sni that is compared against the prior.
enum class PmcOrders { Average, Final };

inline std::string to_string(PmcOrders p) { return p == PmcOrders::Average ? "avg" : "final"; }

inline PmcOrders parse_pmc_orders(const std::string& s) {
  if (s == "avg") return PmcOrders::Average;
  if (s == "final") return PmcOrders::Final;
  throw ValidationError("unknown pmc order reduction '" + s + "' (expected avg or final)");
}

inline constexpr double kPmcEpsilon = 1e-8;

inline ad::Var interaction_distribution(std::span<const ad::Var> alphas, PmcOrders mode) {
  if (alphas.empty()) throw DomainError("interaction_distribution: empty trace");
  if (mode == PmcOrders::Final) return alphas.back();
  ad::Var total = alphas.front();
  for (std::size_t l = 1; l < alphas.size(); ++l) total = ad::add(total, alphas[l]);
  return ad::scale(total, 1.0 / static_cast<double>(alphas.size()));
}

inline Tensor interaction_distribution(const std::vector<Tensor>& alphas, PmcOrders mode) {
  if (alphas.empty()) throw DomainError("interaction_distribution: empty trace");
  if (mode == PmcOrders::Final) return alphas.back();
  Tensor total = alphas.front();
  for (std::size_t l = 1; l < alphas.size(); ++l) kernels::add_into(total, alphas[l]);
  return kernels::scale(total, 1.0 / static_cast<double>(alphas.size()));
}

// KL(prior || P_sni) summed over rows, for one sample.
inline ad::Var pmc_loss(std::span<const ad::Var> alphas, const PriorInteraction& prior, PmcOrders mode) {
  return ad::kl_divergence(prior.matrix, interaction_distribution(alphas, mode), kPmcEpsilon);
}

inline double kl_value(const Tensor& target, const Tensor& pred, double eps = kPmcEpsilon) {
  kernels::require_same_shape(target, pred, "kl_value");
  double total = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i)
    if (target[i] > 0.0) total += target[i] * (std::log(target[i]) - std::log(std::max(pred[i], eps)));
  return total;
}

// Untaped variant; `names` is the order the trace rows follow.
inline double pmc_value(const std::vector<Tensor>& alphas, const PriorInteraction& prior,
                        const std::vector<std::string>& names, PmcOrders mode) {
  if (prior.names != names) {
    throw ValidationError("pmc_loss: prior subnetwork order does not match trace (" +
                          (name_set_diff(names, prior.names).empty() ? std::string("same names, different order")
                                                                      : name_set_diff(names, prior.names)) +
                          ")");
  }
  return kl_value(prior.matrix, interaction_distribution(alphas, mode));
}

// L = L_ce + beta * L_pmc
inline ad::Var total_loss(const ad::Var& ce, const ad::Var& pmc, double beta) {
  return ad::add(ce, ad::scale(pmc, beta));
}

}  // namespace kdbrain
