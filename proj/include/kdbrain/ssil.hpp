#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "kdbrain/autodiff.hpp"
#include "kdbrain/weights.hpp"

// Semantic-prior-conditioned interaction among subnetwork embeddings.
//
// Each order l computes
//   Q = (Z + lambda_sp * H_sp) W_Q,   K = Z W_K,
//   alpha = softmax_rows(Q K^T / sqrt(d)),   Z <- alpha Z
// with W_Q and W_K shared across orders. The prior enters queries only.
namespace kdbrain::ssil {

struct QueryKey {
  ad::Var query;
  ad::Var key;
};

// `prior` is the |T| x d semantic bank; nullopt means no bank was loaded.
inline QueryKey inject_query(const ad::Var& z, const std::optional<ad::Var>& prior,
                             const InteractionWeights<ad::Var>& w, double prior_strength) {
  if (z.cols() != w.query.rows() || z.cols() != w.key.rows()) {
    throw DimensionError("inject_query: embedding " + z.value().shape_string() + " vs projections " +
                         w.query.value().shape_string() + "/" + w.key.value().shape_string());
  }
  ad::Var source = z;
  if (prior) {
    if (!prior->value().same_shape(z.value())) {
      throw DimensionError("inject_query: prior bank " + prior->value().shape_string() + " vs embedding " +
                           z.value().shape_string());
    }
    source = ad::add(z, ad::scale(*prior, prior_strength));
  }
  return {ad::matmul(source, w.query), ad::matmul(z, w.key)};
}

// alpha[k,j] = softmax_j(Q_k . K_j / sqrt(d))
inline ad::Var interaction_coefficients(const ad::Var& query, const ad::Var& key) {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(query.cols()));
  return ad::softmax_rows(ad::scale(ad::matmul(query, ad::transpose(key)), inv_sqrt_d));
}

// Z_next[k] = sum_j alpha[k,j] Z_prev[j]; the self term is the j = k entry.
inline ad::Var update_representations(const ad::Var& z, const ad::Var& alpha) { return ad::matmul(alpha, z); }

struct Trace {
  std::vector<ad::Var> alphas;  // one |T| x |T| matrix per order
  ad::Var embedding;            // Z^(q)
};

inline Trace run_stack(const ad::Var& z0, const std::optional<ad::Var>& prior, const InteractionWeights<ad::Var>& w,
                       double prior_strength, int orders) {
  if (orders < 1) throw ValidationError("run_stack: q must be >= 1");
  Trace trace;
  ad::Var z = z0;
  for (int l = 0; l < orders; ++l) {
    const QueryKey qk = inject_query(z, prior, w, prior_strength);
    const ad::Var alpha = interaction_coefficients(qk.query, qk.key);
    z = update_representations(z, alpha);
    trace.alphas.push_back(alpha);
  }
  trace.embedding = z;
  return trace;
}

// Flatten row-major, one LeakyReLU hidden layer, linear output to two logits.
inline ad::Var classify(const ad::Var& embedding, const ClassifierWeights<ad::Var>& w) {
  const ad::Var flat = ad::reshape(embedding, 1, embedding.value().size());
  const ad::Var hidden = ad::leaky_relu(ad::add(ad::matmul(flat, w.hidden), w.hidden_bias));
  return ad::add(ad::matmul(hidden, w.output), w.output_bias);
}

}  // namespace kdbrain::ssil
