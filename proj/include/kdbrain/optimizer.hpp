#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "kdbrain/errors.hpp"
#include "kdbrain/weights.hpp"

namespace kdbrain {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  ModelWeights<Tensor> first_moment;
  ModelWeights<Tensor> second_moment;
  std::uint64_t step = 0;
};

inline AdamState make_adam_state(const Topology& topo, const ModelConfig& cfg) {
  return {zero_weights(topo, cfg), zero_weights(topo, cfg), 0};
}

// One bias-corrected Adam update. Gradients are checked for finiteness before
// anything is modified.
inline void adam_step(ModelWeights<Tensor>& params, AdamState& state, const ModelWeights<Tensor>& grads,
                      const AdamConfig& cfg) {
  auto p = weight_refs(params);
  auto m = weight_refs(state.first_moment);
  auto v = weight_refs(state.second_moment);
  auto g = weight_refs(grads);
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw DimensionError("adam_step: parameter/gradient/moment layouts differ");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!p[i].second->same_shape(*g[i].second) || !p[i].second->same_shape(*m[i].second) ||
        !p[i].second->same_shape(*v[i].second)) {
      throw DimensionError("adam_step: shape mismatch for " + p[i].first + ": parameter " +
                           p[i].second->shape_string() + ", gradient " + g[i].second->shape_string());
    }
    if (!g[i].second->all_finite()) throw NumericError("adam_step: non-finite gradient for " + p[i].first);
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    Tensor& w = *p[i].second;
    Tensor& m1 = *m[i].second;
    Tensor& m2 = *v[i].second;
    const Tensor& gi = *g[i].second;
    for (std::size_t j = 0; j < w.size(); ++j) {
      m1[j] = cfg.beta1 * m1[j] + (1.0 - cfg.beta1) * gi[j];
      m2[j] = cfg.beta2 * m2[j] + (1.0 - cfg.beta2) * gi[j] * gi[j];
      const double m_hat = m1[j] / bias1;
      const double v_hat = m2[j] / bias2;
      w[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace kdbrain
