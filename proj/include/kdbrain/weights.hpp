#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "kdbrain/errors.hpp"
#include "kdbrain/tensor.hpp"

namespace kdbrain {

// Architecture hyperparameters. Subnetwork sizes and channel count come from the data.
struct ModelConfig {
  std::size_t c_out = 16;              // encoder convolution channels
  std::size_t fuse_dim = 32;           // h
  std::size_t embed_dim = 64;          // d
  std::size_t classifier_hidden = 64;  // d_h
  int orders = 2;                      // q
  double prior_strength = 1.0;         // lambda_sp
};

inline void validate(const ModelConfig& c) {
  if (c.c_out == 0 || c.fuse_dim == 0 || c.embed_dim == 0 || c.classifier_hidden == 0) {
    throw ValidationError("model config: all dimensions must be positive");
  }
  if (c.orders < 1) throw ValidationError("model config: q must be >= 1, got " + std::to_string(c.orders));
  if (!(c.prior_strength >= 0.0) || !std::isfinite(c.prior_strength)) {
    throw ValidationError("model config: lambda_sp must be >= 0");
  }
}

struct Topology {
  std::vector<std::string> names;
  std::vector<std::size_t> sizes;  // N_k per subnetwork
  std::size_t n_channels = 1;

  std::size_t n_subnetworks() const { return names.size(); }
  friend bool operator==(const Topology&, const Topology&) = default;
};

inline constexpr std::size_t kNumClasses = 2;

// Learnable weights, templated on the element so the same layout holds plain
// tensors (storage, gradients, optimizer moments) or taped variables.
template <class T>
struct EncoderWeights {
  std::vector<std::vector<T>> row_kernels;  // [k][c], N_k x C_out
  std::vector<std::vector<T>> col_kernels;  // [k][c], N_k x C_out
  T fuse;                                   // C_out x h
  T project;                                // h x d
};

template <class T>
struct InteractionWeights {
  T query;  // d x d
  T key;    // d x d
};

template <class T>
struct ClassifierWeights {
  T hidden;       // (|T| d) x d_h
  T hidden_bias;  // 1 x d_h
  T output;       // d_h x 2
  T output_bias;  // 1 x 2
};

template <class T>
struct ModelWeights {
  EncoderWeights<T> encoder;
  InteractionWeights<T> interaction;
  ClassifierWeights<T> classifier;
};

// Visits every weight in a fixed order with its stable name. Works on const
// and non-const ModelWeights.
template <class W, class F>
void for_each_weight(W& w, F&& f) {
  for (std::size_t k = 0; k < w.encoder.row_kernels.size(); ++k)
    for (std::size_t c = 0; c < w.encoder.row_kernels[k].size(); ++c)
      f("encoder.w_row." + std::to_string(k) + "." + std::to_string(c), w.encoder.row_kernels[k][c]);
  for (std::size_t k = 0; k < w.encoder.col_kernels.size(); ++k)
    for (std::size_t c = 0; c < w.encoder.col_kernels[k].size(); ++c)
      f("encoder.w_col." + std::to_string(k) + "." + std::to_string(c), w.encoder.col_kernels[k][c]);
  f(std::string("encoder.w_fuse"), w.encoder.fuse);
  f(std::string("encoder.w_proj"), w.encoder.project);
  f(std::string("ssil.w_q"), w.interaction.query);
  f(std::string("ssil.w_k"), w.interaction.key);
  f(std::string("classifier.hidden.weight"), w.classifier.hidden);
  f(std::string("classifier.hidden.bias"), w.classifier.hidden_bias);
  f(std::string("classifier.output.weight"), w.classifier.output);
  f(std::string("classifier.output.bias"), w.classifier.output_bias);
}

// Same layout with every element transformed by `f(name, const T&) -> U`.
template <class U, class T, class F>
ModelWeights<U> map_weights(const ModelWeights<T>& w, F&& f) {
  ModelWeights<U> out;
  const auto map_grid = [&](const std::vector<std::vector<T>>& grid, const char* prefix) {
    std::vector<std::vector<U>> g(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
      for (std::size_t c = 0; c < grid[k].size(); ++c)
        g[k].push_back(f(std::string(prefix) + std::to_string(k) + "." + std::to_string(c), grid[k][c]));
    return g;
  };
  out.encoder.row_kernels = map_grid(w.encoder.row_kernels, "encoder.w_row.");
  out.encoder.col_kernels = map_grid(w.encoder.col_kernels, "encoder.w_col.");
  out.encoder.fuse = f(std::string("encoder.w_fuse"), w.encoder.fuse);
  out.encoder.project = f(std::string("encoder.w_proj"), w.encoder.project);
  out.interaction.query = f(std::string("ssil.w_q"), w.interaction.query);
  out.interaction.key = f(std::string("ssil.w_k"), w.interaction.key);
  out.classifier.hidden = f(std::string("classifier.hidden.weight"), w.classifier.hidden);
  out.classifier.hidden_bias = f(std::string("classifier.hidden.bias"), w.classifier.hidden_bias);
  out.classifier.output = f(std::string("classifier.output.weight"), w.classifier.output);
  out.classifier.output_bias = f(std::string("classifier.output.bias"), w.classifier.output_bias);
  return out;
}

inline std::vector<std::pair<std::string, Tensor*>> weight_refs(ModelWeights<Tensor>& w) {
  std::vector<std::pair<std::string, Tensor*>> refs;
  for_each_weight(w, [&](const std::string& name, Tensor& t) { refs.emplace_back(name, &t); });
  return refs;
}

inline std::vector<std::pair<std::string, const Tensor*>> weight_refs(const ModelWeights<Tensor>& w) {
  std::vector<std::pair<std::string, const Tensor*>> refs;
  for_each_weight(w, [&](const std::string& name, const Tensor& t) { refs.emplace_back(name, &t); });
  return refs;
}

inline std::size_t parameter_count(const ModelWeights<Tensor>& w) {
  std::size_t n = 0;
  for_each_weight(w, [&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

// All-zero weights with the shapes implied by topology and config.
inline ModelWeights<Tensor> zero_weights(const Topology& topo, const ModelConfig& cfg) {
  ModelWeights<Tensor> w;
  for (std::size_t nk : topo.sizes) {
    w.encoder.row_kernels.emplace_back(topo.n_channels, Tensor(nk, cfg.c_out));
    w.encoder.col_kernels.emplace_back(topo.n_channels, Tensor(nk, cfg.c_out));
  }
  w.encoder.fuse = Tensor(cfg.c_out, cfg.fuse_dim);
  w.encoder.project = Tensor(cfg.fuse_dim, cfg.embed_dim);
  w.interaction.query = Tensor(cfg.embed_dim, cfg.embed_dim);
  w.interaction.key = Tensor(cfg.embed_dim, cfg.embed_dim);
  w.classifier.hidden = Tensor(topo.n_subnetworks() * cfg.embed_dim, cfg.classifier_hidden);
  w.classifier.hidden_bias = Tensor(1, cfg.classifier_hidden);
  w.classifier.output = Tensor(cfg.classifier_hidden, kNumClasses);
  w.classifier.output_bias = Tensor(1, kNumClasses);
  return w;
}

// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); a bias uses its layer's fan-in.
inline ModelWeights<Tensor> init_weights(const Topology& topo, const ModelConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  ModelWeights<Tensor> w = zero_weights(topo, cfg);
  std::mt19937_64 rng(seed);
  const auto fill = [&](Tensor& t, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.data()) v = dist(rng);
  };
  for_each_weight(w, [&](const std::string& name, Tensor& t) {
    std::size_t fan_in = t.rows();
    if (name == "classifier.hidden.bias") fan_in = w.classifier.hidden.rows();
    if (name == "classifier.output.bias") fan_in = w.classifier.output.rows();
    fill(t, fan_in);
  });
  return w;
}

}  // namespace kdbrain
