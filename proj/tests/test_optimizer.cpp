#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "kdbrain/optimizer.hpp"

using namespace kdbrain;
using Catch::Matchers::WithinAbs;

namespace {

const Topology kTopo{{"A", "B"}, {2, 3}, 1};
const ModelConfig kCfg{.c_out = 2, .fuse_dim = 3, .embed_dim = 4, .classifier_hidden = 5, .orders = 1,
                       .prior_strength = 1.0};

ModelWeights<Tensor> filled(double v) {
  auto w = zero_weights(kTopo, kCfg);
  for_each_weight(w, [&](const std::string&, Tensor& t) {
    for (double& x : t.data()) x = v;
  });
  return w;
}

}  // namespace

TEST_CASE("zero gradient leaves parameters unchanged") {
  auto p = init_weights(kTopo, kCfg, 1);
  const auto before = p;
  auto s = make_adam_state(kTopo, kCfg);
  adam_step(p, s, zero_weights(kTopo, kCfg), {});
  CHECK(s.step == 1);
  const auto a = weight_refs(p);
  const auto b = weight_refs(before);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].second == *b[i].second);
}

TEST_CASE("first step moves each parameter by about the learning rate") {
  auto p = filled(0.0);
  auto s = make_adam_state(kTopo, kCfg);
  AdamConfig cfg;
  cfg.learning_rate = 1e-3;
  adam_step(p, s, filled(0.37), cfg);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  const double expected = -1e-3 * 0.37 / (0.37 + 1e-8);
  for (const auto& [name, t] : weight_refs(p))
    for (double v : t->data()) CHECK_THAT(v, WithinAbs(expected, 1e-15));
}

TEST_CASE("non-finite gradient is rejected before any update") {
  auto p = init_weights(kTopo, kCfg, 2);
  const auto before = p;
  auto s = make_adam_state(kTopo, kCfg);
  auto g = filled(0.1);
  g.interaction.key[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH(adam_step(p, s, g, {}), Catch::Matchers::ContainsSubstring("ssil.w_k"));
  CHECK(s.step == 0);
  CHECK(weight_refs(p)[0].second->values() == weight_refs(before)[0].second->values());
}

TEST_CASE("updates are deterministic") {
  auto p1 = init_weights(kTopo, kCfg, 3), p2 = init_weights(kTopo, kCfg, 3);
  auto s1 = make_adam_state(kTopo, kCfg), s2 = make_adam_state(kTopo, kCfg);
  for (int i = 0; i < 5; ++i) {
    adam_step(p1, s1, filled(0.1 * i - 0.2), {});
    adam_step(p2, s2, filled(0.1 * i - 0.2), {});
  }
  const auto a = weight_refs(p1), b = weight_refs(p2);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].second == *b[i].second);
}
