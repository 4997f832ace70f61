#include <catch_amalgamated.hpp>

#include <cmath>

#include "kdbrain/synthgen.hpp"

using namespace kdbrain;

namespace {

// Mean of the off-diagonal entries inside the region block.
double block_mean(const Tensor& a, const std::vector<std::size_t>& r) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i : r)
    for (std::size_t j : r)
      if (i != j) {
        s += a(i, j);
        ++n;
      }
  return s / static_cast<double>(n);
}

}  // namespace

TEST_CASE("default layout") {
  const Dataset d = synth::generate({});
  CHECK(d.n_regions == 60);
  CHECK(d.partition.names == std::vector<std::string>{"DMN", "SN", "CEN"});
  CHECK(d.count_label(0) == 100);
  CHECK(d.count_label(1) == 100);
}

TEST_CASE("matrices are symmetric with zero diagonal") {
  synth::SynthSpec s;
  s.n_per_class = 3;
  s.mode = synth::Mode::CoupledBlocks;
  for (const auto& c : synth::generate(s).samples) {
    const Tensor& a = c.channels[0];
    for (std::size_t i = 0; i < a.rows(); ++i) {
      CHECK(a(i, i) == 0.0);
      for (std::size_t j = 0; j < i; ++j) CHECK(a(i, j) == a(j, i));
    }
  }
}

TEST_CASE("mean shift plants delta in the DMN block") {
  synth::SynthSpec s;
  s.delta = 5.0;
  s.sigma = 1.0;
  s.seed = 11;
  const Dataset d = synth::generate(s);
  const auto& dmn = d.partition.regions[0];
  std::vector<double> m[2];
  for (const auto& c : d.samples) m[c.label].push_back(block_mean(c.channels[0], dmn));
  double mean[2], var[2];
  for (int k = 0; k < 2; ++k) {
    const double n = static_cast<double>(m[k].size());
    double s1 = 0.0, s2 = 0.0;
    for (double v : m[k]) s1 += v;
    mean[k] = s1 / n;
    for (double v : m[k]) s2 += (v - mean[k]) * (v - mean[k]);
    var[k] = s2 / (n - 1) / n;
  }
  const double se = std::sqrt(var[0] + var[1]);
  CHECK(std::abs((mean[1] - mean[0]) - 5.0) < 3.0 * se);

  // Blocks other than DMN carry no shift.
  std::vector<double> sn[2];
  for (const auto& c : d.samples) sn[c.label].push_back(block_mean(c.channels[0], d.partition.regions[1]));
  double diff = 0.0;
  for (int k = 0; k < 2; ++k) {
    double t = 0.0;
    for (double v : sn[k]) t += v;
    diff += (k == 1 ? 1.0 : -1.0) * t / static_cast<double>(sn[k].size());
  }
  CHECK(std::abs(diff) < 3.0 * se);
}

TEST_CASE("zero delta leaves the classes identically distributed") {
  synth::SynthSpec s;
  s.delta = 0.0;
  s.n_per_class = 4;
  const Dataset d = synth::generate(s);
  synth::SynthSpec swapped = s;
  swapped.mode = synth::Mode::CoupledBlocks;
  const Dataset e = synth::generate(swapped);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d.samples[i].channels == e.samples[i].channels);
}

TEST_CASE("generation is seed-deterministic") {
  synth::SynthSpec s;
  s.n_per_class = 5;
  s.seed = 7;
  const Dataset a = synth::generate(s);
  const Dataset b = synth::generate(s);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.samples[i].channels == b.samples[i].channels);
  s.seed = 8;
  CHECK_FALSE(synth::generate(s).samples[0].channels == a.samples[0].channels);
}

TEST_CASE("control samples ignore mode and delta") {
  synth::SynthSpec s;
  s.n_per_class = 5;
  synth::SynthSpec t = s;
  t.mode = synth::Mode::CoupledBlocks;
  t.delta = 2.0;
  const Dataset a = synth::generate(s);
  const Dataset b = synth::generate(t);
  for (std::size_t i = 0; i < 5; ++i) CHECK(a.samples[i].channels == b.samples[i].channels);
}

TEST_CASE("coupled blocks move DMN and CEN together") {
  synth::SynthSpec s;
  s.mode = synth::Mode::CoupledBlocks;
  s.delta = 3.0;
  const Dataset d = synth::generate(s);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (const auto& c : d.samples) {
    if (c.label != 1) continue;
    const double x = block_mean(c.channels[0], d.partition.regions[0]);
    const double y = block_mean(c.channels[0], d.partition.regions[2]);
    sxy += x * y;
    sxx += x * x;
    syy += y * y;
  }
  CHECK(sxy / std::sqrt(sxx * syy) > 0.9);
}

TEST_CASE("generator settings are validated") {
  synth::SynthSpec s;
  s.delta = -1.0;
  CHECK_THROWS_AS(synth::generate(s), ValidationError);
  s = {};
  s.sigma = 0.0;
  CHECK_THROWS_AS(synth::generate(s), ValidationError);
  s = {};
  s.sizes = {30, 30, 30};
  CHECK_THROWS_AS(synth::generate(s), ValidationError);
  CHECK_THROWS_AS(synth::parse_mode("shift"), ValidationError);
}
