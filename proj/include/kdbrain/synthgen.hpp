#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "kdbrain/errors.hpp"
#include "kdbrain/graphdata.hpp"

namespace kdbrain::synth {

enum class Mode { MeanShift, CoupledBlocks };

inline std::string to_string(Mode m) { return m == Mode::MeanShift ? "mean-shift" : "coupled-blocks"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "mean-shift" || s == "mean_shift") return Mode::MeanShift;
  if (s == "coupled-blocks" || s == "coupled_blocks") return Mode::CoupledBlocks;
  throw ValidationError("unknown synthetic mode '" + s + "' (expected mean-shift or coupled-blocks)");
}

// Subnetworks occupy consecutive region blocks starting at region 0, in
// `names` order; trailing regions stay unassigned.
struct SynthSpec {
  std::size_t n_regions = 60;
  std::vector<std::string> names{"DMN", "SN", "CEN"};
  std::vector<std::size_t> sizes{12, 12, 12};
  std::size_t n_per_class = 100;
  Mode mode = Mode::MeanShift;
  double delta = 5.0;
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

inline void validate(const SynthSpec& s) {
  if (!(s.delta >= 0.0) || !std::isfinite(s.delta)) throw ValidationError("synth: delta must be >= 0");
  if (!(s.sigma > 0.0) || !std::isfinite(s.sigma)) throw ValidationError("synth: sigma must be > 0");
  if (s.names.size() != s.sizes.size() || s.names.empty()) {
    throw ValidationError("synth: need one size per subnetwork name");
  }
  const std::size_t total = std::accumulate(s.sizes.begin(), s.sizes.end(), std::size_t{0});
  if (total > s.n_regions) {
    throw ValidationError("synth: subnetwork sizes sum to " + std::to_string(total) + " > n_regions " +
                          std::to_string(s.n_regions));
  }
  for (std::size_t sz : s.sizes)
    if (sz < 2) throw ValidationError("synth: every subnetwork needs at least 2 regions");
  if (s.n_per_class == 0) throw ValidationError("synth: n_per_class must be >= 1");
  const auto has = [&](const char* n) { return std::find(s.names.begin(), s.names.end(), n) != s.names.end(); };
  if (!has("DMN")) throw ValidationError("synth: planted signal needs a subnetwork named DMN");
  if (s.mode == Mode::CoupledBlocks && !has("CEN")) {
    throw ValidationError("synth: coupled-blocks needs a subnetwork named CEN");
  }
}

inline Partition make_partition(const SynthSpec& s) {
  Partition p;
  p.n_regions = s.n_regions;
  p.names = s.names;
  std::size_t next = 0;
  for (std::size_t sz : s.sizes) {
    std::vector<std::size_t> r(sz);
    std::iota(r.begin(), r.end(), next);
    next += sz;
    p.regions.push_back(std::move(r));
  }
  return p;
}

namespace detail {

inline void add_to_block(Tensor& a, const std::vector<std::size_t>& regions, double shift) {
  for (std::size_t i : regions)
    for (std::size_t j : regions)
      if (i != j) a(i, j) += shift;
}

}  // namespace detail

// Class 0: symmetric N(0, sigma^2) off-diagonal noise, zero diagonal.
// Class 1 adds the planted signal on top of identically distributed noise.
// Noise comes from one stream and the coupling latent from another, so class-0
// matrices do not depend on mode or delta.
inline Dataset generate(const SynthSpec& s) {
  validate(s);
  Dataset d;
  d.partition = make_partition(s);
  d.n_regions = s.n_regions;
  d.n_channels = 1;

  std::mt19937_64 noise_rng(s.seed);
  std::mt19937_64 latent_rng(s.seed ^ 0x9E3779B97F4A7C15ULL);
  std::normal_distribution<double> noise(0.0, s.sigma);
  std::normal_distribution<double> latent(0.0, 1.0);

  const auto& dmn = d.partition.regions[*d.partition.index_of("DMN")];
  const auto cen_index = d.partition.index_of("CEN");

  std::size_t serial = 0;
  for (int label : {0, 1}) {
    for (std::size_t n = 0; n < s.n_per_class; ++n) {
      Tensor a(s.n_regions, s.n_regions);
      for (std::size_t i = 0; i < s.n_regions; ++i)
        for (std::size_t j = i + 1; j < s.n_regions; ++j) {
          const double v = noise(noise_rng);
          a(i, j) = v;
          a(j, i) = v;
        }
      if (label == 1) {
        if (s.mode == Mode::MeanShift) {
          detail::add_to_block(a, dmn, s.delta);
        } else {
          const double u = latent(latent_rng);
          detail::add_to_block(a, dmn, s.delta * u);
          detail::add_to_block(a, d.partition.regions[*cen_index], s.delta * u);
        }
      }
      char id[32];
      std::snprintf(id, sizeof id, "s%04zu", serial++);
      d.samples.push_back(Connectome{id, label, {std::move(a)}});
    }
  }
  return d;
}

inline ordered_json to_json(const SynthSpec& s) {
  ordered_json j;
  j["n_regions"] = s.n_regions;
  j["subnetworks"] = s.names;
  j["sizes"] = s.sizes;
  j["n_per_class"] = s.n_per_class;
  j["mode"] = to_string(s.mode);
  j["delta"] = s.delta;
  j["sigma"] = s.sigma;
  j["seed"] = s.seed;
  return j;
}

}  // namespace kdbrain::synth
