#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "kdbrain/autodiff.hpp"
#include "kdbrain/graphdata.hpp"
#include "kdbrain/model.hpp"

namespace kdbrain::interpret {

// Element-wise mean of alpha^(l) over the samples carrying `label`.
inline std::vector<Tensor> mean_trace(const Model& model, const Dataset& data, const SemanticPriorBank* bank,
                                      int label) {
  check_compatible(model, data);
  std::vector<Tensor> mean;
  std::size_t count = 0;
  for (const Connectome& c : data.samples) {
    if (c.label != label) continue;
    const Prediction p = predict(model, c, data.partition, bank);
    if (mean.empty()) {
      mean = p.alphas;
    } else {
      for (std::size_t l = 0; l < mean.size(); ++l) kernels::add_into(mean[l], p.alphas[l]);
    }
    ++count;
  }
  if (count == 0) throw DomainError("mean_trace: no samples with label " + std::to_string(label));
  for (Tensor& a : mean) a = kernels::scale(a, 1.0 / static_cast<double>(count));
  return mean;
}

struct Pathway {
  std::vector<std::size_t> steps;  // k_0 -> k_1 -> ... -> k_q
  double score = 0.0;
};

inline std::string pathway_string(const Pathway& p, const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t i = 0; i < p.steps.size(); ++i) s += (i ? "→" : "") + names.at(p.steps[i]);
  return s;
}

// score = prod_l alpha^(l)[k_{l-1}, k_l]
inline double pathway_score(const std::vector<Tensor>& trace, const std::vector<std::size_t>& steps) {
  if (steps.size() != trace.size() + 1) throw DimensionError("pathway_score: need q + 1 steps");
  double score = 1.0;
  for (std::size_t l = 0; l < trace.size(); ++l) score *= trace[l](steps[l], steps[l + 1]);
  return score;
}

// Every |T|^q continuation from one start, ranked by descending score; ties
// keep lexicographic order of the step sequence.
inline std::vector<Pathway> pathways_from(const std::vector<Tensor>& trace, std::size_t start) {
  if (trace.empty()) throw DomainError("pathway_scores: empty trace");
  const std::size_t t = trace.front().rows();
  if (start >= t) throw ValidationError("pathway_scores: start index out of range");
  const std::size_t q = trace.size();
  std::vector<Pathway> out;
  std::vector<std::size_t> digits(q, 0);
  while (true) {
    Pathway p;
    p.steps.push_back(start);
    p.steps.insert(p.steps.end(), digits.begin(), digits.end());
    p.score = pathway_score(trace, p.steps);
    out.push_back(std::move(p));
    std::size_t pos = q;
    while (pos > 0 && ++digits[pos - 1] == t) digits[--pos] = 0;
    if (pos == 0) break;
  }
  std::stable_sort(out.begin(), out.end(), [](const Pathway& a, const Pathway& b) { return a.score > b.score; });
  return out;
}

// Ranked pathways for the named start, or for every start (grouped by start in
// subnetwork order) when `start` is empty.
inline std::vector<Pathway> pathway_scores(const std::vector<Tensor>& trace, const std::vector<std::string>& names,
                                           const std::optional<std::string>& start = std::nullopt) {
  if (trace.empty()) throw DomainError("pathway_scores: q must be >= 1");
  if (start) {
    const auto it = std::find(names.begin(), names.end(), *start);
    if (it == names.end()) throw ValidationError("pathway_scores: unknown start subnetwork '" + *start + "'");
    return pathways_from(trace, static_cast<std::size_t>(it - names.begin()));
  }
  std::vector<Pathway> all;
  for (std::size_t s = 0; s < names.size(); ++s) {
    auto ranked = pathways_from(trace, s);
    all.insert(all.end(), ranked.begin(), ranked.end());
  }
  return all;
}

struct RegionSaliency {
  std::size_t region = 0;
  std::string name;
  std::string subnetwork;  // empty when unassigned
  double score = 0.0;
};

struct BiomarkerReport {
  std::vector<RegionSaliency> regions;  // descending score, ties by region index
  std::size_t samples_used = 0;
};

// Mean over correctly classified samples of |d logit_true / d A| summed over
// each region's row and column within its subnetwork block (and over channels).
// Regions outside every subnetwork score 0.
inline BiomarkerReport biomarker_saliency(const Model& model, const Dataset& data, const SemanticPriorBank* bank) {
  check_compatible(model, data);
  const Partition& part = data.partition;
  std::vector<double> total(data.n_regions, 0.0);
  std::size_t used = 0;
  for (const Connectome& c : data.samples) {
    ad::Tape tape;
    const auto w = bind_weights(tape, model.weights, false);
    const auto blocks = bind_blocks(tape, c, part, true);
    const ForwardPass f = forward(blocks, w, bind_bank(tape, bank), model.config);
    const Tensor& z = f.logits.value();
    const int predicted = z[1] > z[0] ? 1 : 0;
    if (predicted != c.label) continue;
    Tensor pick(1, kNumClasses);
    pick[static_cast<std::size_t>(c.label)] = 1.0;
    const ad::Var true_logit = ad::sum(ad::mul(f.logits, tape.constant(pick)));
    const ad::Gradients g = tape.backward(true_logit);
    for (std::size_t k = 0; k < part.size(); ++k) {
      const auto& idx = part.regions[k];
      for (const ad::Var& b : blocks[k]) {
        const Tensor& grad = g[b];
        for (std::size_t i = 0; i < idx.size(); ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < idx.size(); ++j) s += std::abs(grad(i, j)) + std::abs(grad(j, i));
          total[idx[i]] += s;
        }
      }
    }
    ++used;
  }
  if (used == 0) throw DomainError("biomarker_saliency: no correctly classified samples");

  BiomarkerReport report;
  report.samples_used = used;
  for (std::size_t r = 0; r < data.n_regions; ++r) {
    const auto k = part.subnetwork_of(r);
    report.regions.push_back({r, part.region_name(r), k ? part.names[*k] : std::string{},
                              total[r] / static_cast<double>(used)});
  }
  std::stable_sort(report.regions.begin(), report.regions.end(),
                   [](const RegionSaliency& a, const RegionSaliency& b) { return a.score > b.score; });
  return report;
}

}  // namespace kdbrain::interpret
