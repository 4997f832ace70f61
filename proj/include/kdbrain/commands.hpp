#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "kdbrain/checkpoint.hpp"
#include "kdbrain/graphdata.hpp"
#include "kdbrain/interpret.hpp"
#include "kdbrain/priors.hpp"
#include "kdbrain/selfcheck.hpp"
#include "kdbrain/synthgen.hpp"
#include "kdbrain/train.hpp"

// The CLI subcommands as library calls. Each writes its resolved
// configuration as config.json into its output directory.
namespace kdbrain::commands {

namespace fs = std::filesystem;

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

inline void write_json(const fs::path& path, const ordered_json& j) { write_text_file(path, j.dump(2) + "\n"); }

inline ordered_json path_or_null(const std::optional<fs::path>& p) {
  return p ? ordered_json(p->generic_string()) : ordered_json(nullptr);
}

// ---- generate ---------------------------------------------------------------

struct GenerateOptions {
  synth::SynthSpec spec;
  fs::path out_dir = "data";
  std::size_t prior_dim = 64;
  double prior_coupling = 0.8;
  std::optional<double> train_fraction;  // also write train/ and test/ splits
};

inline ordered_json to_json(const GenerateOptions& o) {
  ordered_json j;
  j["command"] = "generate";
  j["out"] = o.out_dir.generic_string();
  j["synth"] = synth::to_json(o.spec);
  j["prior_dim"] = o.prior_dim;
  j["prior_coupling"] = o.prior_coupling;
  j["train_fraction"] = o.train_fraction ? ordered_json(*o.train_fraction) : ordered_json(nullptr);
  return j;
}

// Writes manifest.json + matrices/, synth_spec.json, a seeded stand-in
// semantic_prior.json and a coupling prior_interaction.json.
inline Dataset run_generate(const GenerateOptions& o) {
  synth::validate(o.spec);
  if (o.prior_dim == 0) throw ValidationError("generate: prior dimension must be positive");
  if (!(o.prior_coupling >= 0.0 && o.prior_coupling <= 1.0)) {
    throw ValidationError("generate: prior coupling must lie in [0, 1]");
  }
  if (o.train_fraction && !(*o.train_fraction > 0.0 && *o.train_fraction < 1.0)) {
    throw ValidationError("generate: train fraction must lie strictly between 0 and 1");
  }
  const Dataset d = synth::generate(o.spec);
  std::optional<std::pair<Dataset, Dataset>> parts;
  if (o.train_fraction) parts = split(d, *o.train_fraction, o.spec.seed);

  ensure_directory(o.out_dir);
  save_dataset(d, o.out_dir);
  if (parts) {
    save_dataset(parts->first, o.out_dir / "train");
    save_dataset(parts->second, o.out_dir / "test");
  }
  write_json(o.out_dir / "synth_spec.json", synth::to_json(o.spec));
  write_json(o.out_dir / "semantic_prior.json", to_json(random_semantic_bank(o.spec.names, o.prior_dim, o.spec.seed)));
  write_json(o.out_dir / "prior_interaction.json", to_json(coupling_prior(o.spec.names, o.prior_coupling)));
  write_json(o.out_dir / "config.json", to_json(o));
  return d;
}

// ---- train --------------------------------------------------------------------

struct TrainOptions {
  TrainConfig config;
  fs::path dataset;
  std::optional<fs::path> semantic_prior;
  std::optional<fs::path> prior_interaction;
  fs::path out_dir = "run";
};

inline ordered_json to_json(const TrainOptions& o) {
  ordered_json j;
  j["command"] = "train";
  j["dataset"] = o.dataset.generic_string();
  j["semantic_prior"] = path_or_null(o.semantic_prior);
  j["prior_interaction"] = path_or_null(o.prior_interaction);
  j["out"] = o.out_dir.generic_string();
  j["train"] = to_json(o.config);
  return j;
}

inline TrainResult run_train(const TrainOptions& o, std::ostream* log = nullptr) {
  validate(o.config);
  const Dataset d = load_dataset(o.dataset);
  std::optional<SemanticPriorBank> bank;
  std::optional<PriorInteraction> prior;
  if (o.semantic_prior) bank = load_semantic_bank(*o.semantic_prior);
  if (o.prior_interaction) prior = load_prior_interaction(*o.prior_interaction);
  TrainResult r = train(d, bank ? &*bank : nullptr, prior ? &*prior : nullptr, o.config);

  ensure_directory(o.out_dir);
  save_checkpoint(r.state, o.out_dir / "checkpoint.json");
  write_history_csv(o.out_dir / "history.csv", r.history);
  write_json(o.out_dir / "config.json", to_json(o));
  if (log && !r.history.empty()) {
    const auto& last = r.history.back();
    *log << "trained " << last.epoch << " epochs: ce " << format_double(last.ce) << ", acc "
         << format_double(last.accuracy) << "\n";
  }
  return r;
}

// ---- evaluate -----------------------------------------------------------------

struct EvaluateOptions {
  fs::path checkpoint;
  fs::path dataset;
  fs::path out_dir = "eval";
};

inline ordered_json metrics_json(const Evaluation& ev) {
  ordered_json j;
  j["acc"] = ev.accuracy;
  j["auc"] = ev.auc ? ordered_json(*ev.auc) : ordered_json(nullptr);
  j["n"] = ev.labels.size();
  j["n_control"] = ev.n_control;
  j["n_patient"] = ev.n_patient;
  j["ce"] = ev.mean_ce;
  j["pmc"] = ev.mean_pmc ? ordered_json(*ev.mean_pmc) : ordered_json(nullptr);
  return j;
}

inline Evaluation run_evaluate(const EvaluateOptions& o) {
  const ModelState s = load_checkpoint(o.checkpoint);
  const Dataset d = load_dataset(o.dataset);
  const Evaluation ev = evaluate(s, d);
  ensure_directory(o.out_dir);
  write_json(o.out_dir / "metrics.json", metrics_json(ev));
  ordered_json cfg;
  cfg["command"] = "evaluate";
  cfg["checkpoint"] = o.checkpoint.generic_string();
  cfg["dataset"] = o.dataset.generic_string();
  cfg["out"] = o.out_dir.generic_string();
  cfg["train"] = to_json(s.config);
  write_json(o.out_dir / "config.json", cfg);
  return ev;
}

// ---- interpret ----------------------------------------------------------------

struct InterpretOptions {
  fs::path checkpoint;
  fs::path dataset;
  fs::path out_dir = "interpret";
  std::size_t top = 2;
  int label = 1;  // class whose mean trace is analysed
};

inline std::string class_name(int label) { return label == 1 ? "patient" : "control"; }

inline int parse_class(const std::string& s) {
  if (s == "patient" || s == "1") return 1;
  if (s == "control" || s == "0") return 0;
  throw ValidationError("unknown class '" + s + "' (expected patient or control)");
}

struct InterpretResult {
  std::vector<Tensor> trace;
  std::vector<interpret::Pathway> pathways;  // top-k per start, grouped by start
  std::vector<std::size_t> ranks;            // 1-based rank within its start group
  interpret::BiomarkerReport biomarkers;
};

inline InterpretResult run_interpret(const InterpretOptions& o) {
  if (o.top == 0) throw ValidationError("interpret: --top must be >= 1");
  const ModelState s = load_checkpoint(o.checkpoint);
  const Dataset d = load_dataset(o.dataset);
  const auto& names = d.partition.names;
  InterpretResult r;
  r.trace = interpret::mean_trace(s.model, d, s.bank_ptr(), o.label);
  for (const auto& start : names) {
    auto ranked = interpret::pathway_scores(r.trace, names, start);
    ranked.resize(std::min(o.top, ranked.size()));
    for (std::size_t i = 0; i < ranked.size(); ++i) r.ranks.push_back(i + 1);
    r.pathways.insert(r.pathways.end(), ranked.begin(), ranked.end());
  }
  r.biomarkers = interpret::biomarker_saliency(s.model, d, s.bank_ptr());

  ensure_directory(o.out_dir);
  const std::string tag = class_name(o.label);

  // Per-order mean attention, plus the strongest final-order interactions.
  ordered_json trace_json;
  trace_json["class"] = tag;
  trace_json["subnetworks"] = names;
  ordered_json orders = ordered_json::array();
  std::string trace_csv = "order,source,target,alpha\n";
  for (std::size_t l = 0; l < r.trace.size(); ++l) {
    orders.push_back(tensor_to_json(r.trace[l]));
    for (std::size_t k = 0; k < names.size(); ++k)
      for (std::size_t j = 0; j < names.size(); ++j)
        trace_csv += std::to_string(l + 1) + "," + names[k] + "," + names[j] + "," +
                     format_double(r.trace[l](k, j)) + "\n";
  }
  trace_json["alpha"] = std::move(orders);
  std::vector<std::pair<double, std::pair<std::size_t, std::size_t>>> strengths;
  const Tensor& final_alpha = r.trace.back();
  for (std::size_t k = 0; k < names.size(); ++k)
    for (std::size_t j = 0; j < names.size(); ++j) strengths.push_back({final_alpha(k, j), {k, j}});
  std::stable_sort(strengths.begin(), strengths.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  ordered_json top_interactions = ordered_json::array();
  for (std::size_t i = 0; i < std::min(o.top, strengths.size()); ++i) {
    ordered_json e;
    e["source"] = names[strengths[i].second.first];
    e["target"] = names[strengths[i].second.second];
    e["alpha"] = strengths[i].first;
    top_interactions.push_back(std::move(e));
  }
  trace_json["top_final_order_interactions"] = std::move(top_interactions);
  write_json(o.out_dir / ("trace_" + tag + ".json"), trace_json);
  write_text_file(o.out_dir / ("trace_" + tag + ".csv"), trace_csv);

  ordered_json pathways = ordered_json::array();
  std::string pathway_csv = "rank,pathway,score\n";
  for (std::size_t i = 0; i < r.pathways.size(); ++i) {
    const auto& p = r.pathways[i];
    const std::size_t rank = r.ranks[i];
    ordered_json e;
    e["start"] = names[p.steps.front()];
    e["rank"] = rank;
    e["pathway"] = interpret::pathway_string(p, names);
    e["score"] = p.score;
    pathways.push_back(std::move(e));
    pathway_csv += std::to_string(rank) + "," + interpret::pathway_string(p, names) + "," + format_double(p.score) + "\n";
  }
  ordered_json pathway_json;
  pathway_json["class"] = tag;
  pathway_json["q"] = r.trace.size();
  pathway_json["pathways"] = std::move(pathways);
  write_json(o.out_dir / ("pathways_" + tag + ".json"), pathway_json);
  write_text_file(o.out_dir / ("pathways_" + tag + ".csv"), pathway_csv);

  ordered_json regions = ordered_json::array();
  std::string bio_csv = "region,subnetwork,saliency\n";
  for (const auto& reg : r.biomarkers.regions) {
    ordered_json e;
    e["region"] = reg.name;
    e["index"] = reg.region;
    e["subnetwork"] = reg.subnetwork;
    e["saliency"] = reg.score;
    regions.push_back(std::move(e));
    bio_csv += reg.name + "," + reg.subnetwork + "," + format_double(reg.score) + "\n";
  }
  ordered_json bio_json;
  bio_json["samples_used"] = r.biomarkers.samples_used;
  bio_json["regions"] = std::move(regions);
  write_json(o.out_dir / "biomarkers.json", bio_json);
  write_text_file(o.out_dir / "biomarkers.csv", bio_csv);

  ordered_json cfg;
  cfg["command"] = "interpret";
  cfg["checkpoint"] = o.checkpoint.generic_string();
  cfg["dataset"] = o.dataset.generic_string();
  cfg["out"] = o.out_dir.generic_string();
  cfg["top"] = o.top;
  cfg["class"] = tag;
  cfg["train"] = to_json(s.config);
  write_json(o.out_dir / "config.json", cfg);
  return r;
}

// ---- gradcheck ----------------------------------------------------------------

struct GradcheckOptions {
  selfcheck::InstanceSpec instance;
  ad::GradCheckOptions check;
  std::optional<fs::path> out_dir;
};

inline ad::GradCheckReport run_gradcheck(const GradcheckOptions& o, std::ostream* log = nullptr) {
  validate(o.instance.model);
  if (!(o.check.step > 0.0)) throw ValidationError("gradcheck: step must be positive");
  if (!(o.check.tolerance > 0.0)) throw ValidationError("gradcheck: tolerance must be positive");
  const ad::GradCheckReport report = selfcheck::check_objective(o.instance, o.check);
  if (log) {
    for (const auto& p : report.parameters) {
      *log << (p.passed ? "PASS " : "FAIL ") << p.name << "  max rel err " << format_double(p.max_relative_error)
           << "\n";
    }
    *log << (report.passed ? "gradcheck passed" : "gradcheck FAILED") << " at tolerance "
         << format_double(report.tolerance) << "\n";
  }
  if (o.out_dir) {
    ensure_directory(*o.out_dir);
    ordered_json j;
    j["passed"] = report.passed;
    j["step"] = report.step;
    j["tolerance"] = report.tolerance;
    ordered_json params = ordered_json::array();
    for (const auto& p : report.parameters) {
      ordered_json e;
      e["name"] = p.name;
      e["max_relative_error"] = p.max_relative_error;
      e["max_absolute_error"] = p.max_absolute_error;
      e["passed"] = p.passed;
      params.push_back(std::move(e));
    }
    j["parameters"] = std::move(params);
    write_json(*o.out_dir / "gradcheck.json", j);
    ordered_json cfg;
    cfg["command"] = "gradcheck";
    cfg["seed"] = o.instance.seed;
    cfg["subnetworks"] = o.instance.subnetworks;
    cfg["regions_per_subnetwork"] = o.instance.regions_per_subnetwork;
    cfg["model"] = to_json(o.instance.model);
    cfg["beta"] = o.instance.beta;
    cfg["step"] = o.check.step;
    cfg["tolerance"] = o.check.tolerance;
    write_json(*o.out_dir / "config.json", cfg);
  }
  return report;
}

}  // namespace kdbrain::commands
