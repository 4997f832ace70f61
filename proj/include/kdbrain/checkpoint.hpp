#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kdbrain/graphdata.hpp"
#include "kdbrain/priors.hpp"
#include "kdbrain/train.hpp"

namespace kdbrain {

inline constexpr const char* kCheckpointFormat = "kdbrain-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline ordered_json to_json(const ModelConfig& c) {
  ordered_json j;
  j["c_out"] = c.c_out;
  j["h"] = c.fuse_dim;
  j["d"] = c.embed_dim;
  j["d_h"] = c.classifier_hidden;
  j["q"] = c.orders;
  j["lambda_sp"] = c.prior_strength;
  return j;
}

inline ordered_json to_json(const TrainConfig& c) {
  ordered_json j = to_json(c.model);
  j["beta"] = c.beta;
  j["learning_rate"] = c.adam.learning_rate;
  j["adam_beta1"] = c.adam.beta1;
  j["adam_beta2"] = c.adam.beta2;
  j["adam_epsilon"] = c.adam.epsilon;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["pmc_orders"] = to_string(c.pmc_orders);
  return j;
}

inline TrainConfig train_config_from_json(const ordered_json& j, const std::string& where) {
  using detail::require_field;
  TrainConfig c;
  c.model.c_out = require_field<std::size_t>(j, "c_out", where);
  c.model.fuse_dim = require_field<std::size_t>(j, "h", where);
  c.model.embed_dim = require_field<std::size_t>(j, "d", where);
  c.model.classifier_hidden = require_field<std::size_t>(j, "d_h", where);
  c.model.orders = require_field<int>(j, "q", where);
  c.model.prior_strength = require_field<double>(j, "lambda_sp", where);
  c.beta = require_field<double>(j, "beta", where);
  c.adam.learning_rate = require_field<double>(j, "learning_rate", where);
  c.adam.beta1 = require_field<double>(j, "adam_beta1", where);
  c.adam.beta2 = require_field<double>(j, "adam_beta2", where);
  c.adam.epsilon = require_field<double>(j, "adam_epsilon", where);
  c.epochs = require_field<std::size_t>(j, "epochs", where);
  c.batch_size = require_field<std::size_t>(j, "batch_size", where);
  c.seed = require_field<std::uint64_t>(j, "seed", where);
  c.pmc_orders = parse_pmc_orders(require_field<std::string>(j, "pmc_orders", where));
  validate(c);
  return c;
}

inline ordered_json tensor_to_json(const Tensor& t) {
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const auto r = t.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

inline Tensor tensor_from_json(const ordered_json& j, std::size_t rows, std::size_t cols, const std::string& where) {
  if (!j.is_array() || j.size() != rows) {
    throw ValidationError(where + ": expected " + std::to_string(rows) + " rows of shape " +
                          Tensor::shape_string(rows, cols));
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& r : j) {
    if (!r.is_array() || r.size() != cols) {
      throw ValidationError(where + ": expected rows of " + std::to_string(cols) + " values");
    }
    for (const auto& v : r) {
      if (!v.is_number()) throw ValidationError(where + ": non-numeric entry " + v.dump());
      data.push_back(v.get<double>());
    }
  }
  Tensor t(rows, cols, std::move(data));
  if (!t.all_finite()) throw ValidationError(where + ": non-finite entry");
  return t;
}

inline ordered_json weights_to_json(const ModelWeights<Tensor>& w) {
  ordered_json j = ordered_json::object();
  for_each_weight(w, [&](const std::string& name, const Tensor& t) { j[name] = tensor_to_json(t); });
  return j;
}

// Fills `w` (already shaped) from a JSON object keyed by weight name.
inline void weights_from_json(const ordered_json& j, ModelWeights<Tensor>& w, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object of named tensors");
  std::size_t expected = 0;
  for_each_weight(w, [&](const std::string& name, Tensor& t) {
    ++expected;
    if (!j.contains(name)) throw ValidationError(where + ": missing tensor '" + name + "'");
    t = tensor_from_json(j.at(name), t.rows(), t.cols(), where + "." + name);
  });
  if (j.size() != expected) {
    throw ValidationError(where + ": unexpected extra tensors");
  }
}

inline ordered_json to_json(const ModelState& s) {
  ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = to_json(s.config);
  ordered_json topo;
  topo["subnetworks"] = s.model.topology.names;
  topo["sizes"] = s.model.topology.sizes;
  topo["n_channels"] = s.model.topology.n_channels;
  j["topology"] = std::move(topo);
  j["semantic_prior"] = s.bank ? to_json(*s.bank) : ordered_json(nullptr);
  j["prior_interaction"] = s.prior ? to_json(*s.prior) : ordered_json(nullptr);
  j["parameters"] = weights_to_json(s.model.weights);
  ordered_json opt;
  opt["step"] = s.optimizer.step;
  opt["first_moment"] = weights_to_json(s.optimizer.first_moment);
  opt["second_moment"] = weights_to_json(s.optimizer.second_moment);
  j["optimizer"] = std::move(opt);
  return j;
}

inline std::string checkpoint_text(const ModelState& s) { return to_json(s).dump(1) + "\n"; }

inline void save_checkpoint(const ModelState& s, const std::filesystem::path& path) {
  write_text_file(path, checkpoint_text(s));
}

inline ModelState checkpoint_from_json(const ordered_json& j) {
  using detail::require_field;
  const std::string where = "checkpoint";
  if (!j.is_object()) throw ValidationError("checkpoint: top level must be an object");
  if (require_field<std::string>(j, "format", where) != kCheckpointFormat) {
    throw ValidationError("checkpoint: field 'format' is not " + std::string(kCheckpointFormat));
  }
  const int version = require_field<int>(j, "version", where);
  if (version != kCheckpointVersion) {
    throw ValidationError("checkpoint: field 'version' = " + std::to_string(version) + " is unsupported");
  }
  if (!j.contains("config")) throw ValidationError("checkpoint: missing field 'config'");
  ModelState s;
  s.config = train_config_from_json(j.at("config"), "checkpoint.config");

  if (!j.contains("topology")) throw ValidationError("checkpoint: missing field 'topology'");
  const auto& t = j.at("topology");
  Topology topo;
  topo.names = require_field<std::vector<std::string>>(t, "subnetworks", "checkpoint.topology");
  topo.sizes = require_field<std::vector<std::size_t>>(t, "sizes", "checkpoint.topology");
  topo.n_channels = require_field<std::size_t>(t, "n_channels", "checkpoint.topology");
  if (topo.names.size() != topo.sizes.size() || topo.names.empty()) {
    throw ValidationError("checkpoint.topology: field 'sizes' must have one entry per subnetwork");
  }

  s.model.topology = topo;
  s.model.config = s.config.model;
  s.model.weights = zero_weights(topo, s.config.model);
  if (!j.contains("parameters")) throw ValidationError("checkpoint: missing field 'parameters'");
  weights_from_json(j.at("parameters"), s.model.weights, "checkpoint.parameters");

  if (!j.contains("optimizer")) throw ValidationError("checkpoint: missing field 'optimizer'");
  const auto& opt = j.at("optimizer");
  s.optimizer = make_adam_state(topo, s.config.model);
  s.optimizer.step = require_field<std::uint64_t>(opt, "step", "checkpoint.optimizer");
  if (!opt.contains("first_moment") || !opt.contains("second_moment")) {
    throw ValidationError("checkpoint.optimizer: missing field 'first_moment' or 'second_moment'");
  }
  weights_from_json(opt.at("first_moment"), s.optimizer.first_moment, "checkpoint.optimizer.first_moment");
  weights_from_json(opt.at("second_moment"), s.optimizer.second_moment, "checkpoint.optimizer.second_moment");

  if (j.contains("semantic_prior") && !j.at("semantic_prior").is_null()) {
    const auto& b = j.at("semantic_prior");
    SemanticPriorBank bank;
    bank.disorder = b.value("disorder", std::string{});
    if (!b.contains("subnetworks") || !b.at("subnetworks").is_object()) {
      throw ValidationError("checkpoint.semantic_prior: missing field 'subnetworks'");
    }
    std::vector<double> data;
    for (const auto& [name, vec] : b.at("subnetworks").items()) {
      bank.names.push_back(name);
      const Tensor row = tensor_from_json(ordered_json::array({vec}), 1, s.config.model.embed_dim,
                                          "checkpoint.semantic_prior." + name);
      data.insert(data.end(), row.values().begin(), row.values().end());
    }
    bank.embeddings = Tensor(bank.names.size(), s.config.model.embed_dim, std::move(data));
    s.bank = align_bank(bank, topo.names, s.config.model.embed_dim);
  }
  if (j.contains("prior_interaction") && !j.at("prior_interaction").is_null()) {
    const auto& p = j.at("prior_interaction");
    PriorInteraction prior;
    prior.names = require_field<std::vector<std::string>>(p, "subnetworks", "checkpoint.prior_interaction");
    if (!p.contains("matrix")) throw ValidationError("checkpoint.prior_interaction: missing field 'matrix'");
    prior.matrix = tensor_from_json(p.at("matrix"), prior.names.size(), prior.names.size(),
                                    "checkpoint.prior_interaction.matrix");
    validate_prior_interaction(prior);
    s.prior = align_prior(prior, topo.names);
  }
  if (s.config.model.prior_strength > 0.0 && !s.bank) {
    throw ValidationError("checkpoint: lambda_sp > 0 but field 'semantic_prior' is empty");
  }
  return s;
}

inline ModelState load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_json_file(path, "checkpoint"));
}

inline void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::string text = "epoch,ce,pmc,acc\n";
  for (const auto& r : history) {
    text += std::to_string(r.epoch) + "," + format_double(r.ce) + "," + (r.pmc ? format_double(*r.pmc) : "NA") +
            "," + format_double(r.accuracy) + "\n";
  }
  write_text_file(path, text);
}

}  // namespace kdbrain
