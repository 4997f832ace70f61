#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kdbrain/errors.hpp"
#include "kdbrain/tensor.hpp"

namespace kdbrain {

using ordered_json = nlohmann::ordered_json;

// One subject: C_in square connectivity channels plus a class label (0 control, 1 patient).
struct Connectome {
  std::string id;
  int label = 0;
  std::vector<Tensor> channels;

  std::size_t n_regions() const { return channels.empty() ? 0 : channels.front().rows(); }
};

// Named, pairwise-disjoint groups of regions. Regions outside every group are
// ignored by the model.
struct Partition {
  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> regions;
  std::vector<std::string> region_labels;  // empty, or one per region
  std::size_t n_regions = 0;

  std::size_t size() const { return names.size(); }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> out;
    for (const auto& r : regions) out.push_back(r.size());
    return out;
  }

  std::optional<std::size_t> index_of(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names.begin());
  }

  std::optional<std::size_t> subnetwork_of(std::size_t region) const {
    for (std::size_t k = 0; k < regions.size(); ++k)
      if (std::find(regions[k].begin(), regions[k].end(), region) != regions[k].end()) return k;
    return std::nullopt;
  }

  std::vector<std::uint8_t> mask(std::size_t k) const {
    std::vector<std::uint8_t> m(n_regions, 0);
    for (std::size_t r : regions.at(k)) m[r] = 1;
    return m;
  }

  std::string region_name(std::size_t region) const {
    if (region < region_labels.size()) return region_labels[region];
    return "R" + std::to_string(region);
  }
};

inline void validate_partition(const Partition& p) {
  if (p.names.empty()) throw ValidationError("partition: no subnetworks defined");
  if (p.names.size() != p.regions.size()) throw ValidationError("partition: names/regions count mismatch");
  if (!p.region_labels.empty() && p.region_labels.size() != p.n_regions) {
    throw ValidationError("partition: " + std::to_string(p.region_labels.size()) + " region labels for " +
                          std::to_string(p.n_regions) + " regions");
  }
  std::vector<int> owner(p.n_regions, -1);
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (std::count(p.names.begin(), p.names.end(), p.names[k]) > 1) {
      throw ValidationError("partition: duplicate subnetwork name '" + p.names[k] + "'");
    }
    if (p.regions[k].size() < 2) {
      throw ValidationError("partition: subnetwork '" + p.names[k] + "' selects " +
                            std::to_string(p.regions[k].size()) + " region(s); at least 2 required");
    }
    for (std::size_t r : p.regions[k]) {
      if (r >= p.n_regions) {
        throw ValidationError("partition: subnetwork '" + p.names[k] + "' references region " +
                              std::to_string(r) + " but n_regions = " + std::to_string(p.n_regions));
      }
      if (owner[r] >= 0) {
        throw ValidationError("partition: region " + std::to_string(r) + " assigned to both '" +
                              p.names[static_cast<std::size_t>(owner[r])] + "' and '" + p.names[k] + "'");
      }
      owner[r] = static_cast<int>(k);
    }
  }
}

// Principal submatrix of every channel on the rows/columns of subnetwork k,
// in the partition's region order.
inline std::vector<Tensor> extract_subnetwork(const Connectome& c, const Partition& p, std::size_t k) {
  if (k >= p.size()) {
    throw ValidationError("extract_subnetwork: index " + std::to_string(k) + " out of range for " +
                          std::to_string(p.size()) + " subnetworks");
  }
  const auto& idx = p.regions[k];
  if (idx.size() < 2) {
    throw ValidationError("extract_subnetwork: subnetwork '" + p.names[k] + "' selects fewer than 2 regions");
  }
  std::vector<Tensor> out;
  out.reserve(c.channels.size());
  for (const Tensor& a : c.channels) {
    Tensor block(idx.size(), idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < idx.size(); ++j) block(i, j) = a(idx[i], idx[j]);
    out.push_back(std::move(block));
  }
  return out;
}

// Inverse of extract_subnetwork for one channel: places the block back into an
// N x N zero matrix.
inline Tensor embed_subnetwork(const Tensor& block, const Partition& p, std::size_t k) {
  const auto& idx = p.regions.at(k);
  if (block.rows() != idx.size() || block.cols() != idx.size()) {
    throw DimensionError("embed_subnetwork: block " + block.shape_string() + " does not match subnetwork size " +
                         std::to_string(idx.size()));
  }
  Tensor full(p.n_regions, p.n_regions);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) full(idx[i], idx[j]) = block(i, j);
  return full;
}

struct Dataset {
  Partition partition;
  std::vector<Connectome> samples;
  std::size_t n_regions = 0;
  std::size_t n_channels = 1;

  std::size_t size() const { return samples.size(); }

  std::size_t count_label(int label) const {
    return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(),
                                                  [label](const Connectome& c) { return c.label == label; }));
  }

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
  }
};

// Zeroes any nonzero diagonal entry, reporting each affected sample once.
inline void zero_diagonal(Connectome& c, std::ostream* warnings) {
  bool touched = false;
  for (Tensor& a : c.channels)
    for (std::size_t i = 0; i < a.rows(); ++i)
      if (a(i, i) != 0.0) {
        a(i, i) = 0.0;
        touched = true;
      }
  if (touched && warnings) *warnings << "warning: sample '" << c.id << "': nonzero diagonal zeroed\n";
}

inline void validate_dataset(const Dataset& d) {
  validate_partition(d.partition);
  if (d.partition.n_regions != d.n_regions) {
    throw ValidationError("dataset: partition covers " + std::to_string(d.partition.n_regions) +
                          " regions but n_regions = " + std::to_string(d.n_regions));
  }
  if (d.n_channels == 0) throw ValidationError("dataset: n_channels must be >= 1");
  for (const Connectome& c : d.samples) {
    if (c.label != 0 && c.label != 1) {
      throw ValidationError("sample '" + c.id + "': label " + std::to_string(c.label) + " not in {0,1}");
    }
    if (c.channels.size() != d.n_channels) {
      throw ValidationError("sample '" + c.id + "': " + std::to_string(c.channels.size()) +
                            " channel(s), expected " + std::to_string(d.n_channels));
    }
    for (std::size_t ch = 0; ch < c.channels.size(); ++ch) {
      const Tensor& a = c.channels[ch];
      if (a.rows() != d.n_regions || a.cols() != d.n_regions) {
        throw ValidationError("sample '" + c.id + "' channel " + std::to_string(ch) + ": matrix " +
                              a.shape_string() + ", expected " + Tensor::shape_string(d.n_regions, d.n_regions));
      }
      for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
          if (!std::isfinite(a(i, j))) {
            throw ValidationError("sample '" + c.id + "' channel " + std::to_string(ch) +
                                  ": non-finite entry at row " + std::to_string(i) + ", column " +
                                  std::to_string(j));
          }
    }
  }
}

// ---- CSV matrices ---------------------------------------------------------

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Reads N rows of N comma-separated floats. `context` prefixes error messages.
inline Tensor read_matrix_csv(const std::filesystem::path& path, const std::string& context) {
  std::ifstream in(path);
  if (!in) throw ValidationError(context + ": cannot open matrix file " + path.string());
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t count = 0;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const char* begin = cell.c_str();
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      while (end && (*end == ' ' || *end == '\t')) ++end;
      if (end == begin || (end && *end != '\0')) {
        throw ValidationError(context + ": " + path.string() + " row " + std::to_string(rows) + ", column " +
                              std::to_string(count) + ": cannot parse '" + cell + "'");
      }
      if (!std::isfinite(v)) {
        throw ValidationError(context + ": " + path.string() + ": non-finite entry at row " +
                              std::to_string(rows) + ", column " + std::to_string(count));
      }
      data.push_back(v);
      ++count;
    }
    if (rows == 0) cols = count;
    if (count != cols) {
      throw ValidationError(context + ": " + path.string() + " row " + std::to_string(rows) + " has " +
                            std::to_string(count) + " values, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows != cols) {
    throw ValidationError(context + ": " + path.string() + " is not square (" + std::to_string(rows) + " rows, " +
                          std::to_string(cols) + " columns)");
  }
  return Tensor(rows, cols, std::move(data));
}

inline void write_matrix_csv(const std::filesystem::path& path, const Tensor& a) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (j) out << ',';
      out << format_double(a(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

// ---- manifest -------------------------------------------------------------

inline ordered_json read_json_file(const std::filesystem::path& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ValidationError(what + ": cannot open " + path.string());
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(what + ": " + path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

namespace detail {

template <class T>
T require_field(const ordered_json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type");
  }
}

inline std::vector<std::size_t> parse_region_group(const ordered_json& group, const std::string& name,
                                                   std::size_t n_regions) {
  const std::string where = "manifest: partition '" + name + "'";
  std::vector<std::size_t> regions;
  if (group.is_object()) {
    // {"mask": [0/1 x N]}
    const auto mask = group.contains("mask") ? group.at("mask") : ordered_json();
    if (!mask.is_array() || mask.size() != n_regions) {
      throw ValidationError(where + ": mask must be an array of " + std::to_string(n_regions) + " entries");
    }
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i].is_number()) throw ValidationError(where + ": non-binary mask entry at index " + std::to_string(i));
      const double v = mask[i].get<double>();
      if (v != 0.0 && v != 1.0) {
        throw ValidationError(where + ": non-binary mask entry " + mask[i].dump() + " at index " +
                              std::to_string(i));
      }
      if (v == 1.0) regions.push_back(i);
    }
    return regions;
  }
  if (!group.is_array()) throw ValidationError(where + ": expected a list of region indices or {\"mask\": [...]}");
  for (const auto& v : group) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ValidationError(where + ": invalid region index " + v.dump());
    }
    const auto r = static_cast<std::size_t>(v.get<long long>());
    if (std::find(regions.begin(), regions.end(), r) != regions.end()) {
      throw ValidationError(where + ": region " + std::to_string(r) + " listed twice");
    }
    regions.push_back(r);
  }
  return regions;
}

inline std::string sanitize_file_stem(const std::string& id) {
  std::string out = id;
  for (char& ch : out) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '-' ||
                    ch == '_' || ch == '.';
    if (!ok) ch = '_';
  }
  return out.empty() ? std::string("sample") : out;
}

}  // namespace detail

inline Partition parse_partition(const ordered_json& manifest, std::size_t n_regions) {
  if (!manifest.contains("partition") || !manifest.at("partition").is_object()) {
    throw ValidationError("manifest: missing object field 'partition'");
  }
  Partition p;
  p.n_regions = n_regions;
  for (const auto& [name, group] : manifest.at("partition").items()) {
    p.names.push_back(name);
    p.regions.push_back(detail::parse_region_group(group, name, n_regions));
  }
  if (manifest.contains("region_labels")) {
    p.region_labels = detail::require_field<std::vector<std::string>>(manifest, "region_labels", "manifest");
  }
  validate_partition(p);
  return p;
}

inline Dataset load_dataset(const std::filesystem::path& manifest_path, std::ostream* warnings = &std::cerr) {
  const ordered_json m = read_json_file(manifest_path, "manifest");
  if (!m.is_object()) throw ValidationError("manifest: top level must be an object");
  Dataset d;
  d.n_regions = detail::require_field<std::size_t>(m, "n_regions", "manifest");
  d.n_channels = m.contains("n_channels") ? detail::require_field<std::size_t>(m, "n_channels", "manifest") : 1;
  d.partition = parse_partition(m, d.n_regions);

  if (!m.contains("samples") || !m.at("samples").is_array()) {
    throw ValidationError("manifest: missing array field 'samples'");
  }
  const auto base = manifest_path.parent_path();
  std::size_t index = 0;
  for (const auto& s : m.at("samples")) {
    const std::string where = "manifest: samples[" + std::to_string(index++) + "]";
    Connectome c;
    c.id = detail::require_field<std::string>(s, "id", where);
    const std::string ctx = "sample '" + c.id + "'";
    c.label = detail::require_field<int>(s, "label", ctx);
    if (!s.contains("matrix")) throw ValidationError(ctx + ": missing field 'matrix'");
    std::vector<std::string> paths;
    if (s.at("matrix").is_string()) {
      paths.push_back(s.at("matrix").get<std::string>());
    } else {
      paths = detail::require_field<std::vector<std::string>>(s, "matrix", ctx);
    }
    for (const auto& rel : paths) c.channels.push_back(read_matrix_csv(base / rel, ctx));
    zero_diagonal(c, warnings);
    d.samples.push_back(std::move(c));
  }
  validate_dataset(d);
  return d;
}

inline ordered_json partition_to_json(const Partition& p) {
  ordered_json part = ordered_json::object();
  for (std::size_t k = 0; k < p.size(); ++k) part[p.names[k]] = p.regions[k];
  return part;
}

// Writes `manifest.json` plus one CSV per sample channel under `dir/matrices`.
inline std::filesystem::path save_dataset(const Dataset& d, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  validate_dataset(d);
  std::error_code ec;
  fs::create_directories(dir / "matrices", ec);
  if (ec) throw IoError("cannot create " + (dir / "matrices").string() + ": " + ec.message());

  ordered_json m;
  m["n_regions"] = d.n_regions;
  m["n_channels"] = d.n_channels;
  m["partition"] = partition_to_json(d.partition);
  if (!d.partition.region_labels.empty()) m["region_labels"] = d.partition.region_labels;
  ordered_json samples = ordered_json::array();
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const Connectome& c = d.samples[i];
    const std::string stem = std::to_string(i) + "_" + detail::sanitize_file_stem(c.id);
    ordered_json paths = ordered_json::array();
    for (std::size_t ch = 0; ch < c.channels.size(); ++ch) {
      const std::string rel = "matrices/" + stem + (c.channels.size() > 1 ? "_c" + std::to_string(ch) : "") + ".csv";
      write_matrix_csv(dir / rel, c.channels[ch]);
      paths.push_back(rel);
    }
    ordered_json entry;
    entry["id"] = c.id;
    entry["label"] = c.label;
    entry["matrix"] = paths.size() == 1 ? paths[0] : paths;
    samples.push_back(std::move(entry));
  }
  m["samples"] = std::move(samples);
  const auto path = dir / "manifest.json";
  write_text_file(path, m.dump(2) + "\n");
  return path;
}

// Stratified shuffle split. Each class contributes round(fraction * n_class)
// samples to the first split; both splits keep manifest order.
inline std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("split: train fraction must lie strictly between 0 and 1");
  }
  std::mt19937_64 rng(seed);
  std::vector<bool> in_train(d.size(), false);
  for (int label : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (d.samples[i].label == label) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    if (n_train == 0 || n_train == idx.size()) {
      throw ValidationError("split: class " + std::to_string(label) + " (" + std::to_string(idx.size()) +
                            " samples) would be empty in one split at fraction " + format_double(train_fraction));
    }
    for (std::size_t i = 0; i < n_train; ++i) in_train[idx[i]] = true;
  }
  Dataset train{d.partition, {}, d.n_regions, d.n_channels};
  Dataset test{d.partition, {}, d.n_regions, d.n_channels};
  for (std::size_t i = 0; i < d.size(); ++i) (in_train[i] ? train : test).samples.push_back(d.samples[i]);
  return {std::move(train), std::move(test)};
}

}  // namespace kdbrain
