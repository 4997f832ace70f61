#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "kdbrain/errors.hpp"
#include "kdbrain/graphdata.hpp"
#include "kdbrain/tensor.hpp"

namespace kdbrain {

// One fixed d-dimensional description embedding per subnetwork (row k belongs to names[k]).
struct SemanticPriorBank {
  std::string disorder;
  std::vector<std::string> names;
  Tensor embeddings;  // |T| x d

  std::size_t dim() const { return embeddings.cols(); }
};

// Row-stochastic |T| x |T| target for the learned interaction distribution.
struct PriorInteraction {
  std::vector<std::string> names;
  Tensor matrix;
};

inline constexpr double kPriorRowTolerance = 1e-6;

// Human-readable difference of two name sets, or empty when they agree.
inline std::string name_set_diff(const std::vector<std::string>& expected, const std::vector<std::string>& got) {
  std::vector<std::string> missing;
  std::vector<std::string> extra;
  for (const auto& n : expected)
    if (std::find(got.begin(), got.end(), n) == got.end()) missing.push_back(n);
  for (const auto& n : got)
    if (std::find(expected.begin(), expected.end(), n) == expected.end()) extra.push_back(n);
  if (missing.empty() && extra.empty() && expected.size() == got.size()) return {};
  const auto join = [](const std::vector<std::string>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
    return s + "]";
  };
  if (missing.empty() && extra.empty()) return "duplicate names in " + join(got);
  return "missing " + join(missing) + ", unknown " + join(extra);
}

inline void validate_prior_interaction(const PriorInteraction& p) {
  const std::size_t t = p.names.size();
  if (p.matrix.rows() != t || p.matrix.cols() != t) {
    throw ValidationError("prior interaction: matrix " + p.matrix.shape_string() + " does not match " +
                          std::to_string(t) + " subnetworks");
  }
  for (std::size_t k = 0; k < t; ++k) {
    double total = 0.0;
    for (std::size_t j = 0; j < t; ++j) {
      const double v = p.matrix(k, j);
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw ValidationError("prior interaction: entry (" + p.names[k] + ", " + p.names[j] + ") = " +
                              format_double(v) + " outside [0,1]");
      }
      total += v;
    }
    if (std::abs(total - 1.0) > kPriorRowTolerance) {
      throw ValidationError("prior interaction: row '" + p.names[k] + "' sums to " + format_double(total));
    }
  }
}

inline void validate_semantic_bank(const SemanticPriorBank& b) {
  if (b.embeddings.rows() != b.names.size()) {
    throw ValidationError("semantic prior bank: " + std::to_string(b.embeddings.rows()) + " rows for " +
                          std::to_string(b.names.size()) + " names");
  }
  if (!b.embeddings.all_finite()) throw ValidationError("semantic prior bank: non-finite entry");
}

// Reorders rows (and columns, for square matrices) from `from` order to `to` order.
inline Tensor reorder_by_names(const Tensor& m, const std::vector<std::string>& from,
                               const std::vector<std::string>& to, bool square) {
  std::vector<std::size_t> perm;
  for (const auto& n : to) perm.push_back(static_cast<std::size_t>(std::find(from.begin(), from.end(), n) - from.begin()));
  Tensor out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(perm[i], square ? perm[j] : j);
  return out;
}

inline SemanticPriorBank align_bank(const SemanticPriorBank& b, const std::vector<std::string>& partition_names,
                                    std::size_t dim) {
  if (auto diff = name_set_diff(partition_names, b.names); !diff.empty()) {
    throw ValidationError("semantic prior bank does not match partition: " + diff);
  }
  if (b.dim() != dim) {
    throw ValidationError("semantic prior bank: dimension " + std::to_string(b.dim()) + " but model uses d = " +
                          std::to_string(dim));
  }
  return {b.disorder, partition_names, reorder_by_names(b.embeddings, b.names, partition_names, false)};
}

inline PriorInteraction align_prior(const PriorInteraction& p, const std::vector<std::string>& partition_names) {
  if (auto diff = name_set_diff(partition_names, p.names); !diff.empty()) {
    throw ValidationError("prior interaction does not match partition: " + diff);
  }
  return {partition_names, reorder_by_names(p.matrix, p.names, partition_names, true)};
}

// {"disorder", "dim", "subnetworks": {name: [d floats]}}
inline SemanticPriorBank load_semantic_bank(const std::filesystem::path& path) {
  const ordered_json j = read_json_file(path, "semantic prior bank");
  const std::string where = "semantic prior bank " + path.string();
  SemanticPriorBank b;
  b.disorder = j.value("disorder", std::string{});
  if (!j.contains("subnetworks") || !j.at("subnetworks").is_object()) {
    throw ValidationError(where + ": missing object field 'subnetworks'");
  }
  const auto dim = detail::require_field<std::size_t>(j, "dim", where);
  std::vector<double> data;
  for (const auto& [name, vec] : j.at("subnetworks").items()) {
    std::vector<double> row;
    try {
      row = vec.get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(where + ": subnetwork '" + name + "' is not a list of numbers");
    }
    if (row.size() != dim) {
      throw ValidationError(where + ": subnetwork '" + name + "' has " + std::to_string(row.size()) +
                            " values, dim = " + std::to_string(dim));
    }
    b.names.push_back(name);
    data.insert(data.end(), row.begin(), row.end());
  }
  b.embeddings = Tensor(b.names.size(), dim, std::move(data));
  validate_semantic_bank(b);
  return b;
}

inline ordered_json to_json(const SemanticPriorBank& b) {
  ordered_json j;
  j["disorder"] = b.disorder;
  j["dim"] = b.dim();
  ordered_json subs = ordered_json::object();
  for (std::size_t k = 0; k < b.names.size(); ++k) {
    const auto r = b.embeddings.row(k);
    subs[b.names[k]] = std::vector<double>(r.begin(), r.end());
  }
  j["subnetworks"] = std::move(subs);
  return j;
}

// {"subnetworks": [names], "matrix": [[row-stochastic floats]]}
inline PriorInteraction load_prior_interaction(const std::filesystem::path& path) {
  const ordered_json j = read_json_file(path, "prior interaction");
  const std::string where = "prior interaction " + path.string();
  PriorInteraction p;
  p.names = detail::require_field<std::vector<std::string>>(j, "subnetworks", where);
  const auto rows = detail::require_field<std::vector<std::vector<double>>>(j, "matrix", where);
  std::vector<double> data;
  for (const auto& r : rows) {
    if (r.size() != p.names.size()) {
      throw ValidationError(where + ": matrix row has " + std::to_string(r.size()) + " entries, expected " +
                            std::to_string(p.names.size()));
    }
    data.insert(data.end(), r.begin(), r.end());
  }
  p.matrix = Tensor(rows.size(), p.names.size(), std::move(data));
  validate_prior_interaction(p);
  return p;
}

inline ordered_json to_json(const PriorInteraction& p) {
  ordered_json j;
  j["subnetworks"] = p.names;
  ordered_json rows = ordered_json::array();
  for (std::size_t k = 0; k < p.matrix.rows(); ++k) {
    const auto r = p.matrix.row(k);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["matrix"] = std::move(rows);
  return j;
}

// Stand-in prior bank for synthetic runs: seeded Gaussian rows with unit expected norm.
inline SemanticPriorBank random_semantic_bank(const std::vector<std::string>& names, std::size_t dim,
                                              std::uint64_t seed, std::string disorder = "synthetic") {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  Tensor e(names.size(), dim);
  for (double& v : e.data()) v = dist(rng);
  return {std::move(disorder), names, std::move(e)};
}

// Prior matching the planted coupling: DMN puts `coupling` mass on CEN and CEN on
// DMN, the remainder spread evenly; other rows are uniform.
inline PriorInteraction coupling_prior(const std::vector<std::string>& names, double coupling = 0.8) {
  const std::size_t t = names.size();
  PriorInteraction p{names, Tensor(t, t, 1.0 / static_cast<double>(t))};
  const auto find = [&](const char* n) {
    return static_cast<std::size_t>(std::find(names.begin(), names.end(), n) - names.begin());
  };
  const std::size_t dmn = find("DMN");
  const std::size_t cen = find("CEN");
  if (dmn < t && cen < t && t > 1) {
    for (auto [row, target] : {std::pair{dmn, cen}, std::pair{cen, dmn}}) {
      for (std::size_t j = 0; j < t; ++j)
        p.matrix(row, j) = j == target ? coupling : (1.0 - coupling) / static_cast<double>(t - 1);
    }
  }
  return p;
}

}  // namespace kdbrain
