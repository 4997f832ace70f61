#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "kdbrain/errors.hpp"

namespace kdbrain {

// Dense row-major matrix of doubles. Vectors are stored as 1 x n rows.
class Tensor {
 public:
  Tensor() = default;

  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("tensor: " + std::to_string(data_.size()) +
                           " values do not fill shape " + shape_string(rows_, cols_));
    }
  }

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("tensor: ragged initializer");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor(r, c, std::move(data));
  }

  static Tensor row_vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor(1, n, std::move(values));
  }

  static Tensor column_vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor(n, 1, std::move(values));
  }

  static Tensor identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::string shape_string() const { return shape_string(rows_, cols_); }
  static std::string shape_string(std::size_t r, std::size_t c) {
    return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
  }
  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Plain (untaped) kernels. The autodiff ops are built on these.
namespace kernels {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree " + a.shape_string() + " x " +
                         b.shape_string());
  }
  Tensor out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p);
      const auto b_row = b.row(p);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aip * b_row[j];
    }
  }
  return out;
}

// a^T * b without materialising the transpose.
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: inner dimensions disagree " + a.shape_string() + "^T x " +
                         b.shape_string());
  }
  Tensor out(a.cols(), b.cols());
  for (std::size_t p = 0; p < a.rows(); ++p) {
    const auto a_row = a.row(p);
    const auto b_row = b.row(p);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double api = a_row[i];
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += api * b_row[j];
    }
  }
  return out;
}

// a * b^T
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: inner dimensions disagree " + a.shape_string() + " x " +
                         b.shape_string() + "^T");
  }
  Tensor out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto a_row = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto b_row = b.row(j);
      double acc = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) acc += a_row[p] * b_row[p];
      out(i, j) = acc;
    }
  }
  return out;
}

inline Tensor transpose(const Tensor& a) {
  Tensor out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline void add_into(Tensor& acc, const Tensor& b) {
  require_same_shape(acc, b, "add_into");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += b[i];
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

inline Tensor scale(const Tensor& a, double c) {
  Tensor out = a;
  for (double& v : out.data()) v *= c;
  return out;
}

inline Tensor leaky_relu(const Tensor& a, double slope) {
  Tensor out = a;
  for (double& v : out.data()) v = v >= 0.0 ? v : slope * v;
  return out;
}

inline Tensor softmax_rows(const Tensor& logits) {
  Tensor out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto in = logits.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (double& v : o) v /= total;
  }
  return out;
}

inline Tensor mean_rows(const Tensor& a) {
  if (a.rows() == 0 || a.cols() == 0) {
    throw DomainError("mean_rows: empty tensor " + a.shape_string());
  }
  Tensor out(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += r[j];
  }
  const double inv = 1.0 / static_cast<double>(a.rows());
  for (double& v : out.data()) v *= inv;
  return out;
}

inline double sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

}  // namespace kernels
}  // namespace kdbrain
