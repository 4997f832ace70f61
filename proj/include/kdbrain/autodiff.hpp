#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kdbrain/errors.hpp"
#include "kdbrain/tensor.hpp"

// Reverse-mode differentiation over a linear recording tape.
//
// Every op appends one record holding its output value and a closure that maps
// the output gradient onto its inputs. Records are appended in evaluation order,
// so walking the tape backwards is a reverse topological traversal and visits
// each record once.
namespace kdbrain::ad {

inline constexpr double kLeakySlope = 0.2;

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Handed to a record's backward closure.
class BackwardContext {
 public:
  BackwardContext(const Tensor& grad_out, const Tensor& output, std::span<const Tensor* const> inputs,
                  std::span<Tensor* const> input_grads)
      : grad_out_(grad_out), output_(output), inputs_(inputs), input_grads_(input_grads) {}

  const Tensor& grad_out() const { return grad_out_; }
  const Tensor& output() const { return output_; }
  const Tensor& input(std::size_t i) const { return *inputs_[i]; }
  bool wants(std::size_t i) const { return input_grads_[i] != nullptr; }
  void accumulate(std::size_t i, const Tensor& g) {
    if (Tensor* dst = input_grads_[i]) kernels::add_into(*dst, g);
  }

 private:
  const Tensor& grad_out_;
  const Tensor& output_;
  std::span<const Tensor* const> inputs_;
  std::span<Tensor* const> input_grads_;
};

using BackwardFn = std::function<void(BackwardContext&)>;

class Gradients {
 public:
  explicit Gradients(std::vector<Tensor> grads) : grads_(std::move(grads)) {}
  const Tensor& operator[](const Var& v) const { return grads_.at(v.id()); }

 private:
  std::vector<Tensor> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A differentiable leaf (a parameter, or an input whose saliency is wanted).
  Var leaf(Tensor value) { return push(std::move(value), {}, nullptr, true); }
  Var constant(Tensor value) { return push(std::move(value), {}, nullptr, false); }

  // Appends an op output. The record needs a gradient iff any input does.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
    bool needs = false;
    std::vector<std::size_t> ids;
    ids.reserve(inputs.size());
    for (const Var& in : inputs) {
      if (in.tape() != this) throw UsageError("autodiff: input recorded on a different tape");
      ids.push_back(in.id());
      needs = needs || nodes_[in.id()].needs_grad;
    }
    return push(std::move(value), std::move(ids), needs ? std::move(backward) : nullptr, needs);
  }

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  std::size_t size() const { return nodes_.size(); }

  Gradients backward(const Var& output) const {
    if (output.tape() != this) throw UsageError("backward: output belongs to another tape");
    const Tensor& out = nodes_[output.id()].value;
    if (out.rows() != 1 || out.cols() != 1) {
      throw UsageError("backward: output must be scalar, got " + out.shape_string());
    }
    std::vector<Tensor> grads(nodes_.size());
    std::vector<bool> touched(nodes_.size(), false);
    grads[output.id()] = Tensor(1, 1, 1.0);
    touched[output.id()] = true;

    std::vector<const Tensor*> in_values;
    std::vector<Tensor*> in_grads;
    for (std::size_t id = output.id() + 1; id-- > 0;) {
      const Node& node = nodes_[id];
      if (!touched[id] || !node.backward) continue;
      in_values.clear();
      in_grads.clear();
      for (std::size_t in : node.inputs) {
        in_values.push_back(&nodes_[in].value);
        if (nodes_[in].needs_grad) {
          if (!touched[in]) {
            grads[in] = Tensor(nodes_[in].value.rows(), nodes_[in].value.cols());
            touched[in] = true;
          }
          in_grads.push_back(&grads[in]);
        } else {
          in_grads.push_back(nullptr);
        }
      }
      BackwardContext ctx(grads[id], node.value, in_values, in_grads);
      node.backward(ctx);
    }
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
      if (!touched[id]) grads[id] = Tensor(nodes_[id].value.rows(), nodes_[id].value.cols());
    }
    return Gradients(std::move(grads));
  }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool needs_grad = false;
  };

  Var push(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward, bool needs_grad) {
    nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backward), needs_grad});
    return Var(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;  // deque: values stay put as the tape grows
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

inline Tape& tape_of(const Var& a) {
  if (!a.valid()) throw UsageError("autodiff: unbound variable");
  return *a.tape();
}

// ---- ops ----------------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  Tensor out = kernels::matmul(a.value(), b.value());
  return tape_of(a).record(std::move(out), {a, b}, [](BackwardContext& ctx) {
    if (ctx.wants(0)) ctx.accumulate(0, kernels::matmul_nt(ctx.grad_out(), ctx.input(1)));
    if (ctx.wants(1)) ctx.accumulate(1, kernels::matmul_tn(ctx.input(0), ctx.grad_out()));
  });
}

inline Var transpose(const Var& a) {
  return tape_of(a).record(kernels::transpose(a.value()), {a}, [](BackwardContext& ctx) {
    ctx.accumulate(0, kernels::transpose(ctx.grad_out()));
  });
}

inline Var add(const Var& a, const Var& b) {
  Tensor out = kernels::add(a.value(), b.value());
  return tape_of(a).record(std::move(out), {a, b}, [](BackwardContext& ctx) {
    ctx.accumulate(0, ctx.grad_out());
    ctx.accumulate(1, ctx.grad_out());
  });
}

inline Var mul(const Var& a, const Var& b) {
  Tensor out = kernels::mul(a.value(), b.value());
  return tape_of(a).record(std::move(out), {a, b}, [](BackwardContext& ctx) {
    if (ctx.wants(0)) ctx.accumulate(0, kernels::mul(ctx.grad_out(), ctx.input(1)));
    if (ctx.wants(1)) ctx.accumulate(1, kernels::mul(ctx.grad_out(), ctx.input(0)));
  });
}

inline Var scale(const Var& a, double c) {
  return tape_of(a).record(kernels::scale(a.value(), c), {a}, [c](BackwardContext& ctx) {
    ctx.accumulate(0, kernels::scale(ctx.grad_out(), c));
  });
}

// Derivative at exactly 0 is taken as 1.
inline Var leaky_relu(const Var& a, double slope = kLeakySlope) {
  return tape_of(a).record(kernels::leaky_relu(a.value(), slope), {a}, [slope](BackwardContext& ctx) {
    Tensor g = ctx.grad_out();
    const Tensor& x = ctx.input(0);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] < 0.0) g[i] *= slope;
    ctx.accumulate(0, g);
  });
}

inline Var softmax_rows(const Var& logits) {
  return tape_of(logits).record(kernels::softmax_rows(logits.value()), {logits}, [](BackwardContext& ctx) {
    // dL/dx_j = y_j * (g_j - sum_t g_t y_t), row by row.
    const Tensor& y = ctx.output();
    const Tensor& g = ctx.grad_out();
    Tensor dx(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) dx(i, j) = y(i, j) * (g(i, j) - dot);
    }
    ctx.accumulate(0, dx);
  });
}

inline Var mean_rows(const Var& a) {
  return tape_of(a).record(kernels::mean_rows(a.value()), {a}, [](BackwardContext& ctx) {
    const Tensor& x = ctx.input(0);
    const double inv = 1.0 / static_cast<double>(x.rows());
    Tensor dx(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) dx(i, j) = ctx.grad_out()[j] * inv;
    ctx.accumulate(0, dx);
  });
}

inline Var sum(const Var& a) {
  return tape_of(a).record(Tensor(1, 1, kernels::sum(a.value())), {a}, [](BackwardContext& ctx) {
    const Tensor& x = ctx.input(0);
    ctx.accumulate(0, Tensor(x.rows(), x.cols(), ctx.grad_out()[0]));
  });
}

// Same data, new shape (row-major order preserved).
inline Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
  const Tensor& x = a.value();
  if (rows * cols != x.size()) {
    throw DimensionError("reshape: cannot view " + x.shape_string() + " as " +
                         Tensor::shape_string(rows, cols));
  }
  Tensor out(rows, cols, x.values());
  return tape_of(a).record(std::move(out), {a}, [](BackwardContext& ctx) {
    const Tensor& x = ctx.input(0);
    ctx.accumulate(0, Tensor(x.rows(), x.cols(), ctx.grad_out().values()));
  });
}

// Vertical stack of equally wide blocks.
inline Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DomainError("concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: width mismatch " + parts.front().value().shape_string() +
                           " vs " + p.value().shape_string());
    }
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const Var& p : parts) data.insert(data.end(), p.value().values().begin(), p.value().values().end());
  return tape_of(parts.front())
      .record(Tensor(rows, cols, std::move(data)), std::vector<Var>(parts.begin(), parts.end()),
              [n = parts.size()](BackwardContext& ctx) {
                const Tensor& g = ctx.grad_out();
                std::size_t offset = 0;
                for (std::size_t i = 0; i < n; ++i) {
                  const Tensor& in = ctx.input(i);
                  if (ctx.wants(i)) {
                    Tensor part(in.rows(), in.cols());
                    for (std::size_t r = 0; r < in.rows(); ++r)
                      for (std::size_t c = 0; c < in.cols(); ++c) part(r, c) = g(offset + r, c);
                    ctx.accumulate(i, part);
                  }
                  offset += in.rows();
                }
              });
}

// Mean over the batch of -log softmax(logits)[label], for a B x C logit matrix.
inline Var cross_entropy(const Var& logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  if (z.rows() == 0) throw DomainError("cross_entropy: empty batch");
  if (labels.size() != z.rows()) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                         z.shape_string());
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= z.cols()) {
      throw ValidationError("cross_entropy: label " + std::to_string(y) + " out of range");
    }
  }
  const Tensor probs = kernels::softmax_rows(z);
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto row = z.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - mx);
    const double log_sum_exp = mx + std::log(s);
    total += log_sum_exp - row[static_cast<std::size_t>(labels[i])];
  }
  const double batch = static_cast<double>(z.rows());
  std::vector<int> owned(labels.begin(), labels.end());
  return tape_of(logits).record(
      Tensor(1, 1, total / batch), {logits}, [probs, owned = std::move(owned), batch](BackwardContext& ctx) {
        Tensor dz = probs;
        for (std::size_t i = 0; i < dz.rows(); ++i) dz(i, static_cast<std::size_t>(owned[i])) -= 1.0;
        ctx.accumulate(0, kernels::scale(dz, ctx.grad_out()[0] / batch));
      });
}

// sum_{k,j} target(k,j) * log(target(k,j) / max(pred(k,j), eps)), with 0 log 0 = 0.
// The target is a constant distribution; gradient flows into pred only.
inline Var kl_divergence(const Tensor& target, const Var& pred, double eps) {
  kernels::require_same_shape(target, pred.value(), "kl_divergence");
  const Tensor& p = pred.value();
  double total = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double t = target[i];
    if (t > 0.0) total += t * (std::log(t) - std::log(std::max(p[i], eps)));
  }
  return tape_of(pred).record(Tensor(1, 1, total), {pred}, [target, eps](BackwardContext& ctx) {
    const Tensor& p = ctx.input(0);
    Tensor dp(p.rows(), p.cols());
    const double g = ctx.grad_out()[0];
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (target[i] > 0.0 && p[i] > eps) dp[i] = -g * target[i] / p[i];
    }
    ctx.accumulate(0, dp);
  });
}

}  // namespace kdbrain::ad
