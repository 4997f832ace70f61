#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kdbrain/autodiff.hpp"

namespace kdbrain::ad {

struct ParameterCheck {
  std::string name;
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<ParameterCheck> parameters;
  double step = 0.0;
  double tolerance = 0.0;
  bool passed = true;
};

// Builds a scalar loss on the given tape from leaves bound to `params`.
using LossBuilder = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor for the relative error, so entries whose true gradient is
  // ~0 are judged on absolute error instead.
  double magnitude_floor = 1e-6;
};

namespace detail {

inline double evaluate_loss(const LossBuilder& build, std::span<const Tensor> params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(tape.constant(p));
  return build(tape, leaves).value()[0];
}

}  // namespace detail

// Compares analytic gradients against central differences
// (f(x+h) - f(x-h)) / 2h, element by element.
inline GradCheckReport grad_check(const LossBuilder& build, std::vector<Tensor> params,
                                  const std::vector<std::string>& names,
                                  const GradCheckOptions& options = {}) {
  if (!(options.step > 0.0)) throw UsageError("grad_check: step must be positive");
  if (names.size() != params.size()) throw UsageError("grad_check: one name per parameter required");

  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(tape.leaf(p));
  const Var loss = build(tape, leaves);
  const Gradients grads = tape.backward(loss);

  GradCheckReport report;
  report.step = options.step;
  report.tolerance = options.tolerance;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor& analytic = grads[leaves[p]];
    ParameterCheck check{names[p]};
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double original = params[p][i];
      params[p][i] = original + options.step;
      const double plus = detail::evaluate_loss(build, params);
      params[p][i] = original - options.step;
      const double minus = detail::evaluate_loss(build, params);
      params[p][i] = original;

      const double numeric = (plus - minus) / (2.0 * options.step);
      const double abs_err = std::abs(analytic[i] - numeric);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.magnitude_floor});
      check.max_absolute_error = std::max(check.max_absolute_error, abs_err);
      check.max_relative_error = std::max(check.max_relative_error, abs_err / denom);
    }
    check.passed = check.max_relative_error < options.tolerance;
    report.passed = report.passed && check.passed;
    report.parameters.push_back(std::move(check));
  }
  return report;
}

}  // namespace kdbrain::ad
