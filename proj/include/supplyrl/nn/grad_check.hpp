#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

#include "supplyrl/core/errors.hpp"

namespace supplyrl::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

/// Compares `analytic` against central differences (f(p+h) - f(p-h)) / 2h
/// for every parameter. Relative error is |a - n| / max(|a|, |n|, floor);
/// the floor keeps gradients that are zero up to rounding from dominating.
/// `params` is perturbed in place and restored.
template <class Loss>
GradCheckResult grad_check(Loss&& loss, std::span<double> params, std::span<const double> analytic,
                           double h = 1e-5, double floor = 1e-6) {
  if (analytic.size() != params.size()) throw UsageError("grad_check: shape mismatch");
  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + h;
    const double up = loss(std::span<const double>(params));
    params[k] = saved - h;
    const double down = loss(std::span<const double>(params));
    params[k] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), floor});
    const double rel = std::abs(analytic[k] - numeric) / denom;
    if (rel > result.max_relative_error) result = {rel, k, analytic[k], numeric};
  }
  return result;
}

}  // namespace supplyrl::nn
