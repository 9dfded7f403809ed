#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "supplyrl/core/errors.hpp"
#include "supplyrl/core/rng.hpp"

namespace supplyrl::nn {

/// log softmax with max subtraction.
inline void log_softmax(std::span<const double> logits, std::span<double> out) {
  if (logits.empty() || out.size() != logits.size()) throw UsageError("log_softmax: bad shape");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t k = 0; k < logits.size(); ++k) out[k] = logits[k] - lse;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  log_softmax(logits, p);
  for (double& x : p) x = std::exp(x);
  return p;
}

struct CategoricalStats {
  double log_prob = 0.0;
  double entropy = 0.0;
};

inline double categorical_entropy(std::span<const double> log_probs) {
  double h = 0.0;
  for (double lp : log_probs) h -= std::exp(lp) * lp;
  return h;
}

inline CategoricalStats categorical_stats(std::span<const double> logits, std::size_t index) {
  if (index >= logits.size()) throw UsageError("categorical_stats: index out of range");
  thread_local std::vector<double> lp;
  lp.resize(logits.size());
  log_softmax(logits, lp);
  return {lp[index], categorical_entropy(lp)};
}

/// Inverse-CDF draw. Returns (index, log probability).
inline std::pair<std::size_t, double> categorical_sample(std::span<const double> logits, Rng& rng) {
  thread_local std::vector<double> lp;
  lp.resize(logits.size());
  log_softmax(logits, lp);
  const double u = rng.uniform();
  double cdf = 0.0;
  std::size_t idx = logits.size() - 1;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    cdf += std::exp(lp[k]);
    if (u < cdf) {
      idx = k;
      break;
    }
  }
  return {idx, lp[idx]};
}

/// Greedy choice; ties resolve to the lowest index.
inline std::size_t categorical_argmax(std::span<const double> logits) {
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

/// Accumulates d(coef_logp * log p[index] + coef_entropy * H) / d logits
/// into `dlogits`.
///   d log p[a] / dz_j = 1[j == a] - p_j
///   d H / dz_j        = -p_j (log p_j + H)
inline void categorical_backward(std::span<const double> logits, std::size_t index, double coef_logp,
                                 double coef_entropy, std::span<double> dlogits) {
  thread_local std::vector<double> lp;
  lp.resize(logits.size());
  log_softmax(logits, lp);
  const double h = categorical_entropy(lp);
  for (std::size_t j = 0; j < logits.size(); ++j) {
    const double p = std::exp(lp[j]);
    dlogits[j] += coef_logp * ((j == index ? 1.0 : 0.0) - p) - coef_entropy * p * (lp[j] + h);
  }
}

}  // namespace supplyrl::nn
