#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "supplyrl/core/errors.hpp"
#include "supplyrl/core/rng.hpp"
#include "supplyrl/nn/dense.hpp"

namespace supplyrl::nn {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Everything one LSTM step needs for its backward pass.
struct LstmCache {
  std::vector<double> x, h_prev, c_prev;
  std::vector<double> gates;  // activated i, f, g, o (4H)
  std::vector<double> c, tanh_c, h;
};

/// Single-layer LSTM cell.
///
/// Parameter block at `offset`: input weights W (4H x I), recurrent
/// weights U (4H x H), bias b (4H), each with gate rows in the order
/// input, forget, cell candidate, output.
struct LstmCell {
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::size_t offset = 0;

  static LstmCell create(ParamLayout& layout, std::size_t input, std::size_t hidden) {
    LstmCell cell{input, hidden, 0};
    cell.offset = layout.allocate(cell.param_count());
    return cell;
  }

  std::size_t param_count() const noexcept { return 4 * hidden * (input + hidden + 1); }
  std::size_t w_offset() const noexcept { return offset; }
  std::size_t u_offset() const noexcept { return offset + 4 * hidden * input; }
  std::size_t b_offset() const noexcept { return u_offset() + 4 * hidden * hidden; }

  /// i,f,o = sigmoid, g = tanh, c' = f*c + i*g, h' = o*tanh(c').
  void step(std::span<const double> params, std::span<const double> x, std::span<const double> h,
            std::span<const double> c, LstmCache& cache) const {
    if (x.size() != input || h.size() != hidden || c.size() != hidden)
      throw UsageError("lstm step: shape mismatch");
    const std::size_t H = hidden;
    cache.x.assign(x.begin(), x.end());
    cache.h_prev.assign(h.begin(), h.end());
    cache.c_prev.assign(c.begin(), c.end());
    cache.gates.resize(4 * H);
    const double* W = params.data() + w_offset();
    const double* U = params.data() + u_offset();
    const double* b = params.data() + b_offset();
    for (std::size_t r = 0; r < 4 * H; ++r) {
      double z = b[r];
      const double* wr = W + r * input;
      for (std::size_t k = 0; k < input; ++k) z += wr[k] * x[k];
      const double* ur = U + r * H;
      for (std::size_t k = 0; k < H; ++k) z += ur[k] * h[k];
      cache.gates[r] = (r >= 2 * H && r < 3 * H) ? std::tanh(z) : sigmoid(z);
    }
    cache.c.resize(H);
    cache.tanh_c.resize(H);
    cache.h.resize(H);
    for (std::size_t j = 0; j < H; ++j) {
      const double ig = cache.gates[j], fg = cache.gates[H + j], gg = cache.gates[2 * H + j],
                   og = cache.gates[3 * H + j];
      cache.c[j] = fg * c[j] + ig * gg;
      cache.tanh_c[j] = std::tanh(cache.c[j]);
      cache.h[j] = og * cache.tanh_c[j];
    }
  }

  /// Backward through one step given dL/dh' and dL/dc' (direct paths).
  /// Accumulates into `grad`; writes dx, dh_prev, dc_prev (each may be empty).
  void step_backward(std::span<const double> params, const LstmCache& cache, std::span<const double> dh,
                     std::span<const double> dc_next, std::span<double> grad, std::span<double> dx,
                     std::span<double> dh_prev, std::span<double> dc_prev) const {
    const std::size_t H = hidden;
    thread_local std::vector<double> dz;
    dz.resize(4 * H);
    for (std::size_t j = 0; j < H; ++j) {
      const double ig = cache.gates[j], fg = cache.gates[H + j], gg = cache.gates[2 * H + j],
                   og = cache.gates[3 * H + j];
      const double dc = dc_next[j] + dh[j] * og * (1.0 - cache.tanh_c[j] * cache.tanh_c[j]);
      const double d_o = dh[j] * cache.tanh_c[j];
      const double d_i = dc * gg;
      const double d_f = dc * cache.c_prev[j];
      const double d_g = dc * ig;
      dz[j] = d_i * ig * (1.0 - ig);
      dz[H + j] = d_f * fg * (1.0 - fg);
      dz[2 * H + j] = d_g * (1.0 - gg * gg);
      dz[3 * H + j] = d_o * og * (1.0 - og);
      if (!dc_prev.empty()) dc_prev[j] = dc * fg;
    }
    double* gW = grad.data() + w_offset();
    double* gU = grad.data() + u_offset();
    double* gb = grad.data() + b_offset();
    for (std::size_t r = 0; r < 4 * H; ++r) {
      const double d = dz[r];
      gb[r] += d;
      if (d == 0.0) continue;
      double* wr = gW + r * input;
      for (std::size_t k = 0; k < input; ++k) wr[k] += d * cache.x[k];
      double* ur = gU + r * H;
      for (std::size_t k = 0; k < H; ++k) ur[k] += d * cache.h_prev[k];
    }
    const double* W = params.data() + w_offset();
    const double* U = params.data() + u_offset();
    if (!dx.empty()) {
      for (std::size_t k = 0; k < input; ++k) dx[k] = 0.0;
      for (std::size_t r = 0; r < 4 * H; ++r) {
        const double* wr = W + r * input;
        for (std::size_t k = 0; k < input; ++k) dx[k] += dz[r] * wr[k];
      }
    }
    if (!dh_prev.empty()) {
      for (std::size_t k = 0; k < H; ++k) dh_prev[k] = 0.0;
      for (std::size_t r = 0; r < 4 * H; ++r) {
        const double* ur = U + r * H;
        for (std::size_t k = 0; k < H; ++k) dh_prev[k] += dz[r] * ur[k];
      }
    }
  }

  /// Uniform(-1/sqrt(H), 1/sqrt(H)) weights, zero bias.
  void initialize(std::span<double> params, Rng& rng) const {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (std::size_t k = 0; k < b_offset() - offset; ++k)
      params[offset + k] = bound * (2.0 * rng.uniform() - 1.0);
    for (std::size_t k = 0; k < 4 * hidden; ++k) params[b_offset() + k] = 0.0;
  }
};

/// Gradients flowing out of the start of a sequence.
struct BpttResult {
  std::vector<double> dh0, dc0;
};

/// Backpropagation through time over a sequence of forward caches.
///
/// `dh_out[t]` is the loss gradient on the hidden output of step t.
/// `resets[t]` marks steps whose incoming state was forced to zero; no
/// gradient crosses such a boundary. Writes per-step input gradients into
/// `dx_out` when it is non-empty.
inline BpttResult lstm_bptt(const LstmCell& cell, std::span<const double> params,
                            std::span<const LstmCache> caches,
                            std::span<const std::vector<double>> dh_out, std::span<const std::uint8_t> resets,
                            std::span<double> grad, std::span<std::vector<double>> dx_out = {}) {
  const std::size_t H = cell.hidden;
  const std::size_t T = caches.size();
  if (dh_out.size() != T || (!resets.empty() && resets.size() != T) || (!dx_out.empty() && dx_out.size() != T))
    throw UsageError("lstm_bptt: sequence length mismatch");
  std::vector<double> dh_carry(H, 0.0), dc_carry(H, 0.0);
  std::vector<double> dh(H), dh_prev(H), dc_prev(H);
  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t j = 0; j < H; ++j) dh[j] = dh_out[t][j] + dh_carry[j];
    std::span<double> dx;
    if (!dx_out.empty()) {
      dx_out[t].resize(cell.input);
      dx = dx_out[t];
    }
    cell.step_backward(params, caches[t], dh, dc_carry, grad, dx, dh_prev, dc_prev);
    const bool cut = !resets.empty() && resets[t];
    for (std::size_t j = 0; j < H; ++j) {
      dh_carry[j] = cut ? 0.0 : dh_prev[j];
      dc_carry[j] = cut ? 0.0 : dc_prev[j];
    }
  }
  return {dh_carry, dc_carry};
}

}  // namespace supplyrl::nn
