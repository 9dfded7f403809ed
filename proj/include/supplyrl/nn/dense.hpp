#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "supplyrl/core/errors.hpp"
#include "supplyrl/core/rng.hpp"

namespace supplyrl::nn {

/// Networks keep every parameter in one flat vector. Layers are descriptors
/// holding an offset into it, which makes optimiser steps, gradient checks,
/// checksums and checkpoints operate on a single contiguous array.
class ParamLayout {
 public:
  std::size_t allocate(std::size_t n) {
    const std::size_t offset = size_;
    size_ += n;
    return offset;
  }
  std::size_t size() const noexcept { return size_; }

 private:
  std::size_t size_ = 0;
};

enum class Activation { kIdentity, kTanh };

/// y = act(W x + b). W is row-major (out x in) at `offset`, b follows it.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::kIdentity;
  std::size_t offset = 0;

  static DenseLayer create(ParamLayout& layout, std::size_t in, std::size_t out, Activation act) {
    DenseLayer layer{in, out, act, 0};
    layer.offset = layout.allocate(layer.param_count());
    return layer;
  }

  std::size_t param_count() const noexcept { return out * in + out; }
  std::size_t bias_offset() const noexcept { return offset + out * in; }

  void forward(std::span<const double> params, std::span<const double> x, std::span<double> y) const {
    if (x.size() != in || y.size() != out) throw UsageError("dense forward: shape mismatch");
    const double* w = params.data() + offset;
    const double* b = params.data() + bias_offset();
    for (std::size_t r = 0; r < out; ++r) {
      double acc = b[r];
      const double* row = w + r * in;
      for (std::size_t c = 0; c < in; ++c) acc += row[c] * x[c];
      y[r] = activation == Activation::kTanh ? std::tanh(acc) : acc;
    }
  }

  /// Accumulates parameter gradients into `grad` and, when `dx` is
  /// non-empty, writes the input gradient. `y` is the forward output and
  /// `dy` the gradient with respect to it.
  void backward(std::span<const double> params, std::span<const double> x, std::span<const double> y,
                std::span<const double> dy, std::span<double> grad, std::span<double> dx) const {
    thread_local std::vector<double> dz;
    dz.resize(out);
    for (std::size_t r = 0; r < out; ++r)
      dz[r] = activation == Activation::kTanh ? dy[r] * (1.0 - y[r] * y[r]) : dy[r];
    double* gw = grad.data() + offset;
    double* gb = grad.data() + bias_offset();
    for (std::size_t r = 0; r < out; ++r) {
      const double d = dz[r];
      gb[r] += d;
      if (d == 0.0) continue;
      double* row = gw + r * in;
      for (std::size_t c = 0; c < in; ++c) row[c] += d * x[c];
    }
    if (dx.empty()) return;
    const double* w = params.data() + offset;
    for (std::size_t c = 0; c < in; ++c) dx[c] = 0.0;
    for (std::size_t r = 0; r < out; ++r) {
      const double d = dz[r];
      if (d == 0.0) continue;
      const double* row = w + r * in;
      for (std::size_t c = 0; c < in; ++c) dx[c] += d * row[c];
    }
  }

  /// Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero bias.
  void initialize(std::span<double> params, Rng& rng, double gain = 1.0) const {
    const double bound = gain / std::sqrt(static_cast<double>(in));
    for (std::size_t k = 0; k < out * in; ++k) params[offset + k] = bound * (2.0 * rng.uniform() - 1.0);
    for (std::size_t k = 0; k < out; ++k) params[bias_offset() + k] = 0.0;
  }
};

/// Activations of every layer from one forward pass; activations[0] is the
/// input.
struct MlpCache {
  std::vector<std::vector<double>> activations;
  std::span<const double> output() const { return activations.back(); }
};

struct Mlp {
  std::vector<DenseLayer> layers;

  static Mlp create(ParamLayout& layout, std::size_t in, const std::vector<std::size_t>& widths,
                    Activation hidden_act, Activation output_act) {
    Mlp mlp;
    std::size_t prev = in;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      const bool last = k + 1 == widths.size();
      mlp.layers.push_back(DenseLayer::create(layout, prev, widths[k], last ? output_act : hidden_act));
      prev = widths[k];
    }
    return mlp;
  }

  std::size_t in() const { return layers.front().in; }
  std::size_t out() const { return layers.back().out; }

  std::span<const double> forward(std::span<const double> params, std::span<const double> x,
                                  MlpCache& cache) const {
    if (layers.empty()) throw UsageError("mlp forward: no layers");
    if (x.size() != in()) throw UsageError("mlp forward: input size mismatch");
    cache.activations.resize(layers.size() + 1);
    cache.activations[0].assign(x.begin(), x.end());
    for (std::size_t k = 0; k < layers.size(); ++k) {
      cache.activations[k + 1].resize(layers[k].out);
      layers[k].forward(params, cache.activations[k], cache.activations[k + 1]);
    }
    return cache.output();
  }

  /// Returns the gradient with respect to the input.
  std::vector<double> backward(std::span<const double> params, const MlpCache& cache,
                               std::span<const double> dy, std::span<double> grad) const {
    std::vector<double> upstream(dy.begin(), dy.end());
    std::vector<double> dx;
    for (std::size_t k = layers.size(); k-- > 0;) {
      dx.assign(layers[k].in, 0.0);
      layers[k].backward(params, cache.activations[k], cache.activations[k + 1], upstream, grad, dx);
      upstream.swap(dx);
    }
    return upstream;
  }

  void initialize(std::span<double> params, Rng& rng) const {
    for (const auto& layer : layers) layer.initialize(params, rng);
  }
};

}  // namespace supplyrl::nn
