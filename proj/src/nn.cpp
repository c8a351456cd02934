#include "pars/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "pars/rng.hpp"

namespace pars {

double ProbVector::clamped(std::size_t k) const { return std::clamp(values_[k], kProbFloor, 1.0); }

double ProbVector::max() const { return *std::max_element(values_.begin(), values_.end()); }

std::size_t ProbVector::argmax() const {
  // max_element returns the first maximum, giving the lowest-index tie-break.
  return static_cast<std::size_t>(std::max_element(values_.begin(), values_.end()) -
                                  values_.begin());
}

// ---------------------------------------------------------------------------

ModelParams ModelParams::zeros(std::span<const std::size_t> widths) {
  if (widths.size() < 2) throw std::invalid_argument("network needs at least two widths");
  ModelParams p;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (widths[i] == 0 || widths[i + 1] == 0)
      throw std::invalid_argument("layer width must be positive");
    p.layers.emplace_back(widths[i], widths[i + 1]);
  }
  return p;
}

ModelParams ModelParams::glorot(std::span<const std::size_t> widths, Rng& rng) {
  ModelParams p = zeros(widths);
  for (auto& layer : p.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    for (auto& w : layer.weight) w = rng.uniform(-limit, limit);
  }
  return p;
}

std::size_t ModelParams::input_dim() const { return layers.empty() ? 0 : layers.front().in; }
std::size_t ModelParams::output_dim() const { return layers.empty() ? 0 : layers.back().out; }

std::size_t ModelParams::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void ModelParams::validate() const {
  if (layers.empty()) throw std::invalid_argument("model has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.weight.size() != l.in * l.out || l.bias.size() != l.out)
      throw std::invalid_argument("layer " + std::to_string(i) + " has inconsistent storage");
    if (i > 0 && layers[i - 1].out != l.in)
      throw std::invalid_argument("layer " + std::to_string(i) + " input does not chain");
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(l.weight.begin(), l.weight.end(), finite) ||
        !std::all_of(l.bias.begin(), l.bias.end(), finite))
      throw std::invalid_argument("layer " + std::to_string(i) + " has non-finite entries");
  }
}

bool ModelParams::same_shape(const ModelParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].in != other.layers[i].in || layers[i].out != other.layers[i].out) return false;
  return true;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams p;
  p.layers.reserve(layers.size());
  for (const auto& l : layers) p.layers.emplace_back(l.in, l.out);
  return p;
}

void ModelParams::set_zero() {
  for (auto& l : layers) {
    std::fill(l.weight.begin(), l.weight.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

void ModelParams::add_scaled(const ModelParams& other, double scale) {
  if (!same_shape(other)) throw std::invalid_argument("add_scaled: shape mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& dst = layers[i];
    const auto& src = other.layers[i];
    for (std::size_t j = 0; j < dst.weight.size(); ++j) dst.weight[j] += scale * src.weight[j];
    for (std::size_t j = 0; j < dst.bias.size(); ++j) dst.bias[j] += scale * src.bias[j];
  }
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(num_parameters());
  for (const auto& l : layers) {
    flat.insert(flat.end(), l.weight.begin(), l.weight.end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

void ModelParams::assign_flat(std::span<const double> flat) {
  if (flat.size() != num_parameters()) throw std::invalid_argument("assign_flat: size mismatch");
  std::size_t pos = 0;
  for (auto& l : layers) {
    std::copy_n(flat.begin() + pos, l.weight.size(), l.weight.begin());
    pos += l.weight.size();
    std::copy_n(flat.begin() + pos, l.bias.size(), l.bias.begin());
    pos += l.bias.size();
  }
}

bool ModelParams::operator==(const ModelParams& other) const {
  if (!same_shape(other)) return false;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].weight != other.layers[i].weight || layers[i].bias != other.layers[i].bias)
      return false;
  return true;
}

// ---------------------------------------------------------------------------

ProbVector softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
  for (double f : logits)
    if (!std::isfinite(f)) throw std::invalid_argument("softmax: non-finite logit");
  const double shift = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - shift);
    total += p[k];
  }
  for (double& v : p) v /= total;
  return ProbVector(std::move(p));
}

void mlp_forward(const ModelParams& params, std::span<const double> x, ForwardCache& cache) {
  if (params.layers.empty()) throw std::invalid_argument("mlp_forward: empty model");
  if (x.size() != params.input_dim())
    throw std::invalid_argument("mlp_forward: input has dimension " + std::to_string(x.size()) +
                                ", model expects " + std::to_string(params.input_dim()));
  const std::size_t n = params.layers.size();
  cache.inputs.resize(n);
  cache.pre_activations.resize(n);
  cache.inputs[0].assign(x.begin(), x.end());
  for (std::size_t i = 0; i < n; ++i) {
    const Layer& layer = params.layers[i];
    const std::vector<double>& in = cache.inputs[i];
    std::vector<double>& z = cache.pre_activations[i];
    z.assign(layer.bias.begin(), layer.bias.end());
    for (std::size_t r = 0; r < layer.out; ++r) {
      const double* row = layer.weight.data() + r * layer.in;
      double acc = 0.0;
      for (std::size_t c = 0; c < layer.in; ++c) acc += row[c] * in[c];
      z[r] += acc;
    }
    if (i + 1 < n) {
      std::vector<double>& next = cache.inputs[i + 1];
      next.resize(layer.out);
      for (std::size_t r = 0; r < layer.out; ++r) next[r] = z[r] > 0.0 ? z[r] : 0.0;
    }
  }
}

ForwardCache mlp_forward(const ModelParams& params, std::span<const double> x) {
  ForwardCache cache;
  mlp_forward(params, x, cache);
  return cache;
}

ProbVector predict(const ModelParams& params, std::span<const double> x) {
  thread_local ForwardCache cache;
  mlp_forward(params, x, cache);
  return softmax(cache.logits());
}

void mlp_backward(const ModelParams& params, const ForwardCache& cache,
                  std::span<const double> dlogits, ModelParams& grads) {
  const std::size_t n = params.layers.size();
  if (cache.pre_activations.size() != n || cache.inputs.size() != n)
    throw std::invalid_argument("mlp_backward: cache does not match model");
  if (dlogits.size() != params.output_dim())
    throw std::invalid_argument("mlp_backward: logit gradient has wrong length");
  if (!grads.same_shape(params)) throw std::invalid_argument("mlp_backward: gradient shape mismatch");

  std::vector<double> delta(dlogits.begin(), dlogits.end());
  std::vector<double> prev;
  for (std::size_t i = n; i-- > 0;) {
    const Layer& layer = params.layers[i];
    Layer& g = grads.layers[i];
    const std::vector<double>& in = cache.inputs[i];
    for (std::size_t r = 0; r < layer.out; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      g.bias[r] += d;
      double* grow = g.weight.data() + r * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) grow[c] += d * in[c];
    }
    if (i == 0) break;
    // propagate through W^T then the ReLU of the previous layer
    prev.assign(layer.in, 0.0);
    for (std::size_t r = 0; r < layer.out; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const double* row = layer.weight.data() + r * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) prev[c] += row[c] * d;
    }
    const std::vector<double>& z_prev = cache.pre_activations[i - 1];
    for (std::size_t c = 0; c < layer.in; ++c)
      if (z_prev[c] <= 0.0) prev[c] = 0.0;
    delta.swap(prev);
  }
}

ModelParams mlp_backward(const ModelParams& params, const ForwardCache& cache,
                         std::span<const double> dlogits) {
  ModelParams grads = params.zeros_like();
  mlp_backward(params, cache, dlogits, grads);
  return grads;
}

// ---------------------------------------------------------------------------

double cosine_lr(std::int64_t t, std::int64_t total, double base_lr) {
  if (total <= 0) throw std::invalid_argument("cosine_lr: total steps must be positive");
  if (t < 0 || t > total) throw std::invalid_argument("cosine_lr: step outside [0, T]");
  return base_lr * std::cos(7.0 * std::numbers::pi * static_cast<double>(t) /
                            (16.0 * static_cast<double>(total)));
}

OptimState::OptimState(const ModelParams& like, std::int64_t total, double lr, double m, double wd)
    : momentum_buffer(like.zeros_like()),
      total_steps(total),
      base_lr(lr),
      momentum(m),
      weight_decay(wd) {
  if (lr <= 0.0) throw std::invalid_argument("learning rate must be positive");
  if (m < 0.0 || m >= 1.0) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (wd < 0.0) throw std::invalid_argument("weight decay must be non-negative");
}

void sgd_step(ModelParams& params, const ModelParams& grads, OptimState& state) {
  if (state.step >= state.total_steps) throw std::logic_error("sgd_step: schedule exhausted");
  if (!params.same_shape(grads) || !params.same_shape(state.momentum_buffer))
    throw std::invalid_argument("sgd_step: shape mismatch");
  const double lr = state.current_lr();
  const double m = state.momentum;
  const double wd = state.weight_decay;
  auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& b) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      b[j] = m * b[j] + (g[j] + wd * p[j]);
      p[j] -= lr * b[j];
    }
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weight, grads.layers[i].weight, state.momentum_buffer.layers[i].weight);
    update(params.layers[i].bias, grads.layers[i].bias, state.momentum_buffer.layers[i].bias);
  }
  ++state.step;
}

void ema_update(EmaParams& ema, const ModelParams& params) {
  if (!ema.shadow.same_shape(params)) throw std::invalid_argument("ema_update: shape mismatch");
  const double d = ema.decay;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto& s = ema.shadow.layers[i];
    const auto& p = params.layers[i];
    for (std::size_t j = 0; j < s.weight.size(); ++j)
      s.weight[j] = d * s.weight[j] + (1.0 - d) * p.weight[j];
    for (std::size_t j = 0; j < s.bias.size(); ++j)
      s.bias[j] = d * s.bias[j] + (1.0 - d) * p.bias[j];
  }
}

}  // namespace pars
