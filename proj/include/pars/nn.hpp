#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pars {

class Rng;

/// Lower clamp applied to probabilities before any logarithm.
inline constexpr double kProbFloor = 1e-7;

/// Class-probability vector produced by softmax. Stores the raw (unclamped)
/// values; use clamped() wherever a log is taken.
class ProbVector {
 public:
  ProbVector() = default;
  explicit ProbVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  double clamped(std::size_t k) const;
  /// Largest entry (the max-confidence used for sample selection).
  double max() const;
  /// Index of the largest entry; ties resolve to the lowest index.
  std::size_t argmax() const;

  std::span<const double> values() const { return values_; }

 private:
  std::vector<double> values_;
};

/// One affine layer, weight stored row-major as out x in.
struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  Layer() = default;
  Layer(std::size_t in_dim, std::size_t out_dim)
      : in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

  double& w(std::size_t row, std::size_t col) { return weight[row * in + col]; }
  double w(std::size_t row, std::size_t col) const { return weight[row * in + col]; }
};

/// MLP parameters: affine layers with ReLU between them, logits out of the last.
/// Also used as the gradient container (same shape).
struct ModelParams {
  std::vector<Layer> layers;

  /// Zero-initialised network with the given layer widths, e.g. {2, 64, 64, 5}.
  static ModelParams zeros(std::span<const std::size_t> widths);
  /// Glorot-uniform weights, zero bias.
  static ModelParams glorot(std::span<const std::size_t> widths, Rng& rng);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t num_parameters() const;

  /// Throws std::invalid_argument if shapes do not chain or an entry is non-finite.
  void validate() const;
  bool same_shape(const ModelParams& other) const;

  ModelParams zeros_like() const;
  void set_zero();
  /// this += scale * other
  void add_scaled(const ModelParams& other, double scale);

  /// Flat views for optimizers and finite-difference checks, ordered layer by
  /// layer with weights before biases.
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> flat);

  bool operator==(const ModelParams& other) const;
};

/// Activations recorded by a forward pass.
struct ForwardCache {
  /// inputs[i] is the input to layer i (inputs[0] is x, later ones post-ReLU).
  std::vector<std::vector<double>> inputs;
  /// pre_activations[i] = W_i * inputs[i] + b_i; the last one is the logits.
  std::vector<std::vector<double>> pre_activations;

  std::span<const double> logits() const { return pre_activations.back(); }
};

/// Numerically stable softmax; throws on non-finite logits.
ProbVector softmax(std::span<const double> logits);

/// Forward pass into a reusable cache. Throws on dimension mismatch.
void mlp_forward(const ModelParams& params, std::span<const double> x, ForwardCache& cache);
ForwardCache mlp_forward(const ModelParams& params, std::span<const double> x);

/// Convenience: softmax(mlp_forward(x).logits).
ProbVector predict(const ModelParams& params, std::span<const double> x);

/// Accumulates the parameter gradient of a scalar loss whose logit gradient is
/// dlogits into grads (grads += dL/dtheta).
void mlp_backward(const ModelParams& params, const ForwardCache& cache,
                  std::span<const double> dlogits, ModelParams& grads);
ModelParams mlp_backward(const ModelParams& params, const ForwardCache& cache,
                         std::span<const double> dlogits);

// ---------------------------------------------------------------------------
// Optimisation
// ---------------------------------------------------------------------------

/// eta * cos(7 pi t / (16 T)).
double cosine_lr(std::int64_t t, std::int64_t total, double base_lr);

struct OptimState {
  ModelParams momentum_buffer;
  std::int64_t step = 0;
  std::int64_t total_steps = 0;
  double base_lr = 0.03;
  double momentum = 0.9;
  double weight_decay = 5e-4;

  OptimState() = default;
  OptimState(const ModelParams& like, std::int64_t total, double lr, double m, double wd);

  double current_lr() const { return cosine_lr(step, total_steps, base_lr); }
};

/// buffer = m * buffer + (grad + wd * param); param -= lr(t) * buffer; ++t.
/// Throws std::logic_error once the schedule is exhausted (t >= T).
void sgd_step(ModelParams& params, const ModelParams& grads, OptimState& state);

struct EmaParams {
  ModelParams shadow;
  double decay = 0.999;
};

/// shadow = d * shadow + (1 - d) * params
void ema_update(EmaParams& ema, const ModelParams& params);

}  // namespace pars
