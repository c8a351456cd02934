#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pars/nn.hpp"

namespace pars {

/// Loss family. PL is positive learning and evaluates exactly like CE.
enum class LossKind { CE, MAE, RCE, FL, SCE, NCE, NFL, NMAE, NRCE, APL, NL, PL };

/// log(0) replacement used by reverse cross entropy on one-hot targets.
inline constexpr double kRceLogZero = -4.0;
inline constexpr double kDefaultFocalGamma = 0.5;

/// A loss together with its parameters.
struct LossSpec {
  LossKind kind = LossKind::CE;
  /// Focal exponent, used by FL, NFL and FL-based APL actives.
  double gamma = kDefaultFocalGamma;
  /// SCE: weight of CE / RCE. APL: weight of active / passive.
  double alpha = 1.0;
  double beta = 1.0;
  LossKind active = LossKind::NCE;
  LossKind passive = LossKind::MAE;

  static LossSpec simple(LossKind k) { return LossSpec{.kind = k}; }
  static LossSpec sce(double a, double b) { return {.kind = LossKind::SCE, .alpha = a, .beta = b}; }
  static LossSpec apl(LossKind act, LossKind pas, double a = 1.0, double b = 1.0) {
    return {.kind = LossKind::APL, .alpha = a, .beta = b, .active = act, .passive = pas};
  }

  /// Throws std::invalid_argument on bad parameters or an invalid APL pairing.
  void validate() const;
  /// True for the noise-tolerant family usable as a warm-up loss.
  bool is_robust() const;
  bool operator==(const LossSpec&) const = default;
};

std::string to_string(LossKind kind);
/// Parses a lower-case name ("ce", "nce", "apl", ...).
LossKind loss_kind_from_string(const std::string& name);
bool is_apl_active(LossKind kind);
bool is_apl_passive(LossKind kind);

struct LossOutput {
  double value = 0.0;
  std::vector<double> dlogits;
};

/// Loss over a batch, with one logit gradient per element.
struct BatchLossOutput {
  double value = 0.0;
  std::vector<std::vector<double>> dlogits;
};

// Individual losses. Each takes the softmax output p and a class index and
// returns the value with its gradient with respect to the logits.

LossOutput ce(const ProbVector& p, std::size_t y);
LossOutput mae(const ProbVector& p, std::size_t y);
LossOutput rce(const ProbVector& p, std::size_t y);
LossOutput fl(const ProbVector& p, std::size_t y, double gamma);
LossOutput sce(const ProbVector& p, std::size_t y, double alpha, double beta);
/// L(p, y) / sum_k L(p, k) for base in {CE, FL, MAE, RCE}.
LossOutput normalized(LossKind base, const ProbVector& p, std::size_t y,
                      double gamma = kDefaultFocalGamma);
LossOutput apl(LossKind active, LossKind passive, double alpha, double beta, const ProbVector& p,
               std::size_t y, double gamma = kDefaultFocalGamma);
/// Negative learning on complementary label ybar: -log(1 - p_ybar).
LossOutput nl(const ProbVector& p, std::size_t ybar);

/// Dispatches on spec.kind.
LossOutput evaluate_loss(const LossSpec& spec, const ProbVector& p, std::size_t y);

/// KL(prior || mean_b p_b); gradients flow to every element through the mean.
BatchLossOutput confidence_penalty(std::span<const ProbVector> batch, std::span<const double> prior);

/// Chain rule through softmax: dL/df_i = p_i (g_i - sum_j p_j g_j), g = dL/dp.
std::vector<double> softmax_backward(const ProbVector& p, std::span<const double> dl_dp);

}  // namespace pars
