#include "pars/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pars {

namespace {

void check_label(const ProbVector& p, std::size_t y) {
  if (p.size() == 0) throw std::invalid_argument("loss: empty probability vector");
  if (y >= p.size())
    throw std::invalid_argument("loss: label " + std::to_string(y) + " out of range for " +
                                std::to_string(p.size()) + " classes");
}

// Per-class base losses. For CE, FL, MAE and RCE the loss against class k
// depends on p_k alone, so each base is a scalar function phi(p_k) with
// derivative dphi. Derivatives are those of the clamped expressions.
struct Scalar {
  double value;
  double deriv;
};

Scalar ce_term(double pk) {
  const double c = std::clamp(pk, kProbFloor, 1.0);
  return {-std::log(c), pk > kProbFloor ? -1.0 / c : 0.0};
}

Scalar fl_term(double pk, double gamma) {
  const double c = std::clamp(pk, kProbFloor, 1.0);
  const double q = std::max(1.0 - pk, 0.0);
  const double log_c = std::log(c);
  const double weight = std::pow(q, gamma);
  double deriv = pk > kProbFloor ? -weight / c : 0.0;
  // d/dp of (1-p)^gamma is -gamma (1-p)^(gamma-1); the product with log p
  // vanishes as p -> 1 for every gamma >= 0.
  if (gamma > 0.0 && q > 0.0) deriv += gamma * std::pow(q, gamma - 1.0) * log_c;
  return {-weight * log_c, deriv};
}

Scalar mae_term(double pk) { return {2.0 * (1.0 - pk), -2.0}; }

// -sum_k p_k log(onehot_k) with log 0 := A gives -A (1 - p_y).
Scalar rce_term(double pk) { return {-kRceLogZero * (1.0 - pk), kRceLogZero}; }

Scalar base_term(LossKind base, double pk, double gamma) {
  switch (base) {
    case LossKind::CE:
      return ce_term(pk);
    case LossKind::FL:
      return fl_term(pk, gamma);
    case LossKind::MAE:
      return mae_term(pk);
    case LossKind::RCE:
      return rce_term(pk);
    default:
      throw std::invalid_argument("normalized: base loss must be CE, FL, MAE or RCE, got " +
                                  to_string(base));
  }
}

// Loss whose dL/dp is non-zero only at index y.
LossOutput from_single_term(const ProbVector& p, std::size_t y, Scalar term) {
  std::vector<double> g(p.size(), 0.0);
  g[y] = term.deriv;
  return {term.value, softmax_backward(p, g)};
}

LossOutput weighted_sum(const LossOutput& a, double wa, const LossOutput& b, double wb) {
  LossOutput out{wa * a.value + wb * b.value, std::vector<double>(a.dlogits.size())};
  for (std::size_t i = 0; i < out.dlogits.size(); ++i)
    out.dlogits[i] = wa * a.dlogits[i] + wb * b.dlogits[i];
  return out;
}

LossOutput apl_component(LossKind kind, const ProbVector& p, std::size_t y, double gamma) {
  switch (kind) {
    case LossKind::CE:
      return ce(p, y);
    case LossKind::FL:
      return fl(p, y, gamma);
    case LossKind::NCE:
      return normalized(LossKind::CE, p, y, gamma);
    case LossKind::NFL:
      return normalized(LossKind::FL, p, y, gamma);
    case LossKind::MAE:
      return mae(p, y);
    case LossKind::RCE:
      return rce(p, y);
    case LossKind::NMAE:
      return normalized(LossKind::MAE, p, y, gamma);
    case LossKind::NRCE:
      return normalized(LossKind::RCE, p, y, gamma);
    default:
      throw std::invalid_argument("apl: unsupported component " + to_string(kind));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::CE: return "ce";
    case LossKind::MAE: return "mae";
    case LossKind::RCE: return "rce";
    case LossKind::FL: return "fl";
    case LossKind::SCE: return "sce";
    case LossKind::NCE: return "nce";
    case LossKind::NFL: return "nfl";
    case LossKind::NMAE: return "nmae";
    case LossKind::NRCE: return "nrce";
    case LossKind::APL: return "apl";
    case LossKind::NL: return "nl";
    case LossKind::PL: return "pl";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& name) {
  for (LossKind k : {LossKind::CE, LossKind::MAE, LossKind::RCE, LossKind::FL, LossKind::SCE,
                     LossKind::NCE, LossKind::NFL, LossKind::NMAE, LossKind::NRCE, LossKind::APL,
                     LossKind::NL, LossKind::PL})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown loss name '" + name + "'");
}

bool is_apl_active(LossKind kind) {
  return kind == LossKind::CE || kind == LossKind::NCE || kind == LossKind::FL ||
         kind == LossKind::NFL;
}

bool is_apl_passive(LossKind kind) {
  return kind == LossKind::MAE || kind == LossKind::NMAE || kind == LossKind::RCE ||
         kind == LossKind::NRCE;
}

void LossSpec::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("loss gamma must be finite and >= 0");
  if (kind == LossKind::SCE || kind == LossKind::APL) {
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
      throw std::invalid_argument("loss alpha/beta must be finite and >= 0");
  }
  if (kind == LossKind::APL) {
    if (!is_apl_active(active))
      throw std::invalid_argument("APL active loss must be one of ce, nce, fl, nfl; got " +
                                  to_string(active));
    if (!is_apl_passive(passive))
      throw std::invalid_argument("APL passive loss must be one of mae, nmae, rce, nrce; got " +
                                  to_string(passive));
  }
}

bool LossSpec::is_robust() const {
  switch (kind) {
    case LossKind::MAE:
    case LossKind::RCE:
    case LossKind::SCE:
    case LossKind::NCE:
    case LossKind::NFL:
    case LossKind::NMAE:
    case LossKind::NRCE:
    case LossKind::APL:
      return true;
    default:
      return false;
  }
}

// ---------------------------------------------------------------------------

std::vector<double> softmax_backward(const ProbVector& p, std::span<const double> dl_dp) {
  if (dl_dp.size() != p.size()) throw std::invalid_argument("softmax_backward: size mismatch");
  double dot = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) dot += p[j] * dl_dp[j];
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] * (dl_dp[i] - dot);
  return out;
}

LossOutput ce(const ProbVector& p, std::size_t y) {
  check_label(p, y);
  LossOutput out{-std::log(p.clamped(y)), std::vector<double>(p.values().begin(), p.values().end())};
  out.dlogits[y] -= 1.0;
  return out;
}

LossOutput mae(const ProbVector& p, std::size_t y) {
  check_label(p, y);
  return from_single_term(p, y, mae_term(p[y]));
}

LossOutput rce(const ProbVector& p, std::size_t y) {
  check_label(p, y);
  return from_single_term(p, y, rce_term(p[y]));
}

LossOutput fl(const ProbVector& p, std::size_t y, double gamma) {
  check_label(p, y);
  if (!(gamma >= 0.0)) throw std::invalid_argument("fl: gamma must be >= 0");
  return from_single_term(p, y, fl_term(p[y], gamma));
}

LossOutput sce(const ProbVector& p, std::size_t y, double alpha, double beta) {
  return weighted_sum(ce(p, y), alpha, rce(p, y), beta);
}

LossOutput normalized(LossKind base, const ProbVector& p, std::size_t y, double gamma) {
  check_label(p, y);
  const std::size_t k_count = p.size();
  std::vector<Scalar> terms(k_count);
  double denom = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    terms[k] = base_term(base, p[k], gamma);
    denom += terms[k].value;
  }
  if (!(denom > 0.0) || !std::isfinite(denom))
    throw std::domain_error("normalized " + to_string(base) + ": degenerate denominator");
  const double value = terms[y].value / denom;
  // d(a/b)/dp_j = phi'(p_j) (delta_jy - value) / b
  std::vector<double> g(k_count);
  for (std::size_t j = 0; j < k_count; ++j)
    g[j] = terms[j].deriv * ((j == y ? 1.0 : 0.0) - value) / denom;
  return {value, softmax_backward(p, g)};
}

LossOutput apl(LossKind active, LossKind passive, double alpha, double beta, const ProbVector& p,
               std::size_t y, double gamma) {
  LossSpec::apl(active, passive, alpha, beta).validate();
  return weighted_sum(apl_component(active, p, y, gamma), alpha, apl_component(passive, p, y, gamma),
                      beta);
}

LossOutput nl(const ProbVector& p, std::size_t ybar) {
  check_label(p, ybar);
  const double pb = p[ybar];
  const double complement = std::max(1.0 - pb, kProbFloor);
  LossOutput out{-std::log(complement), std::vector<double>(p.size())};
  for (std::size_t i = 0; i < p.size(); ++i)
    out.dlogits[i] = (i == ybar) ? pb : -pb * p[i] / complement;
  return out;
}

LossOutput evaluate_loss(const LossSpec& spec, const ProbVector& p, std::size_t y) {
  switch (spec.kind) {
    case LossKind::CE:
    case LossKind::PL:
      return ce(p, y);
    case LossKind::MAE:
      return mae(p, y);
    case LossKind::RCE:
      return rce(p, y);
    case LossKind::FL:
      return fl(p, y, spec.gamma);
    case LossKind::SCE:
      return sce(p, y, spec.alpha, spec.beta);
    case LossKind::NCE:
      return normalized(LossKind::CE, p, y, spec.gamma);
    case LossKind::NFL:
      return normalized(LossKind::FL, p, y, spec.gamma);
    case LossKind::NMAE:
      return normalized(LossKind::MAE, p, y, spec.gamma);
    case LossKind::NRCE:
      return normalized(LossKind::RCE, p, y, spec.gamma);
    case LossKind::APL:
      return apl(spec.active, spec.passive, spec.alpha, spec.beta, p, y, spec.gamma);
    case LossKind::NL:
      return nl(p, y);
  }
  throw std::invalid_argument("evaluate_loss: unknown kind");
}

BatchLossOutput confidence_penalty(std::span<const ProbVector> batch, std::span<const double> prior) {
  if (batch.empty()) throw std::invalid_argument("confidence_penalty: empty batch");
  const std::size_t k_count = prior.size();
  double prior_sum = 0.0;
  for (double v : prior) {
    if (!(v >= 0.0)) throw std::invalid_argument("confidence_penalty: prior has negative entry");
    prior_sum += v;
  }
  if (std::abs(prior_sum - 1.0) > 1e-6)
    throw std::invalid_argument("confidence_penalty: prior does not sum to 1");

  std::vector<double> mean(k_count, 0.0);
  for (const auto& p : batch) {
    if (p.size() != k_count) throw std::invalid_argument("confidence_penalty: class count mismatch");
    for (std::size_t k = 0; k < k_count; ++k) mean[k] += p[k];
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (double& m : mean) m *= inv_n;

  BatchLossOutput out;
  std::vector<double> g(k_count, 0.0);  // dL/dmean_k, pre-scaled by 1/n
  for (std::size_t k = 0; k < k_count; ++k) {
    if (prior[k] == 0.0) continue;
    const double c = std::clamp(mean[k], kProbFloor, 1.0);
    out.value += prior[k] * std::log(prior[k] / c);
    if (mean[k] > kProbFloor) g[k] = -prior[k] / c * inv_n;
  }
  out.dlogits.reserve(batch.size());
  for (const auto& p : batch) out.dlogits.push_back(softmax_backward(p, g));
  return out;
}

}  // namespace pars
