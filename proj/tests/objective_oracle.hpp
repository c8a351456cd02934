#pragma once

// Fixed 8-sample objective steps and an independent recomputation of the total
// objective from the loss module's per-sample outputs.

#include <algorithm>

#include "oracles.hpp"
#include "pars/selection.hpp"
#include "pars/trainer.hpp"

namespace pars::testing {

struct Fixture {
  ModelParams params;
  PreparedStep step;
};

// An 8 + 8 sample step on a small random network. Selection comes from the
// network itself at a tau splitting the batch roughly in half; two raw labels
// are missing.
inline Fixture make_fixture(Rng& rng, std::size_t k = 4, std::size_t d = 3) {
  const std::vector<std::size_t> widths{d, 8, 8, k};
  for (;;) {
    Fixture f;
    f.params = random_model(widths, rng, 1.5);
    bool ok = true;
    std::vector<ProbVector> raw_p, pseudo_p;
    for (int i = 0; i < 8; ++i) {
      f.step.raw_inputs.push_back(random_vector(d, rng));
      f.step.pseudo_inputs.push_back(random_vector(d, rng));
      f.step.raw_labels.push_back(static_cast<int>(rng.index(k)));
      for (const auto* x : {&f.step.raw_inputs.back(), &f.step.pseudo_inputs.back()}) {
        ok &= min_hidden_margin(f.params, *x) > 1e-3;
        for (double v : reference_softmax(reference_logits(f.params, *x))) ok &= v > 1e-5;
      }
      raw_p.push_back(predict(f.params, f.step.raw_inputs.back()));
      pseudo_p.push_back(predict(f.params, f.step.pseudo_inputs.back()));
    }
    if (!ok) continue;
    f.step.raw_labels[1] = kUnlabeled;
    f.step.raw_labels[6] = kUnlabeled;
    std::vector<double> maxes;
    for (const auto& p : raw_p) maxes.push_back(p.max());
    std::sort(maxes.begin(), maxes.end());
    const double tau = 0.5 * (maxes[3] + maxes[4]);
    f.step.raw_split = select(raw_p, tau);
    f.step.pseudo_split = select(pseudo_p, tau);
    f.step.pseudo = make_pseudo(pseudo_p, rng);
    return f;
  }
}

inline ObjectiveWeights random_weights(Rng& rng) {
  ObjectiveWeights w;
  w.robust = rng.bernoulli(0.5) ? LossSpec::apl(LossKind::NCE, LossKind::MAE)
                                : LossSpec::sce(0.1, 1.0);
  w.lambda_n = rng.uniform(0.0, 1.0);
  w.lambda_s = rng.uniform(0.0, 2.0);
  w.lambda_r = rng.uniform(0.0, 2.0);
  w.penalty_batch = static_cast<PenaltyBatch>(rng.index(3));
  return w;
}

inline double mean_or_zero(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline ObjectiveTerms recompute_objective(const Fixture& f, const ObjectiveWeights& w) {
  const std::size_t k = f.params.layers.back().bias.size();
  std::vector<ProbVector> rp, pp;
  for (const auto& x : f.step.raw_inputs) rp.push_back(predict(f.params, x));
  for (const auto& x : f.step.pseudo_inputs) pp.push_back(predict(f.params, x));

  std::vector<double> amb, neg, pos, pneg;
  for (std::size_t i = 0; i < 8; ++i) {
    const int y = f.step.raw_labels[i];
    if (y == kUnlabeled) continue;
    if (rp[i].max() > f.step.raw_split.tau)
      amb.push_back(evaluate_loss(w.robust, rp[i], static_cast<std::size_t>(y)).value);
    else
      neg.push_back(nl(rp[i], static_cast<std::size_t>(y)).value);
  }
  for (std::size_t j = 0; j < 8; ++j) {
    if (pp[j].max() > f.step.pseudo_split.tau)
      pos.push_back(ce(pp[j], pp[j].argmax()).value);
    else
      pneg.push_back(nl(pp[j], f.step.pseudo.complementary[j]).value);
  }
  std::vector<ProbVector> pen;
  if (w.penalty_batch != PenaltyBatch::Pseudo) pen.insert(pen.end(), rp.begin(), rp.end());
  if (w.penalty_batch != PenaltyBatch::Raw) pen.insert(pen.end(), pp.begin(), pp.end());
  const std::vector<double> prior(k, 1.0 / static_cast<double>(k));
  const double reg = confidence_penalty(pen, prior).value;

  const double l_raw = mean_or_zero(amb) + w.lambda_n * mean_or_zero(neg);
  const double l_pseudo = mean_or_zero(pos) + w.lambda_n * mean_or_zero(pneg);
  const double total = l_raw + w.lambda_s * l_pseudo + w.lambda_r * reg;

  return {.raw_ambiguous = mean_or_zero(amb),
          .raw_negative = mean_or_zero(neg),
          .pseudo_positive = mean_or_zero(pos),
          .pseudo_negative = mean_or_zero(pneg),
          .penalty = reg,
          .raw = l_raw,
          .pseudo = l_pseudo,
          .total = total};
}

}  // namespace pars::testing
