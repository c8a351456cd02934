#include "pars/selection.hpp"

#include <stdexcept>

#include "pars/rng.hpp"

namespace pars {

std::vector<bool> SelectionSplit::ambiguous_mask() const {
  std::vector<bool> mask(max_confidence.size(), false);
  for (std::size_t i : ambiguous) mask[i] = true;
  return mask;
}

SelectionSplit select(std::span<const ProbVector> probs, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("select: tau must lie in [0, 1]");
  SelectionSplit split;
  split.tau = tau;
  split.max_confidence.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double m = probs[i].max();
    split.max_confidence.push_back(m);
    (m > tau ? split.ambiguous : split.noisy).push_back(i);
  }
  return split;
}

PseudoLabels make_pseudo(std::span<const ProbVector> probs, Rng& rng) {
  PseudoLabels out;
  out.positive.reserve(probs.size());
  out.complementary.reserve(probs.size());
  for (const auto& p : probs) {
    const std::size_t k_count = p.size();
    if (k_count < 2) throw std::invalid_argument("make_pseudo: need at least two classes");
    const std::size_t z = p.argmax();
    out.positive.push_back(z);
    out.complementary.push_back((z + 1 + rng.index(k_count - 1)) % k_count);
  }
  return out;
}

}  // namespace pars
