#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pars/nn.hpp"

namespace pars {

class Rng;

/// Partition of a batch by max predicted confidence.
struct SelectionSplit {
  /// Indices whose max confidence is strictly above tau.
  std::vector<std::size_t> ambiguous;
  /// Everything else.
  std::vector<std::size_t> noisy;
  std::vector<double> max_confidence;
  double tau = 0.0;

  /// Membership mask over the batch, true for ambiguous.
  std::vector<bool> ambiguous_mask() const;
};

/// Label-free confidence thresholding: i is ambiguous iff max_k p_i[k] > tau.
/// Throws std::invalid_argument unless tau lies in [0, 1].
SelectionSplit select(std::span<const ProbVector> probs, double tau);

struct PseudoLabels {
  /// argmax class per sample, lowest index on ties.
  std::vector<std::size_t> positive;
  /// Complementary label, uniform over the other K - 1 classes.
  std::vector<std::size_t> complementary;
};

/// Throws std::invalid_argument if any vector has fewer than two classes.
PseudoLabels make_pseudo(std::span<const ProbVector> probs, Rng& rng);

}  // namespace pars
