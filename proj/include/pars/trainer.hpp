#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pars/data.hpp"
#include "pars/losses.hpp"
#include "pars/nn.hpp"
#include "pars/selection.hpp"

namespace pars {

enum class Mode { Pars, CeBaseline, RlOnly, ParsNoPseudo, ParsNoNl, ParsSsl };
std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);

/// Which predictions feed the confidence penalty.
enum class PenaltyBatch { Pseudo, Raw, Union };
std::string to_string(PenaltyBatch batch);
PenaltyBatch penalty_batch_from_string(const std::string& name);

struct OptimizerConfig {
  double lr = 0.03;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

struct TrainConfig {
  GenerateSpec dataset;
  NoiseSpec noise;
  AugmentSpec augment = AugmentSpec::defaults_for(1.0);
  std::vector<std::size_t> hidden = {64, 64};

  /// Loss for warm-up (and RL-only); must be robust.
  LossSpec warmup_loss = LossSpec::apl(LossKind::NCE, LossKind::MAE, 1.0, 1.0);
  /// Loss applied to the ambiguous raw-label set after warm-up.
  LossSpec robust_loss = LossSpec::apl(LossKind::NCE, LossKind::MAE, 1.0, 1.0);

  double tau = 0.95;
  double lambda_n = 0.1;
  double lambda_s = 1.0;
  double lambda_r = 1.0;

  int warmup_epochs = 10;
  int epochs = 60;
  std::size_t batch_size = 64;
  std::size_t pseudo_batch_multiplier = 3;
  OptimizerConfig optimizer;
  double ema_decay = 0.999;

  std::uint64_t seed = 0;
  Mode mode = Mode::Pars;
  /// Size of the labeled subset; the rest of the training set is unlabeled.
  /// Required for ParsSsl, optional for the baselines (train on the subset).
  std::optional<std::size_t> ssl_labeled;
  PenaltyBatch penalty_batch = PenaltyBatch::Pseudo;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  /// Layer widths {D, hidden..., K}.
  std::vector<std::size_t> widths() const;
  bool uses_warmup() const;
};

// ---------------------------------------------------------------------------
// Objective assembly
// ---------------------------------------------------------------------------

/// Everything a joint training step needs, with selection, pseudo-labels and
/// augmentation already fixed. The objective is a deterministic function of
/// the parameters given this.
struct PreparedStep {
  /// Weakly augmented raw-label batch and its noisy labels (kUnlabeled allowed).
  std::vector<std::vector<double>> raw_inputs;
  std::vector<int> raw_labels;
  SelectionSplit raw_split;

  /// Strongly augmented self-training batch.
  std::vector<std::vector<double>> pseudo_inputs;
  SelectionSplit pseudo_split;
  PseudoLabels pseudo;
};

struct ObjectiveWeights {
  LossSpec robust = LossSpec::apl(LossKind::NCE, LossKind::MAE);
  double lambda_n = 0.1;
  double lambda_s = 1.0;
  double lambda_r = 1.0;
  bool use_pseudo = true;
  bool use_negative = true;
  PenaltyBatch penalty_batch = PenaltyBatch::Pseudo;
};

/// Components of L_total = L_raw + lambda_s L_pseudo + lambda_r L_reg.
struct ObjectiveTerms {
  double raw_ambiguous = 0.0;    ///< mean robust loss over labeled D_A
  double raw_negative = 0.0;     ///< mean NL on noisy labels over labeled D_N
  double pseudo_positive = 0.0;  ///< mean CE on z over pseudo D_A
  double pseudo_negative = 0.0;  ///< mean NL on zbar over pseudo D_N
  double penalty = 0.0;          ///< KL(uniform || mean prediction)
  double raw = 0.0;
  double pseudo = 0.0;
  double total = 0.0;
};

struct ObjectiveResult {
  ObjectiveTerms terms;
  ModelParams grads;
};

ObjectiveResult pars_objective(const ModelParams& params, const PreparedStep& step,
                               const ObjectiveWeights& weights);

/// Mean of `loss` over labeled samples (unlabeled ones are skipped; empty -> 0).
ObjectiveResult supervised_objective(const ModelParams& params,
                                     const std::vector<std::vector<double>>& inputs,
                                     const std::vector<int>& labels, const LossSpec& loss);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct MetricsRecord {
  int epoch = 0;
  std::string phase;  ///< "warmup", "pars" or "baseline"
  double test_accuracy = 0.0;
  double test_accuracy_ema = 0.0;
  /// Epoch means of the step objective components (see ObjectiveTerms).
  double loss_raw_ambiguous = 0.0;
  double loss_raw_negative = 0.0;
  double loss_pseudo_positive = 0.0;
  double loss_pseudo_negative = 0.0;
  double loss_penalty = 0.0;
  double loss_total = 0.0;
  /// Labeled raw-batch samples seen this epoch and how many were ambiguous.
  std::size_t raw_seen = 0;
  std::size_t ambiguous_count = 0;
  /// Fraction of ambiguous labeled samples whose noisy label is clean.
  double ambiguous_precision = 0.0;
  /// Argmax predictions vs clean labels on the samples pseudo-labeled this epoch
  /// (on the raw batches outside the joint phase).
  double pseudo_accuracy = 0.0;
  double learning_rate = 0.0;

  bool operator==(const MetricsRecord&) const = default;
};

struct EvalResult {
  double accuracy = 0.0;
  std::vector<double> max_confidence;
};

/// Top-1 accuracy on clean labels plus per-sample max confidence.
/// Throws std::invalid_argument on an empty set.
EvalResult evaluate(const ModelParams& params, const Dataset& test);

/// Max confidence of each labeled training sample and whether its noisy label is clean.
struct ConfidenceSnapshot {
  std::string stage;
  std::vector<double> max_confidence;
  std::vector<bool> label_clean;
};
ConfidenceSnapshot confidence_snapshot(const ModelParams& params, const Dataset& train,
                                       std::string stage);

/// Keeps the noisy label of a uniform random subset of labeled_count samples
/// and marks the rest unlabeled.
Dataset ssl_prepare(const Dataset& dataset, std::size_t labeled_count, std::uint64_t seed);

struct TrainResult {
  std::vector<MetricsRecord> records;
  ModelParams final_model;
  EmaParams final_ema;
  ModelParams best_model;
  double best_accuracy = 0.0;
  int best_epoch = -1;
  double best_accuracy_ema = 0.0;
  /// Taken after warm-up (if any) and at the end of training.
  std::vector<ConfidenceSnapshot> snapshots;
};

using EpochCallback = std::function<void(const MetricsRecord&)>;

/// Builds the dataset from the config (generate, inject noise, optional SSL mask)
/// with every random stream derived from config.seed.
DatasetPair build_dataset(const TrainConfig& config);

TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch = {});
/// Trains on a caller-supplied dataset (labels used as given).
TrainResult train(const TrainConfig& config, const DatasetPair& data,
                  const EpochCallback& on_epoch = {});

}  // namespace pars
