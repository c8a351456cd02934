#include "pars/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pars/rng.hpp"

namespace pars {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Pars: return "pars";
    case Mode::CeBaseline: return "ce-baseline";
    case Mode::RlOnly: return "rl-only";
    case Mode::ParsNoPseudo: return "pars-no-pseudo";
    case Mode::ParsNoNl: return "pars-no-nl";
    case Mode::ParsSsl: return "pars-ssl";
  }
  return "?";
}

Mode mode_from_string(const std::string& name) {
  for (Mode m : {Mode::Pars, Mode::CeBaseline, Mode::RlOnly, Mode::ParsNoPseudo, Mode::ParsNoNl,
                 Mode::ParsSsl})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown mode '" + name + "'");
}

std::string to_string(PenaltyBatch batch) {
  switch (batch) {
    case PenaltyBatch::Pseudo: return "pseudo";
    case PenaltyBatch::Raw: return "raw";
    case PenaltyBatch::Union: return "union";
  }
  return "?";
}

PenaltyBatch penalty_batch_from_string(const std::string& name) {
  for (PenaltyBatch b : {PenaltyBatch::Pseudo, PenaltyBatch::Raw, PenaltyBatch::Union})
    if (to_string(b) == name) return b;
  throw std::invalid_argument("unknown penalty batch '" + name + "'");
}

// ---------------------------------------------------------------------------

namespace {

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw std::invalid_argument(key + ": " + what);
}

}  // namespace

bool TrainConfig::uses_warmup() const {
  return mode != Mode::CeBaseline && mode != Mode::RlOnly;
}

void TrainConfig::validate() const {
  require(dataset.num_classes >= 2, "dataset.num_classes", "must be >= 2");
  require(dataset.dim >= 1, "dataset.dim", "must be >= 1");
  require(dataset.n_per_class >= 1, "dataset.n_per_class", "must be >= 1");
  require(dataset.spread >= 0.0, "dataset.spread", "must be >= 0");
  require(noise.ratio >= 0.0 && noise.ratio <= 1.0, "noise.ratio", "must lie in [0, 1]");
  try {
    augment.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("augment: ") + e.what());
  }
  for (std::size_t h : hidden) require(h >= 1, "hidden", "layer widths must be >= 1");
  try {
    warmup_loss.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("warmup_loss: ") + e.what());
  }
  try {
    robust_loss.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("robust_loss: ") + e.what());
  }
  if (mode != Mode::CeBaseline)
    require(warmup_loss.is_robust(), "warmup_loss", "must be a robust loss");
  require(tau >= 0.0 && tau <= 1.0, "tau", "must lie in [0, 1]");
  require(lambda_n >= 0.0 && std::isfinite(lambda_n), "lambda_n", "must be finite and >= 0");
  require(lambda_s >= 0.0 && std::isfinite(lambda_s), "lambda_s", "must be finite and >= 0");
  require(lambda_r >= 0.0 && std::isfinite(lambda_r), "lambda_r", "must be finite and >= 0");
  require(epochs >= 1, "epochs", "must be >= 1");
  require(warmup_epochs >= 0, "warmup_epochs", "must be >= 0");
  require(warmup_epochs < epochs, "warmup_epochs", "must be smaller than epochs");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(pseudo_batch_multiplier >= 1, "pseudo_batch_multiplier", "must be >= 1");
  require(optimizer.lr > 0.0, "optimizer.lr", "must be > 0");
  require(optimizer.momentum >= 0.0 && optimizer.momentum < 1.0, "optimizer.momentum",
          "must lie in [0, 1)");
  require(optimizer.weight_decay >= 0.0, "optimizer.weight_decay", "must be >= 0");
  require(ema_decay >= 0.0 && ema_decay <= 1.0, "ema_decay", "must lie in [0, 1]");
  if (mode == Mode::ParsSsl) require(ssl_labeled.has_value(), "ssl_labeled", "required for pars-ssl");
  if (ssl_labeled)
    require(*ssl_labeled <= dataset.n_per_class * dataset.num_classes, "ssl_labeled",
            "exceeds the training set size");
}

std::vector<std::size_t> TrainConfig::widths() const {
  std::vector<std::size_t> w{dataset.dim};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(dataset.num_classes);
  return w;
}

// ---------------------------------------------------------------------------
// Objective assembly
// ---------------------------------------------------------------------------

namespace {

void add_scaled(std::vector<double>& dst, const std::vector<double>& src, double scale) {
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
}

std::vector<std::size_t> labeled_subset(const std::vector<std::size_t>& idx,
                                        const std::vector<int>& labels) {
  std::vector<std::size_t> out;
  out.reserve(idx.size());
  for (std::size_t i : idx)
    if (labels[i] != kUnlabeled) out.push_back(i);
  return out;
}

}  // namespace

ObjectiveResult pars_objective(const ModelParams& params, const PreparedStep& step,
                               const ObjectiveWeights& w) {
  const std::size_t nr = step.raw_inputs.size();
  const std::size_t np = step.pseudo_inputs.size();
  if (step.raw_labels.size() != nr || step.raw_split.max_confidence.size() != nr)
    throw std::invalid_argument("pars_objective: raw batch pieces disagree in size");
  if (step.pseudo_split.max_confidence.size() != np || step.pseudo.positive.size() != np ||
      step.pseudo.complementary.size() != np)
    throw std::invalid_argument("pars_objective: pseudo batch pieces disagree in size");

  const std::size_t k_count = params.output_dim();
  std::vector<ForwardCache> raw_cache(nr), pseudo_cache(np);
  std::vector<ProbVector> raw_p(nr), pseudo_p(np);
  std::vector<std::vector<double>> raw_d(nr, std::vector<double>(k_count, 0.0));
  std::vector<std::vector<double>> pseudo_d(np, std::vector<double>(k_count, 0.0));
  for (std::size_t i = 0; i < nr; ++i) {
    mlp_forward(params, step.raw_inputs[i], raw_cache[i]);
    raw_p[i] = softmax(raw_cache[i].logits());
  }
  for (std::size_t j = 0; j < np; ++j) {
    mlp_forward(params, step.pseudo_inputs[j], pseudo_cache[j]);
    pseudo_p[j] = softmax(pseudo_cache[j].logits());
  }

  ObjectiveTerms t;

  // L_raw: robust loss on ambiguous noisy labels, NL on the rest.
  const auto raw_amb = labeled_subset(step.raw_split.ambiguous, step.raw_labels);
  if (!raw_amb.empty()) {
    const double scale = 1.0 / static_cast<double>(raw_amb.size());
    for (std::size_t i : raw_amb) {
      const auto out = evaluate_loss(w.robust, raw_p[i], static_cast<std::size_t>(step.raw_labels[i]));
      t.raw_ambiguous += out.value;
      add_scaled(raw_d[i], out.dlogits, scale);
    }
    t.raw_ambiguous /= static_cast<double>(raw_amb.size());
  }
  if (w.use_negative) {
    const auto raw_neg = labeled_subset(step.raw_split.noisy, step.raw_labels);
    if (!raw_neg.empty()) {
      const double scale = 1.0 / static_cast<double>(raw_neg.size());
      for (std::size_t i : raw_neg) {
        const auto out = nl(raw_p[i], static_cast<std::size_t>(step.raw_labels[i]));
        t.raw_negative += out.value;
        add_scaled(raw_d[i], out.dlogits, w.lambda_n * scale);
      }
      t.raw_negative /= static_cast<double>(raw_neg.size());
    }
  }
  t.raw = t.raw_ambiguous + w.lambda_n * t.raw_negative;

  // L_pseudo: CE on z for ambiguous, NL on zbar for the rest.
  if (w.use_pseudo) {
    const auto& amb = step.pseudo_split.ambiguous;
    if (!amb.empty()) {
      const double scale = 1.0 / static_cast<double>(amb.size());
      for (std::size_t j : amb) {
        const auto out = ce(pseudo_p[j], step.pseudo.positive[j]);
        t.pseudo_positive += out.value;
        add_scaled(pseudo_d[j], out.dlogits, w.lambda_s * scale);
      }
      t.pseudo_positive /= static_cast<double>(amb.size());
    }
    const auto& neg = step.pseudo_split.noisy;
    if (w.use_negative && !neg.empty()) {
      const double scale = 1.0 / static_cast<double>(neg.size());
      for (std::size_t j : neg) {
        const auto out = nl(pseudo_p[j], step.pseudo.complementary[j]);
        t.pseudo_negative += out.value;
        add_scaled(pseudo_d[j], out.dlogits, w.lambda_s * w.lambda_n * scale);
      }
      t.pseudo_negative /= static_cast<double>(neg.size());
    }
    t.pseudo = t.pseudo_positive + w.lambda_n * t.pseudo_negative;
  }

  // L_reg against a uniform prior.
  std::vector<ProbVector> penalty_probs;
  std::vector<std::vector<double>*> penalty_targets;
  if (w.penalty_batch != PenaltyBatch::Pseudo)
    for (std::size_t i = 0; i < nr; ++i) {
      penalty_probs.push_back(raw_p[i]);
      penalty_targets.push_back(&raw_d[i]);
    }
  if (w.penalty_batch != PenaltyBatch::Raw)
    for (std::size_t j = 0; j < np; ++j) {
      penalty_probs.push_back(pseudo_p[j]);
      penalty_targets.push_back(&pseudo_d[j]);
    }
  if (!penalty_probs.empty()) {
    const std::vector<double> prior(k_count, 1.0 / static_cast<double>(k_count));
    const auto reg = confidence_penalty(penalty_probs, prior);
    t.penalty = reg.value;
    for (std::size_t b = 0; b < penalty_targets.size(); ++b)
      add_scaled(*penalty_targets[b], reg.dlogits[b], w.lambda_r);
  }

  t.total = t.raw + w.lambda_s * t.pseudo + w.lambda_r * t.penalty;

  ModelParams grads = params.zeros_like();
  for (std::size_t i = 0; i < nr; ++i) mlp_backward(params, raw_cache[i], raw_d[i], grads);
  for (std::size_t j = 0; j < np; ++j) mlp_backward(params, pseudo_cache[j], pseudo_d[j], grads);
  return {t, std::move(grads)};
}

ObjectiveResult supervised_objective(const ModelParams& params,
                                     const std::vector<std::vector<double>>& inputs,
                                     const std::vector<int>& labels, const LossSpec& loss) {
  if (inputs.size() != labels.size())
    throw std::invalid_argument("supervised_objective: inputs and labels disagree in size");
  ObjectiveResult res{{}, params.zeros_like()};
  const std::size_t n = static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](int y) { return y != kUnlabeled; }));
  if (n == 0) return res;
  const double scale = 1.0 / static_cast<double>(n);
  ForwardCache cache;
  std::vector<double> d;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (labels[i] == kUnlabeled) continue;
    mlp_forward(params, inputs[i], cache);
    const auto out = evaluate_loss(loss, softmax(cache.logits()), static_cast<std::size_t>(labels[i]));
    res.terms.raw_ambiguous += out.value;
    d.assign(out.dlogits.size(), 0.0);
    add_scaled(d, out.dlogits, scale);
    mlp_backward(params, cache, d, res.grads);
  }
  res.terms.raw_ambiguous /= static_cast<double>(n);
  res.terms.raw = res.terms.raw_ambiguous;
  res.terms.total = res.terms.raw;
  return res;
}

// ---------------------------------------------------------------------------
// Evaluation and data preparation
// ---------------------------------------------------------------------------

EvalResult evaluate(const ModelParams& params, const Dataset& test) {
  if (test.samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  EvalResult out;
  out.max_confidence.reserve(test.size());
  std::size_t correct = 0;
  for (const auto& s : test.samples) {
    const ProbVector p = predict(params, s.features);
    out.max_confidence.push_back(p.max());
    if (static_cast<int>(p.argmax()) == s.clean_label) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  return out;
}

ConfidenceSnapshot confidence_snapshot(const ModelParams& params, const Dataset& train,
                                       std::string stage) {
  ConfidenceSnapshot snap;
  snap.stage = std::move(stage);
  for (const auto& s : train.samples) {
    if (!s.labeled()) continue;
    snap.max_confidence.push_back(predict(params, s.features).max());
    snap.label_clean.push_back(s.noisy_label == s.clean_label);
  }
  return snap;
}

Dataset ssl_prepare(const Dataset& dataset, std::size_t labeled_count, std::uint64_t seed) {
  if (labeled_count > dataset.size())
    throw std::invalid_argument("ssl_prepare: labeled_count exceeds dataset size");
  Rng rng(seed, "ssl/subset");
  const auto perm = rng.permutation(dataset.size());
  Dataset out = dataset;
  for (std::size_t r = labeled_count; r < perm.size(); ++r)
    out.samples[perm[r]].noisy_label = kUnlabeled;
  return out;
}

DatasetPair build_dataset(const TrainConfig& config) {
  DatasetPair data = generate(config.dataset, config.seed);
  data.train = inject_noise(data.train, config.noise, config.seed);
  if (config.ssl_labeled) data.train = ssl_prepare(data.train, *config.ssl_labeled, config.seed);
  return data;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

/// Endless shuffled pass over a pool of sample indices.
class CyclicSampler {
 public:
  CyclicSampler(std::vector<std::size_t> pool, Rng rng) : pool_(std::move(pool)), rng_(rng) {}

  std::size_t pool_size() const { return pool_.size(); }

  std::vector<std::size_t> next(std::size_t n) {
    std::vector<std::size_t> out;
    out.reserve(n);
    while (out.size() < n) {
      if (pos_ == order_.size()) {
        order_ = rng_.permutation(pool_.size());
        pos_ = 0;
      }
      out.push_back(pool_[order_[pos_++]]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> pool_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

enum class Phase { Baseline, Warmup, Joint };

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

struct EpochStats {
  ObjectiveTerms sums;
  std::size_t steps = 0;
  std::size_t raw_seen = 0;
  std::size_t ambiguous = 0;
  std::size_t ambiguous_clean = 0;
  std::size_t pseudo_seen = 0;
  std::size_t pseudo_correct = 0;

  void add(const ObjectiveTerms& t) {
    sums.raw_ambiguous += t.raw_ambiguous;
    sums.raw_negative += t.raw_negative;
    sums.pseudo_positive += t.pseudo_positive;
    sums.pseudo_negative += t.pseudo_negative;
    sums.penalty += t.penalty;
    sums.total += t.total;
    ++steps;
  }

  /// Selection and argmax statistics for one batch of probabilities.
  void observe(const std::vector<std::size_t>& idx, const std::vector<ProbVector>& probs,
               const SelectionSplit* split, const Dataset& train, bool count_selection) {
    const auto mask = split ? split->ambiguous_mask() : std::vector<bool>(idx.size(), false);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const Sample& s = train.samples[idx[b]];
      if (count_selection && s.labeled()) {
        ++raw_seen;
        if (mask[b]) {
          ++ambiguous;
          if (s.noisy_label == s.clean_label) ++ambiguous_clean;
        }
      }
      if (!count_selection || split == nullptr) {
        ++pseudo_seen;
        if (static_cast<int>(probs[b].argmax()) == s.clean_label) ++pseudo_correct;
      }
    }
  }
};

std::vector<ProbVector> predict_batch(const ModelParams& model, const Dataset& train,
                                      const std::vector<std::size_t>& idx) {
  std::vector<ProbVector> probs;
  probs.reserve(idx.size());
  for (std::size_t i : idx) probs.push_back(predict(model, train.samples[i].features));
  return probs;
}

}  // namespace

TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  return train(config, build_dataset(config), on_epoch);
}

TrainResult train(const TrainConfig& config, const DatasetPair& data, const EpochCallback& on_epoch) {
  config.validate();
  const Dataset& train_set = data.train;
  const Dataset& test_set = data.test;
  train_set.validate();
  test_set.validate();
  if (train_set.dim != test_set.dim || train_set.num_classes != test_set.num_classes)
    throw std::invalid_argument("train and test splits disagree in shape");
  if (train_set.samples.empty()) throw std::invalid_argument("training set is empty");

  std::vector<std::size_t> widths{train_set.dim};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(train_set.num_classes);

  const std::uint64_t seed = config.seed;
  Rng init_rng(seed, "init");
  ModelParams model = ModelParams::glorot(widths, init_rng);
  EmaParams ema{model, config.ema_decay};

  std::vector<std::size_t> labeled_pool, full_pool;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    full_pool.push_back(i);
    if (train_set.samples[i].labeled()) labeled_pool.push_back(i);
  }
  CyclicSampler raw_sampler(labeled_pool, Rng(seed, "sampler/raw"));
  CyclicSampler pseudo_sampler(full_pool, Rng(seed, "sampler/pseudo"));
  Rng augment_rng(seed, "augment");
  Rng complementary_rng(seed, "complementary");

  // Plan the epochs so the cosine schedule knows the total step count.
  std::vector<Phase> phases(static_cast<std::size_t>(config.epochs));
  for (int e = 0; e < config.epochs; ++e) {
    Phase p = Phase::Joint;
    if (!config.uses_warmup()) p = Phase::Baseline;
    else if (e < config.warmup_epochs) p = Phase::Warmup;
    phases[static_cast<std::size_t>(e)] = p;
  }
  const std::size_t raw_batch = std::min(config.batch_size, labeled_pool.size());
  const std::size_t pseudo_batch =
      std::min(config.batch_size * config.pseudo_batch_multiplier, full_pool.size());
  auto steps_for = [&](Phase p) -> std::size_t {
    if (p == Phase::Joint) return ceil_div(full_pool.size(), config.batch_size);
    return labeled_pool.empty() ? 0 : ceil_div(labeled_pool.size(), config.batch_size);
  };
  std::int64_t total_steps = 0;
  for (Phase p : phases) total_steps += static_cast<std::int64_t>(steps_for(p));
  OptimState opt(model, std::max<std::int64_t>(total_steps, 1), config.optimizer.lr,
                 config.optimizer.momentum, config.optimizer.weight_decay);

  const LossSpec baseline_loss =
      config.mode == Mode::CeBaseline ? LossSpec::simple(LossKind::CE) : config.warmup_loss;
  ObjectiveWeights weights{.robust = config.robust_loss,
                           .lambda_n = config.lambda_n,
                           .lambda_s = config.lambda_s,
                           .lambda_r = config.lambda_r,
                           .use_pseudo = config.mode != Mode::ParsNoPseudo,
                           .use_negative = config.mode != Mode::ParsNoNl,
                           .penalty_batch = config.penalty_batch};

  TrainResult result;
  result.best_accuracy = -1.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const Phase phase = phases[static_cast<std::size_t>(epoch)];
    const std::size_t steps = steps_for(phase);
    EpochStats stats;

    for (std::size_t s = 0; s < steps; ++s) {
      ObjectiveResult res;
      const auto raw_idx = raw_sampler.next(raw_batch);
      const auto raw_probs = predict_batch(model, train_set, raw_idx);
      const SelectionSplit raw_split = select(raw_probs, config.tau);

      std::vector<std::vector<double>> raw_inputs;
      std::vector<int> raw_labels;
      raw_inputs.reserve(raw_idx.size());
      for (std::size_t i : raw_idx) {
        raw_inputs.push_back(weak_augment(train_set.samples[i].features, config.augment, augment_rng));
        raw_labels.push_back(train_set.samples[i].noisy_label);
      }

      if (phase == Phase::Joint) {
        const auto pseudo_idx = pseudo_sampler.next(pseudo_batch);
        PreparedStep step;
        step.raw_inputs = std::move(raw_inputs);
        step.raw_labels = std::move(raw_labels);
        step.raw_split = raw_split;
        const auto pseudo_probs = predict_batch(model, train_set, pseudo_idx);
        step.pseudo_split = select(pseudo_probs, config.tau);
        step.pseudo = make_pseudo(pseudo_probs, complementary_rng);
        step.pseudo_inputs.reserve(pseudo_idx.size());
        for (std::size_t i : pseudo_idx)
          step.pseudo_inputs.push_back(
              strong_augment(train_set.samples[i].features, config.augment, augment_rng));
        res = pars_objective(model, step, weights);
        stats.observe(raw_idx, raw_probs, &raw_split, train_set, true);
        stats.observe(pseudo_idx, pseudo_probs, nullptr, train_set, false);
      } else {
        const LossSpec& loss = phase == Phase::Warmup ? config.warmup_loss : baseline_loss;
        res = supervised_objective(model, raw_inputs, raw_labels, loss);
        stats.observe(raw_idx, raw_probs, &raw_split, train_set, true);
        stats.observe(raw_idx, raw_probs, nullptr, train_set, false);
      }

      if (!std::isfinite(res.terms.total))
        throw std::runtime_error("non-finite objective at epoch " + std::to_string(epoch));
      stats.add(res.terms);
      sgd_step(model, res.grads, opt);
      ema_update(ema, model);
    }

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.phase = phase == Phase::Joint ? "pars" : (phase == Phase::Warmup ? "warmup" : "baseline");
    rec.test_accuracy = evaluate(model, test_set).accuracy;
    rec.test_accuracy_ema = evaluate(ema.shadow, test_set).accuracy;
    if (stats.steps > 0) {
      const double inv = 1.0 / static_cast<double>(stats.steps);
      rec.loss_raw_ambiguous = stats.sums.raw_ambiguous * inv;
      rec.loss_raw_negative = stats.sums.raw_negative * inv;
      rec.loss_pseudo_positive = stats.sums.pseudo_positive * inv;
      rec.loss_pseudo_negative = stats.sums.pseudo_negative * inv;
      rec.loss_penalty = stats.sums.penalty * inv;
      rec.loss_total = stats.sums.total * inv;
    }
    rec.raw_seen = stats.raw_seen;
    rec.ambiguous_count = stats.ambiguous;
    rec.ambiguous_precision = stats.ambiguous == 0 ? 0.0
                                                   : static_cast<double>(stats.ambiguous_clean) /
                                                         static_cast<double>(stats.ambiguous);
    rec.pseudo_accuracy = stats.pseudo_seen == 0 ? 0.0
                                                 : static_cast<double>(stats.pseudo_correct) /
                                                       static_cast<double>(stats.pseudo_seen);
    rec.learning_rate = opt.current_lr();

    if (rec.test_accuracy > result.best_accuracy) {
      result.best_accuracy = rec.test_accuracy;
      result.best_epoch = epoch;
      result.best_model = model;
    }
    result.best_accuracy_ema = std::max(result.best_accuracy_ema, rec.test_accuracy_ema);
    result.records.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (phase == Phase::Warmup && epoch + 1 == config.warmup_epochs)
      result.snapshots.push_back(confidence_snapshot(model, train_set, "warmup_end"));
  }
  result.snapshots.push_back(confidence_snapshot(model, train_set, "final"));
  result.final_model = std::move(model);
  result.final_ema = std::move(ema);
  return result;
}

}  // namespace pars
