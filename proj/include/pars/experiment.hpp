#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pars/trainer.hpp"

namespace pars {

/// File form of TrainConfig plus the repetition seeds and output directory.
struct ExperimentConfig {
  TrainConfig train;
  std::vector<std::uint64_t> seeds = {0};
  std::filesystem::path out = "runs/default";
};

/// Thrown for any schema problem; the message starts with the offending key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Strict parse: unknown keys, wrong types and out-of-range values are rejected.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Every field written out explicitly; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const ExperimentConfig& config);
nlohmann::json to_json(const LossSpec& loss);
/// A loss name ("mae") or object ({"name": "apl", "active": "nce", ...}).
LossSpec loss_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

/// Column order of the metrics CSV.
const std::vector<std::string>& metrics_columns();
/// Header plus one row per record; floats at 9 significant digits.
void emit_metrics(const std::vector<MetricsRecord>& records, const std::filesystem::path& path);
void write_metrics(const std::vector<MetricsRecord>& records, std::ostream& out);
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

/// Binned max-confidence counts split by clean/noisy label, one block per stage.
void emit_confidence_histogram(const std::vector<ConfidenceSnapshot>& snapshots,
                               const std::filesystem::path& path, int bins = 20);

struct SeedSummary {
  std::uint64_t seed = 0;
  double best_accuracy = 0.0;
  int best_epoch = 0;
  double final_accuracy = 0.0;
  double best_accuracy_ema = 0.0;
  double final_accuracy_ema = 0.0;
};

/// Best and final accuracies derived from one metrics stream.
SeedSummary summarize_records(std::uint64_t seed, const std::vector<MetricsRecord>& records);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation (n - 1), 0 for one value
};
MeanStd mean_std(const std::vector<double>& values);

struct RunSummary {
  std::vector<SeedSummary> seeds;
  MeanStd best_accuracy;
  MeanStd final_accuracy;
  MeanStd best_accuracy_ema;
  MeanStd final_accuracy_ema;
};

RunSummary aggregate(std::vector<SeedSummary> seeds);
nlohmann::json to_json(const RunSummary& summary);
RunSummary summary_from_json(const nlohmann::json& doc);

struct RunArtifacts {
  std::filesystem::path resolved_config;
  std::filesystem::path summary;
  std::vector<std::filesystem::path> metrics;
  std::vector<std::filesystem::path> histograms;
};

std::filesystem::path metrics_path(const std::filesystem::path& out, std::uint64_t seed);
std::filesystem::path histogram_path(const std::filesystem::path& out, std::uint64_t seed);

struct RunOptions {
  /// Seeds run concurrently; 0 means hardware concurrency.
  unsigned jobs = 0;
  /// Progress lines per epoch go here when set.
  std::ostream* log = nullptr;
};

struct RunOutcome {
  RunSummary summary;
  RunArtifacts artifacts;
  /// Metrics per seed, in config.seeds order.
  std::vector<std::vector<MetricsRecord>> metrics;
};

/// Runs every seed (in parallel up to jobs), writes all artifacts under config.out.
RunOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Training for one seed with config.train.seed replaced.
TrainResult run_seed(const ExperimentConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Sweeps and comparisons
// ---------------------------------------------------------------------------

struct SweepPoint {
  nlohmann::json value;
  RunSummary summary;
};

/// Overrides one config key (dotted path, e.g. "tau" or "noise.ratio") with each
/// value in turn; each point writes to <out>/<param>=<value>.
std::vector<SweepPoint> run_sweep(const nlohmann::json& base_doc, const std::string& param,
                                  const std::vector<nlohmann::json>& values,
                                  const std::optional<std::filesystem::path>& out_override,
                                  const RunOptions& options = {});
void write_sweep_table(const std::string& param, const std::vector<SweepPoint>& points,
                       std::ostream& out);

/// Reuses <out>/summary.json when it matches the config exactly, otherwise runs.
RunSummary summary_for(const ExperimentConfig& config, const RunOptions& options = {});
void write_comparison(const std::vector<std::string>& names, const std::vector<RunSummary>& runs,
                      std::ostream& out);

}  // namespace pars
