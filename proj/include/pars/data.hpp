#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pars {

class Rng;

/// noisy_label value marking a sample without a label (semi-supervised mode).
inline constexpr int kUnlabeled = -1;

struct Sample {
  std::vector<double> features;
  int clean_label = 0;
  int noisy_label = 0;
  std::int64_t id = 0;

  bool labeled() const { return noisy_label != kUnlabeled; }
  bool operator==(const Sample&) const = default;
};

enum class Split { Train, Test };

struct Dataset {
  std::vector<Sample> samples;
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  Split split = Split::Train;

  std::size_t size() const { return samples.size(); }
  /// Fraction of labeled samples whose noisy label equals the clean label.
  double clean_fraction() const;
  std::size_t labeled_count() const;
  /// Throws std::invalid_argument if any invariant is broken.
  void validate() const;
  bool operator==(const Dataset&) const = default;
};

struct DatasetPair {
  Dataset train;
  Dataset test;
};

enum class DataKind { Blobs, Spiral, Rings };
std::string to_string(DataKind kind);
DataKind data_kind_from_string(const std::string& name);

struct GenerateSpec {
  DataKind kind = DataKind::Blobs;
  std::size_t num_classes = 5;
  std::size_t dim = 2;
  std::size_t n_per_class = 400;
  /// Test samples per class; 0 means "same as n_per_class".
  std::size_t n_test_per_class = 0;
  double spread = 1.0;
};

/// Balanced synthetic train/test pair, deterministic in seed.
///
/// blobs:  Gaussian clusters (std = spread) whose centres sit on a circle in the
///         first two coordinates with neighbouring centres 6 units apart; any
///         further coordinates get a per-class offset drawn N(0, 3^2).
/// spiral: K interleaved arms of an Archimedean spiral, isotropic noise of
///         std 0.1 * spread on every coordinate.
/// rings:  K concentric circles of radius 1..K, radial noise std 0.1 * spread;
///         extra coordinates are pure noise.
DatasetPair generate(const GenerateSpec& spec, std::uint64_t seed);

enum class NoiseKind { Symmetric, Asymmetric };
std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& name);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::Symmetric;
  double ratio = 0.0;
};

/// A uniformly chosen subset of round(r * n) samples gets a label drawn
/// uniformly from the K - 1 other classes. clean_label is never touched.
Dataset inject_symmetric(const Dataset& dataset, double ratio, std::uint64_t seed);
/// A uniformly chosen subset of round(r * n) samples has label k mapped to (k + 1) mod K.
Dataset inject_asymmetric(const Dataset& dataset, double ratio, std::uint64_t seed);
Dataset inject_noise(const Dataset& dataset, const NoiseSpec& noise, std::uint64_t seed);

struct AugmentSpec {
  double weak_sigma = 0.05;
  double strong_sigma = 0.2;
  double mask_prob = 0.1;
  int n_aug = 2;

  /// Defaults scaled to the data spread.
  static AugmentSpec defaults_for(double spread);
  void validate() const;
};

/// x + N(0, weak_sigma^2) per coordinate.
std::vector<double> weak_augment(std::span<const double> x, const AugmentSpec& spec, Rng& rng);
/// n_aug rounds of: jitter with N(0, strong_sigma^2), then zero each coordinate
/// independently with probability mask_prob.
std::vector<double> strong_augment(std::span<const double> x, const AugmentSpec& spec, Rng& rng);

/// Header: id,f_0..f_{D-1},clean_label,noisy_label. Floats use 17 significant
/// digits so save/load is lossless. noisy_label -1 encodes "unlabeled".
void save_csv(const Dataset& dataset, const std::filesystem::path& path);
/// Throws std::runtime_error naming the offending line on malformed input.
/// num_classes defaults to 1 + the largest label seen.
Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes = 0,
                 Split split = Split::Train);

}  // namespace pars
