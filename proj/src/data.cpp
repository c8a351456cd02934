#include "pars/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "pars/rng.hpp"

namespace pars {

double Dataset::clean_fraction() const {
  std::size_t labeled = 0, clean = 0;
  for (const auto& s : samples) {
    if (!s.labeled()) continue;
    ++labeled;
    if (s.noisy_label == s.clean_label) ++clean;
  }
  return labeled == 0 ? 0.0 : static_cast<double>(clean) / static_cast<double>(labeled);
}

std::size_t Dataset::labeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const Sample& s) { return s.labeled(); }));
}

void Dataset::validate() const {
  if (num_classes < 2) throw std::invalid_argument("dataset needs at least two classes");
  const int k = static_cast<int>(num_classes);
  for (const auto& s : samples) {
    const std::string where = "sample " + std::to_string(s.id);
    if (s.features.size() != dim) throw std::invalid_argument(where + ": wrong feature dimension");
    for (double f : s.features)
      if (!std::isfinite(f)) throw std::invalid_argument(where + ": non-finite feature");
    if (s.clean_label < 0 || s.clean_label >= k)
      throw std::invalid_argument(where + ": clean label out of range");
    if (s.noisy_label < kUnlabeled || s.noisy_label >= k)
      throw std::invalid_argument(where + ": noisy label out of range");
    if (split == Split::Test && s.noisy_label != s.clean_label)
      throw std::invalid_argument(where + ": test samples must carry their clean label");
  }
}

std::string to_string(DataKind kind) {
  switch (kind) {
    case DataKind::Blobs: return "blobs";
    case DataKind::Spiral: return "spiral";
    case DataKind::Rings: return "rings";
  }
  return "?";
}

DataKind data_kind_from_string(const std::string& name) {
  if (name == "blobs") return DataKind::Blobs;
  if (name == "spiral") return DataKind::Spiral;
  if (name == "rings") return DataKind::Rings;
  throw std::invalid_argument("unsupported dataset kind '" + name + "'");
}

std::string to_string(NoiseKind kind) {
  return kind == NoiseKind::Symmetric ? "symmetric" : "asymmetric";
}

NoiseKind noise_kind_from_string(const std::string& name) {
  if (name == "symmetric") return NoiseKind::Symmetric;
  if (name == "asymmetric") return NoiseKind::Asymmetric;
  throw std::invalid_argument("unsupported noise kind '" + name + "'");
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kBlobSpacing = 6.0;
constexpr double kBlobExtraStd = 3.0;
constexpr double kSpiralRadius = 5.0;
constexpr double kSpiralTurns = 1.5;

std::vector<std::vector<double>> blob_centers(const GenerateSpec& spec, std::uint64_t seed) {
  const std::size_t k_count = spec.num_classes;
  const double radius = (kBlobSpacing / 2.0) / std::sin(std::numbers::pi / static_cast<double>(k_count));
  Rng rng(seed, "generate/centers");
  std::vector<std::vector<double>> centers(k_count, std::vector<double>(spec.dim, 0.0));
  for (std::size_t k = 0; k < k_count; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(k_count);
    centers[k][0] = radius * std::cos(angle);
    if (spec.dim > 1) centers[k][1] = radius * std::sin(angle);
    for (std::size_t d = 2; d < spec.dim; ++d) centers[k][d] = kBlobExtraStd * rng.normal();
  }
  return centers;
}

std::vector<double> draw_point(const GenerateSpec& spec, std::size_t k,
                               const std::vector<std::vector<double>>& centers, Rng& rng) {
  std::vector<double> x(spec.dim, 0.0);
  const double k_count = static_cast<double>(spec.num_classes);
  const double noise = 0.1 * spec.spread;
  switch (spec.kind) {
    case DataKind::Blobs:
      for (std::size_t d = 0; d < spec.dim; ++d) x[d] = centers[k][d] + spec.spread * rng.normal();
      return x;
    case DataKind::Spiral: {
      const double t = rng.uniform(0.05, 1.0);
      const double angle =
          2.0 * std::numbers::pi * (static_cast<double>(k) / k_count + kSpiralTurns * t);
      const double r = kSpiralRadius * t;
      x[0] = r * std::cos(angle);
      if (spec.dim > 1) x[1] = r * std::sin(angle);
      for (std::size_t d = 0; d < spec.dim; ++d) x[d] += noise * rng.normal();
      return x;
    }
    case DataKind::Rings: {
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double r = static_cast<double>(k + 1) + noise * rng.normal();
      x[0] = r * std::cos(angle);
      if (spec.dim > 1) x[1] = r * std::sin(angle);
      for (std::size_t d = 2; d < spec.dim; ++d) x[d] = noise * rng.normal();
      return x;
    }
  }
  throw std::invalid_argument("unsupported dataset kind");
}

Dataset draw_split(const GenerateSpec& spec, std::size_t per_class, Split split,
                   const std::vector<std::vector<double>>& centers, Rng& rng) {
  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.dim = spec.dim;
  ds.split = split;
  ds.samples.reserve(per_class * spec.num_classes);
  std::int64_t id = 0;
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Sample s;
      s.features = draw_point(spec, k, centers, rng);
      s.clean_label = static_cast<int>(k);
      s.noisy_label = s.clean_label;
      s.id = id++;
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

void check_injectable(const Dataset& dataset, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    throw std::invalid_argument("noise ratio must lie in [0, 1]");
  if (dataset.split != Split::Train)
    throw std::invalid_argument("label noise can only be injected into a training split");
  if (dataset.num_classes < 2) throw std::invalid_argument("noise injection needs K >= 2");
  for (const auto& s : dataset.samples)
    if (!s.labeled()) throw std::invalid_argument("noise injection requires labeled samples");
}

std::vector<std::size_t> flip_subset(std::size_t n, double ratio, Rng& rng) {
  const auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  std::vector<std::size_t> perm = rng.permutation(n);
  perm.resize(std::min(count, n));
  std::sort(perm.begin(), perm.end());
  return perm;
}

}  // namespace

DatasetPair generate(const GenerateSpec& spec, std::uint64_t seed) {
  if (spec.num_classes < 2) throw std::invalid_argument("generate: num_classes must be >= 2");
  if (spec.n_per_class < 1) throw std::invalid_argument("generate: n_per_class must be >= 1");
  if (spec.dim < 1) throw std::invalid_argument("generate: dim must be >= 1");
  if (!(spec.spread >= 0.0)) throw std::invalid_argument("generate: spread must be >= 0");
  const auto centers = spec.kind == DataKind::Blobs ? blob_centers(spec, seed)
                                                    : std::vector<std::vector<double>>{};
  Rng train_rng(seed, "generate/train");
  Rng test_rng(seed, "generate/test");
  const std::size_t n_test = spec.n_test_per_class == 0 ? spec.n_per_class : spec.n_test_per_class;
  return {draw_split(spec, spec.n_per_class, Split::Train, centers, train_rng),
          draw_split(spec, n_test, Split::Test, centers, test_rng)};
}

Dataset inject_symmetric(const Dataset& dataset, double ratio, std::uint64_t seed) {
  check_injectable(dataset, ratio);
  Rng rng(seed, "noise/symmetric");
  Dataset out = dataset;
  for (auto& s : out.samples) s.noisy_label = s.clean_label;
  const std::size_t k_count = dataset.num_classes;
  for (std::size_t i : flip_subset(out.size(), ratio, rng)) {
    auto& s = out.samples[i];
    const std::size_t offset = 1 + rng.index(k_count - 1);
    s.noisy_label = static_cast<int>((static_cast<std::size_t>(s.clean_label) + offset) % k_count);
  }
  return out;
}

Dataset inject_asymmetric(const Dataset& dataset, double ratio, std::uint64_t seed) {
  check_injectable(dataset, ratio);
  Rng rng(seed, "noise/asymmetric");
  Dataset out = dataset;
  for (auto& s : out.samples) s.noisy_label = s.clean_label;
  const int k_count = static_cast<int>(dataset.num_classes);
  for (std::size_t i : flip_subset(out.size(), ratio, rng)) {
    auto& s = out.samples[i];
    s.noisy_label = (s.clean_label + 1) % k_count;
  }
  return out;
}

Dataset inject_noise(const Dataset& dataset, const NoiseSpec& noise, std::uint64_t seed) {
  return noise.kind == NoiseKind::Symmetric ? inject_symmetric(dataset, noise.ratio, seed)
                                            : inject_asymmetric(dataset, noise.ratio, seed);
}

// ---------------------------------------------------------------------------

AugmentSpec AugmentSpec::defaults_for(double spread) {
  return {.weak_sigma = 0.05 * spread, .strong_sigma = 0.2 * spread, .mask_prob = 0.1, .n_aug = 2};
}

void AugmentSpec::validate() const {
  if (!(weak_sigma >= 0.0)) throw std::invalid_argument("augment weak_sigma must be >= 0");
  if (!(strong_sigma >= weak_sigma))
    throw std::invalid_argument("augment strong_sigma must be >= weak_sigma");
  if (!(mask_prob >= 0.0 && mask_prob < 1.0))
    throw std::invalid_argument("augment mask_prob must lie in [0, 1)");
  if (n_aug < 1) throw std::invalid_argument("augment n_aug must be >= 1");
}

std::vector<double> weak_augment(std::span<const double> x, const AugmentSpec& spec, Rng& rng) {
  std::vector<double> out(x.begin(), x.end());
  if (spec.weak_sigma > 0.0)
    for (double& v : out) v += spec.weak_sigma * rng.normal();
  return out;
}

std::vector<double> strong_augment(std::span<const double> x, const AugmentSpec& spec, Rng& rng) {
  std::vector<double> out(x.begin(), x.end());
  for (int round = 0; round < spec.n_aug; ++round) {
    for (double& v : out) {
      if (spec.strong_sigma > 0.0) v += spec.strong_sigma * rng.normal();
      if (spec.mask_prob > 0.0 && rng.bernoulli(spec.mask_prob)) v = 0.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "id";
  for (std::size_t d = 0; d < dataset.dim; ++d) out << ",f_" << d;
  out << ",clean_label,noisy_label\n";
  char buf[32];
  for (const auto& s : dataset.samples) {
    out << s.id;
    for (double f : s.features) {
      std::snprintf(buf, sizeof buf, "%.17g", f);
      out << ',' << buf;
    }
    out << ',' << s.clean_label << ',' << s.noisy_label << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <typename T>
T parse_field(std::string_view field, std::size_t line_no, const char* what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw std::runtime_error("line " + std::to_string(line_no) + ": cannot parse " + what + " '" +
                             std::string(field) + "'");
  return value;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes, Split split) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("line 1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header.size() < 4 || header.front() != "id" || header[header.size() - 2] != "clean_label" ||
      header.back() != "noisy_label")
    throw std::runtime_error("line 1: header must be id,f_0..f_{D-1},clean_label,noisy_label");

  Dataset ds;
  ds.dim = header.size() - 3;
  ds.split = split;
  int max_label = -1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size())
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " fields, got " +
                               std::to_string(fields.size()));
    Sample s;
    s.id = parse_field<std::int64_t>(fields[0], line_no, "id");
    s.features.reserve(ds.dim);
    for (std::size_t d = 0; d < ds.dim; ++d) {
      const double f = parse_field<double>(fields[1 + d], line_no, "feature");
      if (!std::isfinite(f))
        throw std::runtime_error("line " + std::to_string(line_no) + ": non-finite feature");
      s.features.push_back(f);
    }
    s.clean_label = parse_field<int>(fields[ds.dim + 1], line_no, "clean_label");
    s.noisy_label = parse_field<int>(fields[ds.dim + 2], line_no, "noisy_label");
    const int limit = num_classes > 0 ? static_cast<int>(num_classes) : INT32_MAX;
    if (s.clean_label < 0 || s.clean_label >= limit)
      throw std::runtime_error("line " + std::to_string(line_no) + ": clean_label out of range");
    if (s.noisy_label < kUnlabeled || s.noisy_label >= limit)
      throw std::runtime_error("line " + std::to_string(line_no) + ": noisy_label out of range");
    max_label = std::max({max_label, s.clean_label, s.noisy_label});
    ds.samples.push_back(std::move(s));
  }
  ds.num_classes = num_classes > 0 ? num_classes : static_cast<std::size_t>(max_label + 1);
  return ds;
}

}  // namespace pars
