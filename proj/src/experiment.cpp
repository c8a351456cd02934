#include "pars/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace pars {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Strict JSON reading
// ---------------------------------------------------------------------------

namespace {

/// Reads fields of one JSON object, remembering which keys were consumed so
/// leftovers can be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object())
      throw ConfigError((prefix_.empty() ? std::string("config") : name("")) + ": expected an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, double fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_number()) throw ConfigError(name(key) + ": expected a number");
    const double d = v->get<double>();
    if (!std::isfinite(d)) throw ConfigError(name(key) + ": must be finite");
    return d;
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_number_integer() || v->get<std::int64_t>() < 0)
      throw ConfigError(name(key) + ": expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const json* v = raw(key);
    if (!v) return fallback;
    if (!v->is_string()) throw ConfigError(name(key) + ": expected a string");
    return v->get<std::string>();
  }

  std::string name(const std::string& key) const {
    if (prefix_.empty()) return key;
    return key.empty() ? prefix_ : prefix_ + "." + key;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(name(it.key()) + ": unknown key");
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

/// Converts enum-parsing errors into ConfigError naming the key.
template <typename F>
auto named(const std::string& key, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

LossKind parse_kind(const std::string& key, const std::string& name) {
  return named(key, [&] { return loss_kind_from_string(name); });
}

LossSpec parse_loss(const json& v, const std::string& key) {
  if (v.is_string()) {
    LossSpec spec = LossSpec::simple(parse_kind(key, v.get<std::string>()));
    named(key, [&] { spec.validate(); });
    return spec;
  }
  ObjectReader r(v, key);
  if (!r.has("name")) throw ConfigError(key + ".name: required");
  LossSpec spec;
  spec.kind = parse_kind(key + ".name", r.string("name", ""));
  spec.gamma = r.number("gamma", kDefaultFocalGamma);
  spec.alpha = r.number("alpha", 1.0);
  spec.beta = r.number("beta", 1.0);
  spec.active = parse_kind(key + ".active", r.string("active", "nce"));
  spec.passive = parse_kind(key + ".passive", r.string("passive", "mae"));
  r.finish();
  named(key, [&] { spec.validate(); });
  return spec;
}

}  // namespace

LossSpec loss_from_json(const json& doc) { return parse_loss(doc, "loss"); }

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  TrainConfig& t = cfg.train;
  ObjectReader root(doc, "");

  if (const json* d = root.raw("dataset")) {
    ObjectReader r(*d, "dataset");
    t.dataset.kind = named("dataset.kind", [&] { return data_kind_from_string(r.string("kind", "blobs")); });
    t.dataset.num_classes = r.count("num_classes", t.dataset.num_classes);
    t.dataset.dim = r.count("dim", t.dataset.dim);
    t.dataset.n_per_class = r.count("n_per_class", t.dataset.n_per_class);
    t.dataset.n_test_per_class = r.count("n_test_per_class", t.dataset.n_test_per_class);
    t.dataset.spread = r.number("spread", t.dataset.spread);
    r.finish();
  }
  if (const json* n = root.raw("noise")) {
    ObjectReader r(*n, "noise");
    t.noise.kind = named("noise.kind", [&] { return noise_kind_from_string(r.string("kind", "symmetric")); });
    t.noise.ratio = r.number("ratio", 0.0);
    r.finish();
  }
  t.augment = AugmentSpec::defaults_for(t.dataset.spread);
  if (const json* a = root.raw("augment")) {
    ObjectReader r(*a, "augment");
    t.augment.weak_sigma = r.number("weak_sigma", t.augment.weak_sigma);
    t.augment.strong_sigma = r.number("strong_sigma", t.augment.strong_sigma);
    t.augment.mask_prob = r.number("mask_prob", t.augment.mask_prob);
    t.augment.n_aug = static_cast<int>(r.count("n_aug", static_cast<std::uint64_t>(t.augment.n_aug)));
    r.finish();
  }
  if (const json* h = root.raw("hidden")) {
    if (!h->is_array()) throw ConfigError("hidden: expected an array of layer widths");
    t.hidden.clear();
    for (const auto& w : *h) {
      if (!w.is_number_integer() || w.get<std::int64_t>() < 1)
        throw ConfigError("hidden: layer widths must be positive integers");
      t.hidden.push_back(w.get<std::size_t>());
    }
  }
  if (const json* l = root.raw("warmup_loss")) t.warmup_loss = parse_loss(*l, "warmup_loss");
  t.robust_loss = t.warmup_loss;
  if (const json* l = root.raw("robust_loss")) t.robust_loss = parse_loss(*l, "robust_loss");

  t.tau = root.number("tau", t.tau);
  t.lambda_n = root.number("lambda_n", t.lambda_n);
  t.lambda_s = root.number("lambda_s", t.lambda_s);
  t.lambda_r = root.number("lambda_r", t.lambda_r);
  t.warmup_epochs = static_cast<int>(root.count("warmup_epochs", static_cast<std::uint64_t>(t.warmup_epochs)));
  t.epochs = static_cast<int>(root.count("epochs", static_cast<std::uint64_t>(t.epochs)));
  t.batch_size = root.count("batch_size", t.batch_size);
  t.pseudo_batch_multiplier = root.count("pseudo_batch_multiplier", t.pseudo_batch_multiplier);
  if (const json* o = root.raw("optimizer")) {
    ObjectReader r(*o, "optimizer");
    t.optimizer.lr = r.number("lr", t.optimizer.lr);
    t.optimizer.momentum = r.number("momentum", t.optimizer.momentum);
    t.optimizer.weight_decay = r.number("weight_decay", t.optimizer.weight_decay);
    r.finish();
  }
  t.ema_decay = root.number("ema_decay", t.ema_decay);
  t.mode = named("mode", [&] { return mode_from_string(root.string("mode", "pars")); });
  if (const json* s = root.raw("ssl_labeled"); s && !s->is_null()) {
    if (!s->is_number_integer() || s->get<std::int64_t>() < 0)
      throw ConfigError("ssl_labeled: expected a non-negative integer or null");
    t.ssl_labeled = s->get<std::size_t>();
  }
  t.penalty_batch =
      named("penalty_batch", [&] { return penalty_batch_from_string(root.string("penalty_batch", "pseudo")); });

  if (const json* s = root.raw("seeds")) {
    if (!s->is_array() || s->empty()) throw ConfigError("seeds: expected a non-empty array");
    cfg.seeds.clear();
    for (const auto& v : *s) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw ConfigError("seeds: entries must be non-negative integers");
      cfg.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  cfg.out = root.string("out", cfg.out.string());
  root.finish();

  t.seed = cfg.seeds.front();
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
  return parse_config(doc);
}

json to_json(const LossSpec& loss) {
  return {{"name", to_string(loss.kind)}, {"gamma", loss.gamma},
          {"alpha", loss.alpha},          {"beta", loss.beta},
          {"active", to_string(loss.active)}, {"passive", to_string(loss.passive)}};
}

json to_json(const ExperimentConfig& config) {
  const TrainConfig& t = config.train;
  json doc;
  doc["dataset"] = {{"kind", to_string(t.dataset.kind)},
                    {"num_classes", t.dataset.num_classes},
                    {"dim", t.dataset.dim},
                    {"n_per_class", t.dataset.n_per_class},
                    {"n_test_per_class", t.dataset.n_test_per_class},
                    {"spread", t.dataset.spread}};
  doc["noise"] = {{"kind", to_string(t.noise.kind)}, {"ratio", t.noise.ratio}};
  doc["augment"] = {{"weak_sigma", t.augment.weak_sigma},
                    {"strong_sigma", t.augment.strong_sigma},
                    {"mask_prob", t.augment.mask_prob},
                    {"n_aug", t.augment.n_aug}};
  doc["hidden"] = t.hidden;
  doc["warmup_loss"] = to_json(t.warmup_loss);
  doc["robust_loss"] = to_json(t.robust_loss);
  doc["tau"] = t.tau;
  doc["lambda_n"] = t.lambda_n;
  doc["lambda_s"] = t.lambda_s;
  doc["lambda_r"] = t.lambda_r;
  doc["warmup_epochs"] = t.warmup_epochs;
  doc["epochs"] = t.epochs;
  doc["batch_size"] = t.batch_size;
  doc["pseudo_batch_multiplier"] = t.pseudo_batch_multiplier;
  doc["optimizer"] = {{"lr", t.optimizer.lr},
                      {"momentum", t.optimizer.momentum},
                      {"weight_decay", t.optimizer.weight_decay}};
  doc["ema_decay"] = t.ema_decay;
  doc["mode"] = to_string(t.mode);
  doc["ssl_labeled"] = t.ssl_labeled ? json(*t.ssl_labeled) : json(nullptr);
  doc["penalty_batch"] = to_string(t.penalty_batch);
  doc["seeds"] = config.seeds;
  doc["out"] = config.out.string();
  return doc;
}

// ---------------------------------------------------------------------------
// Metrics CSV
// ---------------------------------------------------------------------------

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> columns = {
      "epoch",           "phase",
      "test_accuracy",   "test_accuracy_ema",
      "loss_raw_ambiguous", "loss_raw_negative",
      "loss_pseudo_positive", "loss_pseudo_negative",
      "loss_penalty",    "loss_total",
      "raw_seen",        "ambiguous_count",
      "ambiguous_precision", "pseudo_accuracy",
      "learning_rate"};
  return columns;
}

namespace {

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void write_metrics(const std::vector<MetricsRecord>& records, std::ostream& out) {
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : records) {
    out << r.epoch << ',' << r.phase << ',' << fmt9(r.test_accuracy) << ','
        << fmt9(r.test_accuracy_ema) << ',' << fmt9(r.loss_raw_ambiguous) << ','
        << fmt9(r.loss_raw_negative) << ',' << fmt9(r.loss_pseudo_positive) << ','
        << fmt9(r.loss_pseudo_negative) << ',' << fmt9(r.loss_penalty) << ','
        << fmt9(r.loss_total) << ',' << r.raw_seen << ',' << r.ambiguous_count << ','
        << fmt9(r.ambiguous_precision) << ',' << fmt9(r.pseudo_accuracy) << ','
        << fmt9(r.learning_rate) << '\n';
  }
}

void emit_metrics(const std::vector<MetricsRecord>& records, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_metrics(records, out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<MetricsRecord> read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::ostringstream expected;
  for (std::size_t i = 0; i < metrics_columns().size(); ++i)
    expected << (i ? "," : "") << metrics_columns()[i];
  if (line != expected.str()) throw std::runtime_error(path.string() + ": unexpected metrics header");
  std::vector<MetricsRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != metrics_columns().size())
      throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) +
                               " has the wrong number of fields");
    try {
      MetricsRecord r;
      r.epoch = std::stoi(f[0]);
      r.phase = f[1];
      r.test_accuracy = std::stod(f[2]);
      r.test_accuracy_ema = std::stod(f[3]);
      r.loss_raw_ambiguous = std::stod(f[4]);
      r.loss_raw_negative = std::stod(f[5]);
      r.loss_pseudo_positive = std::stod(f[6]);
      r.loss_pseudo_negative = std::stod(f[7]);
      r.loss_penalty = std::stod(f[8]);
      r.loss_total = std::stod(f[9]);
      r.raw_seen = std::stoull(f[10]);
      r.ambiguous_count = std::stoull(f[11]);
      r.ambiguous_precision = std::stod(f[12]);
      r.pseudo_accuracy = std::stod(f[13]);
      r.learning_rate = std::stod(f[14]);
      records.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) +
                               " is malformed");
    }
  }
  return records;
}

void emit_confidence_histogram(const std::vector<ConfidenceSnapshot>& snapshots, const fs::path& path,
                               int bins) {
  if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "stage,bin_lo,bin_hi,clean_count,noisy_count\n";
  for (const auto& snap : snapshots) {
    std::vector<std::size_t> clean(static_cast<std::size_t>(bins), 0), noisy(clean);
    for (std::size_t i = 0; i < snap.max_confidence.size(); ++i) {
      auto b = static_cast<std::size_t>(snap.max_confidence[i] * bins);
      b = std::min(b, static_cast<std::size_t>(bins - 1));
      (snap.label_clean[i] ? clean : noisy)[b]++;
    }
    for (int b = 0; b < bins; ++b)
      out << snap.stage << ',' << fmt9(static_cast<double>(b) / bins) << ','
          << fmt9(static_cast<double>(b + 1) / bins) << ',' << clean[static_cast<std::size_t>(b)]
          << ',' << noisy[static_cast<std::size_t>(b)] << '\n';
  }
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

SeedSummary summarize_records(std::uint64_t seed, const std::vector<MetricsRecord>& records) {
  SeedSummary s;
  s.seed = seed;
  if (records.empty()) return s;
  s.best_accuracy = -1.0;
  for (const auto& r : records) {
    if (r.test_accuracy > s.best_accuracy) {
      s.best_accuracy = r.test_accuracy;
      s.best_epoch = r.epoch;
    }
    s.best_accuracy_ema = std::max(s.best_accuracy_ema, r.test_accuracy_ema);
  }
  s.final_accuracy = records.back().test_accuracy;
  s.final_accuracy_ema = records.back().test_accuracy_ema;
  return s;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd m;
  if (values.empty()) return m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

RunSummary aggregate(std::vector<SeedSummary> seeds) {
  RunSummary s;
  s.seeds = std::move(seeds);
  std::vector<double> best, fin, best_ema, fin_ema;
  for (const auto& x : s.seeds) {
    best.push_back(x.best_accuracy);
    fin.push_back(x.final_accuracy);
    best_ema.push_back(x.best_accuracy_ema);
    fin_ema.push_back(x.final_accuracy_ema);
  }
  s.best_accuracy = mean_std(best);
  s.final_accuracy = mean_std(fin);
  s.best_accuracy_ema = mean_std(best_ema);
  s.final_accuracy_ema = mean_std(fin_ema);
  return s;
}

namespace {
json ms_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }
MeanStd ms_from(const json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }
}  // namespace

json to_json(const RunSummary& summary) {
  json doc;
  doc["seeds"] = json::array();
  for (const auto& s : summary.seeds)
    doc["seeds"].push_back({{"seed", s.seed},
                            {"best_accuracy", s.best_accuracy},
                            {"best_epoch", s.best_epoch},
                            {"final_accuracy", s.final_accuracy},
                            {"best_accuracy_ema", s.best_accuracy_ema},
                            {"final_accuracy_ema", s.final_accuracy_ema}});
  doc["best_accuracy"] = ms_json(summary.best_accuracy);
  doc["final_accuracy"] = ms_json(summary.final_accuracy);
  doc["best_accuracy_ema"] = ms_json(summary.best_accuracy_ema);
  doc["final_accuracy_ema"] = ms_json(summary.final_accuracy_ema);
  return doc;
}

RunSummary summary_from_json(const json& doc) {
  RunSummary s;
  for (const auto& j : doc.at("seeds"))
    s.seeds.push_back({j.at("seed").get<std::uint64_t>(), j.at("best_accuracy").get<double>(),
                       j.at("best_epoch").get<int>(), j.at("final_accuracy").get<double>(),
                       j.at("best_accuracy_ema").get<double>(),
                       j.at("final_accuracy_ema").get<double>()});
  s.best_accuracy = ms_from(doc.at("best_accuracy"));
  s.final_accuracy = ms_from(doc.at("final_accuracy"));
  s.best_accuracy_ema = ms_from(doc.at("best_accuracy_ema"));
  s.final_accuracy_ema = ms_from(doc.at("final_accuracy_ema"));
  return s;
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

fs::path metrics_path(const fs::path& out, std::uint64_t seed) {
  return out / ("metrics_seed" + std::to_string(seed) + ".csv");
}

fs::path histogram_path(const fs::path& out, std::uint64_t seed) {
  return out / ("confidence_seed" + std::to_string(seed) + ".csv");
}

TrainResult run_seed(const ExperimentConfig& config, std::uint64_t seed) {
  TrainConfig t = config.train;
  t.seed = seed;
  return train(t);
}

namespace {

void write_json(const json& doc, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  fs::create_directories(config.out);
  RunOutcome outcome;
  outcome.artifacts.resolved_config = config.out / "resolved_config.json";
  outcome.artifacts.summary = config.out / "summary.json";
  write_json(to_json(config), outcome.artifacts.resolved_config);

  const std::size_t n = config.seeds.size();
  outcome.metrics.resize(n);
  std::vector<SeedSummary> summaries(n);
  std::vector<std::exception_ptr> errors(n);
  std::mutex log_mutex;

  auto run_one = [&](std::size_t i) {
    try {
      const std::uint64_t seed = config.seeds[i];
      TrainConfig t = config.train;
      t.seed = seed;
      EpochCallback cb;
      if (options.log) {
        cb = [&, seed](const MetricsRecord& r) {
          std::lock_guard lock(log_mutex);
          *options.log << "seed " << seed << " epoch " << r.epoch << " [" << r.phase
                       << "] acc " << fmt9(r.test_accuracy) << " ema "
                       << fmt9(r.test_accuracy_ema) << " loss " << fmt9(r.loss_total) << '\n';
        };
      }
      TrainResult res = train(t, cb);
      emit_metrics(res.records, metrics_path(config.out, seed));
      emit_confidence_histogram(res.snapshots, histogram_path(config.out, seed));
      summaries[i] = summarize_records(seed, res.records);
      outcome.metrics[i] = std::move(res.records);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  unsigned jobs = options.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.jobs;
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, n));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run_one(i);
      });
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::uint64_t seed : config.seeds) {
    outcome.artifacts.metrics.push_back(metrics_path(config.out, seed));
    outcome.artifacts.histograms.push_back(histogram_path(config.out, seed));
  }
  outcome.summary = aggregate(std::move(summaries));
  json summary_doc = to_json(outcome.summary);
  summary_doc["config"] = to_json(config);
  write_json(summary_doc, outcome.artifacts.summary);
  return outcome;
}

// ---------------------------------------------------------------------------
// Sweeps and comparisons
// ---------------------------------------------------------------------------

namespace {

std::string value_label(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

std::vector<SweepPoint> run_sweep(const json& base_doc, const std::string& param,
                                  const std::vector<json>& values,
                                  const std::optional<fs::path>& out_override,
                                  const RunOptions& options) {
  if (values.empty()) throw ConfigError("values: at least one sweep value is required");
  std::string pointer = "/" + param;
  std::replace(pointer.begin(), pointer.end(), '.', '/');
  const fs::path base_out =
      out_override ? *out_override : fs::path(parse_config(base_doc).out);

  std::vector<SweepPoint> points;
  for (const json& v : values) {
    json doc = base_doc;
    doc[json::json_pointer(pointer)] = v;
    ExperimentConfig cfg = parse_config(doc);
    cfg.out = base_out / (param + "=" + value_label(v));
    points.push_back({v, run_experiment(cfg, options).summary});
  }
  return points;
}

void write_sweep_table(const std::string& param, const std::vector<SweepPoint>& points,
                       std::ostream& out) {
  out << param << ",best_mean,best_std,final_mean,final_std\n";
  for (const auto& p : points)
    out << value_label(p.value) << ',' << fmt9(p.summary.best_accuracy.mean) << ','
        << fmt9(p.summary.best_accuracy.std) << ',' << fmt9(p.summary.final_accuracy.mean) << ','
        << fmt9(p.summary.final_accuracy.std) << '\n';
}

RunSummary summary_for(const ExperimentConfig& config, const RunOptions& options) {
  const fs::path path = config.out / "summary.json";
  if (fs::exists(path)) {
    std::ifstream in(path);
    json doc = json::parse(in, nullptr, false);
    if (!doc.is_discarded() && doc.contains("config") && doc["config"] == to_json(config))
      return summary_from_json(doc);
  }
  return run_experiment(config, options).summary;
}

void write_comparison(const std::vector<std::string>& names, const std::vector<RunSummary>& runs,
                      std::ostream& out) {
  if (names.size() != runs.size()) throw std::invalid_argument("compare: names/runs mismatch");
  out << "seed";
  for (const auto& n : names) out << ',' << n;
  if (runs.size() == 2) out << ",diff";
  out << '\n';
  std::size_t rows = 0;
  for (const auto& r : runs) rows = std::max(rows, r.seeds.size());
  for (std::size_t i = 0; i < rows; ++i) {
    out << (i < runs.front().seeds.size() ? std::to_string(runs.front().seeds[i].seed) : "-");
    for (const auto& r : runs) out << ',' << (i < r.seeds.size() ? fmt9(r.seeds[i].best_accuracy) : "");
    if (runs.size() == 2 && i < runs[0].seeds.size() && i < runs[1].seeds.size())
      out << ',' << fmt9(runs[1].seeds[i].best_accuracy - runs[0].seeds[i].best_accuracy);
    out << '\n';
  }
  out << "mean";
  for (const auto& r : runs) out << ',' << fmt9(r.best_accuracy.mean);
  out << "\nstd";
  for (const auto& r : runs) out << ',' << fmt9(r.best_accuracy.std);
  out << '\n';
}

}  // namespace pars
