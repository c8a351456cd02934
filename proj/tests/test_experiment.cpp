#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pars/experiment.hpp"

using namespace pars;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::path(PARS_BINARY_DIR) / "scratch" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

json small_doc() {
  return json::parse(R"({
    "dataset": {"kind": "blobs", "num_classes": 3, "n_per_class": 40},
    "noise": {"kind": "symmetric", "ratio": 0.4},
    "hidden": [8, 8],
    "epochs": 4,
    "warmup_epochs": 2,
    "batch_size": 16,
    "seeds": [0, 1, 2]
  })");
}

// Plain CSV reader for the metrics files: column name -> values.
std::map<std::string, std::vector<std::string>> read_columns(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> names;
  std::stringstream hs(line);
  for (std::string c; std::getline(hs, c, ',');) names.push_back(c);
  std::map<std::string, std::vector<std::string>> cols;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::size_t i = 0;
    for (std::string c; std::getline(ls, c, ','); ++i) cols[names.at(i)].push_back(c);
  }
  return cols;
}

}  // namespace

TEST_CASE("empty config resolves to the defaults") {
  const auto c = parse_config(json::object());
  const TrainConfig d;
  CHECK(c.train.tau == d.tau);
  CHECK(c.train.lambda_n == d.lambda_n);
  CHECK(c.train.lambda_s == d.lambda_s);
  CHECK(c.train.lambda_r == d.lambda_r);
  CHECK(c.train.epochs == 60);
  CHECK(c.train.warmup_epochs == 10);
  CHECK(c.train.batch_size == 64);
  CHECK(c.train.pseudo_batch_multiplier == 3);
  CHECK(c.train.optimizer.lr == 0.03);
  CHECK(c.train.ema_decay == 0.999);
  CHECK(c.train.warmup_loss == LossSpec::apl(LossKind::NCE, LossKind::MAE, 1.0, 1.0));
  CHECK(c.train.hidden == std::vector<std::size_t>{64, 64});
  CHECK(c.train.mode == Mode::Pars);
  CHECK(c.train.penalty_batch == PenaltyBatch::Pseudo);
  CHECK(c.seeds == std::vector<std::uint64_t>{0});
}

TEST_CASE("schema errors name the offending key") {
  CHECK(config_error({{"tau", 1.5}}).rfind("tau", 0) == 0);
  CHECK(config_error({{"tau", "high"}}).rfind("tau", 0) == 0);
  CHECK(config_error({{"tua", 0.9}}).rfind("tua", 0) == 0);
  CHECK(config_error({{"dataset", {{"kind", "moons"}}}}).rfind("dataset.kind", 0) == 0);
  CHECK(config_error({{"dataset", {{"colour", 1}}}}).rfind("dataset.colour", 0) == 0);
  CHECK(config_error({{"noise", {{"ratio", 1.2}}}}).rfind("noise.ratio", 0) == 0);
  CHECK(config_error({{"epochs", -3}}).rfind("epochs", 0) == 0);
  CHECK(config_error({{"epochs", 5}, {"warmup_epochs", 5}}).rfind("warmup_epochs", 0) == 0);
  CHECK(config_error({{"mode", "co-teaching"}}).rfind("mode", 0) == 0);
  CHECK(config_error({{"warmup_loss", "ce"}}).rfind("warmup_loss", 0) == 0);
  CHECK(config_error({{"robust_loss", {{"name", "apl"}, {"active", "mae"}}}}).rfind("robust_loss", 0) == 0);
  CHECK(config_error({{"optimizer", {{"lr", 0}}}}).rfind("optimizer.lr", 0) == 0);
  CHECK(config_error({{"seeds", json::array()}}).rfind("seeds", 0) == 0);
  CHECK(config_error({{"mode", "pars-ssl"}}).rfind("ssl_labeled", 0) == 0);
  CHECK(config_error(json::array()).size() > 0);
}

TEST_CASE("losses parse from names and objects") {
  auto c = parse_config({{"warmup_loss", "mae"}});
  CHECK(c.train.warmup_loss == LossSpec::simple(LossKind::MAE));
  CHECK(c.train.robust_loss == LossSpec::simple(LossKind::MAE));  // follows the warm-up loss
  c = parse_config({{"robust_loss", {{"name", "apl"}, {"active", "nfl"}, {"passive", "rce"}, {"alpha", 2.0}}}});
  CHECK(c.train.robust_loss == LossSpec::apl(LossKind::NFL, LossKind::RCE, 2.0, 1.0));
  c = parse_config({{"warmup_loss", {{"name", "sce"}, {"alpha", 0.1}, {"beta", 1.0}}}});
  CHECK(c.train.warmup_loss == LossSpec::sce(0.1, 1.0));
}

TEST_CASE("augment defaults scale with spread") {
  const auto c = parse_config({{"dataset", {{"spread", 2.0}}}});
  CHECK(c.train.augment.weak_sigma == doctest::Approx(0.1));
  CHECK(c.train.augment.strong_sigma == doctest::Approx(0.4));
  const auto d = parse_config({{"dataset", {{"spread", 2.0}}}, {"augment", {{"weak_sigma", 0.01}}}});
  CHECK(d.train.augment.weak_sigma == 0.01);
  CHECK(d.train.augment.strong_sigma == doctest::Approx(0.4));
}

TEST_CASE("to_json round-trips") {
  auto doc = small_doc();
  doc["mode"] = "pars-ssl";
  doc["ssl_labeled"] = 20;
  doc["penalty_batch"] = "union";
  const auto c = parse_config(doc);
  const auto again = parse_config(to_json(c));
  CHECK(to_json(again) == to_json(c));
  CHECK(again.train.ssl_labeled == std::optional<std::size_t>(20));
  CHECK(again.train.penalty_batch == PenaltyBatch::Union);
}

TEST_CASE("metrics csv") {
  const auto dir = scratch("metrics");
  emit_metrics({}, dir / "empty.csv");
  CHECK(read_metrics(dir / "empty.csv").empty());
  std::ifstream in(dir / "empty.csv");
  std::string header, extra;
  std::getline(in, header);
  CHECK_FALSE(std::getline(in, extra));
  CHECK(header.rfind("epoch,phase,test_accuracy,", 0) == 0);

  MetricsRecord r;
  r.epoch = 3;
  r.phase = "pars";
  r.test_accuracy = 0.123456789123;
  r.loss_total = 1.0 / 3.0;
  r.raw_seen = 64;
  r.ambiguous_count = 17;
  r.learning_rate = 0.0299;
  emit_metrics({r, r}, dir / "two.csv");
  const auto back = read_metrics(dir / "two.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].epoch == 3);
  CHECK(back[0].phase == "pars");
  CHECK(back[0].test_accuracy == doctest::Approx(r.test_accuracy).epsilon(1e-8));
  CHECK(back[0].loss_total == doctest::Approx(r.loss_total).epsilon(1e-8));
  CHECK(back[0].raw_seen == 64);
  CHECK(back[0].ambiguous_count == 17);
  const auto cols = read_columns(dir / "two.csv");
  CHECK(cols.at("test_accuracy")[0] == "0.123456789");

  std::ofstream(dir / "bad.csv") << header << "\n1,pars,x\n";
  CHECK_THROWS(read_metrics(dir / "bad.csv"));
}

TEST_CASE("summary statistics") {
  CHECK(mean_std({}).mean == 0.0);
  CHECK(mean_std({0.5}).std == 0.0);
  const auto m = mean_std({1.0, 2.0, 4.0});
  CHECK(m.mean == doctest::Approx(7.0 / 3.0));
  CHECK(m.std == doctest::Approx(std::sqrt(((1 - 7.0 / 3) * (1 - 7.0 / 3) + (2 - 7.0 / 3) * (2 - 7.0 / 3) +
                                            (4 - 7.0 / 3) * (4 - 7.0 / 3)) / 2.0)));
  std::vector<MetricsRecord> recs(3);
  recs[0].test_accuracy = 0.5;
  recs[1].test_accuracy = 0.7;
  recs[1].epoch = 1;
  recs[2].test_accuracy = 0.6;
  recs[2].epoch = 2;
  recs[2].test_accuracy_ema = 0.65;
  const auto s = summarize_records(9, recs);
  CHECK(s.best_accuracy == 0.7);
  CHECK(s.best_epoch == 1);
  CHECK(s.final_accuracy == 0.6);
  CHECK(s.best_accuracy_ema == 0.65);
  const auto j = to_json(aggregate({s, s}));
  CHECK(to_json(summary_from_json(j)) == j);
}

TEST_CASE("run artifacts: summary recomputes from the csvs, parallel runs match serial ones") {
  auto doc = small_doc();
  doc["out"] = scratch("serial").string();
  const auto serial_cfg = parse_config(doc);
  const auto serial = run_experiment(serial_cfg, {.jobs = 1});
  doc["out"] = scratch("parallel").string();
  const auto parallel_cfg = parse_config(doc);
  const auto parallel = run_experiment(parallel_cfg, {.jobs = 3});

  REQUIRE(serial.artifacts.metrics.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(slurp(serial.artifacts.metrics[i]) == slurp(parallel.artifacts.metrics[i]));
    CHECK(slurp(serial.artifacts.histograms[i]) == slurp(parallel.artifacts.histograms[i]));
    CHECK(serial.metrics[i] == parallel.metrics[i]);
  }
  CHECK(to_json(serial.summary) == to_json(parallel.summary));

  // independent recomputation from the files
  std::vector<double> best;
  for (const auto& path : serial.artifacts.metrics) {
    const auto cols = read_columns(path);
    CHECK(cols.at("epoch").size() == 4);
    double b = -1;
    for (const auto& v : cols.at("test_accuracy")) b = std::max(b, std::stod(v));
    best.push_back(b);
  }
  const double mean = (best[0] + best[1] + best[2]) / 3.0;
  double ss = 0;
  for (double b : best) ss += (b - mean) * (b - mean);
  std::ifstream sin(serial.artifacts.summary);
  const json sj = json::parse(sin);
  CHECK(sj.at("best_accuracy").at("mean").get<double>() == doctest::Approx(mean).epsilon(1e-8));
  CHECK(sj.at("best_accuracy").at("std").get<double>() == doctest::Approx(std::sqrt(ss / 2.0)).epsilon(1e-9));
  CHECK(sj.at("config") == to_json(serial_cfg));

  // histogram: header plus 20 bins per stage, counts cover the training set
  const auto hist = read_columns(serial.artifacts.histograms[0]);
  CHECK(hist.at("stage").size() == 40);
  std::size_t total = 0;
  for (std::size_t i = 0; i < 20; ++i)
    total += std::stoul(hist.at("clean_count")[i]) + std::stoul(hist.at("noisy_count")[i]);
  CHECK(total == 120);

  // the resolved config alone reproduces the run bit for bit
  auto resolved = load_config(serial.artifacts.resolved_config);
  resolved.out = scratch("rerun");
  const auto rerun = run_experiment(resolved, {.jobs = 2});
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(slurp(rerun.artifacts.metrics[i]) == slurp(serial.artifacts.metrics[i]));
}

TEST_CASE("compare table matches an independent recomputation") {
  auto a = small_doc();
  a["out"] = scratch("cmp_a").string();
  auto b = small_doc();
  b["mode"] = "rl-only";
  b["warmup_epochs"] = 0;
  b["out"] = scratch("cmp_b").string();
  const auto ca = parse_config(a), cb = parse_config(b);
  const auto ra = summary_for(ca), rb = summary_for(cb);
  std::ostringstream table;
  write_comparison({"a", "b"}, {ra, rb}, table);

  auto csv_mean_std = [](const ExperimentConfig& c) {
    std::vector<double> best;
    for (auto seed : c.seeds) {
      double m = -1;
      const auto cols = read_columns(metrics_path(c.out, seed));
      for (const auto& v : cols.at("test_accuracy")) m = std::max(m, std::stod(v));
      best.push_back(m);
    }
    double mean = 0;
    for (double x : best) mean += x / static_cast<double>(best.size());
    double ss = 0;
    for (double x : best) ss += (x - mean) * (x - mean);
    return std::pair{mean, std::sqrt(ss / static_cast<double>(best.size() - 1))};
  };
  std::map<std::string, std::vector<std::string>> rows;
  std::stringstream ts(table.str());
  for (std::string line; std::getline(ts, line);) {
    std::stringstream ls(line);
    std::string key;
    std::getline(ls, key, ',');
    for (std::string c; std::getline(ls, c, ',');) rows[key].push_back(c);
  }
  const auto [ma, sa] = csv_mean_std(ca);
  const auto [mb, sb] = csv_mean_std(cb);
  CHECK(std::stod(rows.at("mean")[0]) == doctest::Approx(ma).epsilon(1e-8));
  CHECK(std::stod(rows.at("mean")[1]) == doctest::Approx(mb).epsilon(1e-8));
  CHECK(std::stod(rows.at("std")[0]) == doctest::Approx(sa).epsilon(1e-7));
  CHECK(std::stod(rows.at("std")[1]) == doctest::Approx(sb).epsilon(1e-7));
  CHECK(rows.at("0").size() == 3);  // a, b, diff

  // a matching summary.json is reused rather than recomputed
  std::ifstream in(ca.out / "summary.json");
  json doc = json::parse(in);
  in.close();
  doc["best_accuracy"]["mean"] = 0.123;
  std::ofstream(ca.out / "summary.json") << doc.dump();
  CHECK(summary_for(ca).best_accuracy.mean == 0.123);
}

TEST_CASE("sweep writes one run per value") {
  auto doc = small_doc();
  doc["seeds"] = {0};
  const auto out = scratch("sweep");
  const auto points = run_sweep(doc, "tau", {0.5, 0.95}, out);
  REQUIRE(points.size() == 2);
  CHECK(fs::exists(out / "tau=0.5" / "summary.json"));
  CHECK(fs::exists(out / "tau=0.95" / "metrics_seed0.csv"));
  const auto nested = run_sweep(doc, "noise.ratio", {0.2}, out);
  CHECK(fs::exists(out / "noise.ratio=0.2" / "summary.json"));
  std::ostringstream table;
  write_sweep_table("tau", points, table);
  CHECK(table.str().rfind("tau,best_mean,best_std,final_mean,final_std\n0.5,", 0) == 0);
  CHECK_THROWS_AS(run_sweep(doc, "tau", {1.5}, out), ConfigError);
  CHECK_THROWS_AS(run_sweep(doc, "tau", {}, out), ConfigError);
}
