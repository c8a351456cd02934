// pars: command-line driver for noisy-label training experiments.
//
//   pars run      --config exp.json [--out DIR] [--seeds 0,1,2] [--jobs N] [--verbose]
//   pars gen-data --config exp.json [--out DIR] [--seeds 0]
//   pars sweep    --config exp.json --param tau --values 0.5 0.8 0.95 [--out DIR]
//   pars compare  --configs a.json b.json [--jobs N]

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "pars/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw pars::ConfigError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

/// Applies --out / --seeds overrides on the raw document so they pass the same
/// validation as file contents.
json with_overrides(json doc, const std::string& out, const std::vector<std::uint64_t>& seeds) {
  if (!out.empty()) doc["out"] = out;
  if (!seeds.empty()) doc["seeds"] = seeds;
  return doc;
}

void print_summary(const std::string& label, const pars::RunSummary& s) {
  std::cout << label << ": best " << s.best_accuracy.mean << " +/- " << s.best_accuracy.std
            << ", final " << s.final_accuracy.mean << " +/- " << s.final_accuracy.std
            << " (ema best " << s.best_accuracy_ema.mean << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PARS noisy-label training harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir, param;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> values, configs;
  unsigned jobs = 0;
  bool verbose = false;

  auto* run = app.add_subcommand("run", "train every seed of a config and write artifacts");
  run->add_option("--config", config_path, "experiment JSON")->required();
  run->add_option("--out", out_dir, "output directory (overrides the config)");
  run->add_option("--seeds", seeds, "seed list (overrides the config)")->delimiter(',');
  run->add_option("--jobs", jobs, "seeds to run concurrently (0 = all cores)");
  run->add_flag("--verbose", verbose, "print one line per epoch");

  auto* gen = app.add_subcommand("gen-data", "write the train/test CSVs a config would use");
  gen->add_option("--config", config_path, "experiment JSON")->required();
  gen->add_option("--out", out_dir, "output directory (overrides the config)");
  gen->add_option("--seeds", seeds, "seed list (overrides the config)")->delimiter(',');

  auto* sweep = app.add_subcommand("sweep", "run a config over several values of one key");
  sweep->add_option("--config", config_path, "experiment JSON")->required();
  sweep->add_option("--param", param, "key to vary, dotted for nested keys (e.g. noise.ratio)")
      ->required();
  sweep->add_option("--values", values, "values to try")->required()->delimiter(',');
  sweep->add_option("--out", out_dir, "output directory (overrides the config)");
  sweep->add_option("--seeds", seeds, "seed list (overrides the config)")->delimiter(',');
  sweep->add_option("--jobs", jobs, "seeds to run concurrently (0 = all cores)");

  auto* compare = app.add_subcommand("compare", "paired best-accuracy table for several configs");
  compare->add_option("--configs", configs, "experiment JSONs")->required()->expected(2, -1);
  compare->add_option("--jobs", jobs, "seeds to run concurrently (0 = all cores)");

  CLI11_PARSE(app, argc, argv);

  try {
    pars::RunOptions options;
    options.jobs = jobs;
    if (verbose) options.log = &std::cerr;

    if (*run) {
      const auto cfg = pars::parse_config(with_overrides(read_json(config_path), out_dir, seeds));
      const auto outcome = pars::run_experiment(cfg, options);
      print_summary(pars::to_string(cfg.train.mode), outcome.summary);
      std::cout << "artifacts in " << cfg.out.string() << '\n';
    } else if (*gen) {
      const auto cfg = pars::parse_config(with_overrides(read_json(config_path), out_dir, seeds));
      fs::create_directories(cfg.out);
      for (std::uint64_t seed : cfg.seeds) {
        pars::TrainConfig t = cfg.train;
        t.seed = seed;
        const auto data = pars::build_dataset(t);
        const std::string suffix = "_seed" + std::to_string(seed) + ".csv";
        pars::save_csv(data.train, cfg.out / ("train" + suffix));
        pars::save_csv(data.test, cfg.out / ("test" + suffix));
        std::cout << "seed " << seed << ": " << data.train.size() << " train / "
                  << data.test.size() << " test, clean fraction " << data.train.clean_fraction()
                  << '\n';
      }
    } else if (*sweep) {
      std::vector<json> parsed;
      for (const auto& v : values) {
        json j = json::parse(v, nullptr, false);
        parsed.push_back(j.is_discarded() ? json(v) : j);
      }
      const json doc = with_overrides(read_json(config_path), "", seeds);
      const auto out = out_dir.empty() ? std::nullopt : std::optional<fs::path>(out_dir);
      const auto points = pars::run_sweep(doc, param, parsed, out, options);
      pars::write_sweep_table(param, points, std::cout);
      const fs::path table_dir = out ? *out : pars::parse_config(doc).out;
      std::ofstream table(table_dir / "sweep_summary.csv");
      pars::write_sweep_table(param, points, table);
    } else if (*compare) {
      std::vector<pars::RunSummary> runs;
      for (const auto& path : configs)
        runs.push_back(pars::summary_for(pars::load_config(path), options));
      pars::write_comparison(configs, runs, std::cout);
    }
  } catch (const pars::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
