#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pars/experiment.hpp"
#include "pars/losses.hpp"
#include "pars/rng.hpp"
#include "pars/selection.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

std::vector<pars::ProbVector> to_probs(const std::vector<std::vector<double>>& rows) {
  std::vector<pars::ProbVector> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.emplace_back(r);
  return out;
}

py::tuple loss_tuple(const pars::LossOutput& o) { return py::make_tuple(o.value, o.dlogits); }

py::dict split_dict(const pars::Dataset& d) {
  std::vector<std::vector<double>> x;
  std::vector<int> clean, noisy;
  for (const auto& s : d.samples) {
    x.push_back(s.features);
    clean.push_back(s.clean_label);
    noisy.push_back(s.noisy_label);
  }
  py::dict out;
  out["x"] = x;
  out["clean"] = clean;
  out["noisy"] = noisy;
  return out;
}

py::dict record_dict(const pars::MetricsRecord& r) {
  py::dict d;
  d["epoch"] = r.epoch;
  d["phase"] = r.phase;
  d["test_accuracy"] = r.test_accuracy;
  d["test_accuracy_ema"] = r.test_accuracy_ema;
  d["loss_raw_ambiguous"] = r.loss_raw_ambiguous;
  d["loss_raw_negative"] = r.loss_raw_negative;
  d["loss_pseudo_positive"] = r.loss_pseudo_positive;
  d["loss_pseudo_negative"] = r.loss_pseudo_negative;
  d["loss_penalty"] = r.loss_penalty;
  d["loss_total"] = r.loss_total;
  d["raw_seen"] = r.raw_seen;
  d["ambiguous_count"] = r.ambiguous_count;
  d["ambiguous_precision"] = r.ambiguous_precision;
  d["pseudo_accuracy"] = r.pseudo_accuracy;
  d["learning_rate"] = r.learning_rate;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Noisy-label training core";

  m.def("softmax", [](const std::vector<double>& logits) {
    const auto p = pars::softmax(logits);
    return std::vector<double>(p.values().begin(), p.values().end());
  }, py::arg("logits"));

  m.def(
      "loss",
      [](const std::string& spec, const std::vector<double>& probs, std::size_t label) {
        return loss_tuple(pars::evaluate_loss(pars::loss_from_json(json::parse(spec)), pars::ProbVector(probs), label));
      },
      py::arg("spec"), py::arg("probs"), py::arg("label"));

  m.def("nl", [](const std::vector<double>& probs, std::size_t ybar) {
    return loss_tuple(pars::nl(pars::ProbVector(probs), ybar));
  }, py::arg("probs"), py::arg("ybar"));

  m.def("confidence_penalty", [](const std::vector<std::vector<double>>& batch, const std::vector<double>& prior) {
    const auto probs = to_probs(batch);
    const auto o = pars::confidence_penalty(probs, prior);
    return py::make_tuple(o.value, o.dlogits);
  }, py::arg("batch"), py::arg("prior"));

  m.def("select", [](const std::vector<std::vector<double>>& batch, double tau) {
    const auto s = pars::select(to_probs(batch), tau);
    return py::make_tuple(s.ambiguous, s.noisy);
  }, py::arg("probs"), py::arg("tau"));

  m.def("make_pseudo", [](const std::vector<std::vector<double>>& batch, std::uint64_t seed) {
    pars::Rng rng(seed);
    const auto p = pars::make_pseudo(to_probs(batch), rng);
    return py::make_tuple(p.positive, p.complementary);
  }, py::arg("probs"), py::arg("seed"));

  m.def("cosine_lr", &pars::cosine_lr, py::arg("step"), py::arg("total"), py::arg("base_lr"));

  m.def(
      "inject_noise",
      [](const std::vector<int>& clean, std::size_t num_classes, const std::string& kind, double ratio,
         std::uint64_t seed) {
        pars::Dataset d;
        d.num_classes = num_classes;
        d.dim = 1;
        for (std::size_t i = 0; i < clean.size(); ++i)
          d.samples.push_back({.features = {0.0}, .clean_label = clean[i], .noisy_label = clean[i],
                               .id = static_cast<std::int64_t>(i)});
        const auto noisy = pars::inject_noise(d, {.kind = pars::noise_kind_from_string(kind), .ratio = ratio}, seed);
        std::vector<int> out;
        for (const auto& s : noisy.samples) out.push_back(s.noisy_label);
        return out;
      },
      py::arg("clean"), py::arg("num_classes"), py::arg("kind"), py::arg("ratio"), py::arg("seed"));

  m.def("resolve_config", [](const std::string& doc) {
    return pars::to_json(pars::parse_config(json::parse(doc))).dump();
  });

  m.def("generate", [](const std::string& doc, std::uint64_t seed) {
    auto t = pars::parse_config(json::parse(doc)).train;
    t.seed = seed;
    const auto data = pars::build_dataset(t);
    py::dict out;
    out["train"] = split_dict(data.train);
    out["test"] = split_dict(data.test);
    return out;
  });

  m.def("train", [](const std::string& doc, std::uint64_t seed) {
    const auto cfg = pars::parse_config(json::parse(doc));
    std::vector<pars::MetricsRecord> records;
    {
      py::gil_scoped_release release;
      records = pars::run_seed(cfg, seed).records;
    }
    py::list out;
    for (const auto& r : records) out.append(record_dict(r));
    return out;
  });

  m.def(
      "run",
      [](const std::string& doc, unsigned jobs) {
        const auto cfg = pars::parse_config(json::parse(doc));
        pars::RunSummary summary;
        {
          py::gil_scoped_release release;
          summary = pars::run_experiment(cfg, {.jobs = jobs}).summary;
        }
        return pars::to_json(summary).dump();
      },
      py::arg("config"), py::arg("jobs") = 0);
}
