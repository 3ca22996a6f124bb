// Python bindings for the pipeline, checkpoints and scoring.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tbpr/checkpoint.hpp"
#include "tbpr/error.hpp"
#include "tbpr/eval.hpp"
#include "tbpr/experiment.hpp"
#include "tbpr/textfeat.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace tbpr;

namespace {

using Overrides = std::map<std::string, std::string>;

ExperimentConfig config_from(const fs::path& path, const Overrides& overrides) {
  std::vector<std::pair<std::string, std::string>> kv(overrides.begin(), overrides.end());
  return load_config(path, kv);
}

py::dict row_dict(const ReportRow& r) {
  py::dict d;
  d["dataset"] = r.dataset;
  d["setting"] = r.setting;
  if (r.factors) d["factors"] = *r.factors;
  for (const auto& [k, v] : r.auc) {
    if (v) d[py::str(std::string(to_string(k)))] = *v;
    else d[py::str(std::string(to_string(k)))] = py::none();
  }
  return d;
}

// A checkpoint paired with the prepared data it was trained on.
class Model {
 public:
  Model(const fs::path& checkpoint, const fs::path& workspace)
      : params_(load_model(checkpoint)), data_(load_prepared(workspace)) {
    if (params_.user_count != data_.dataset.user_count() ||
        params_.item_count != data_.dataset.item_count())
      throw DataError("checkpoint does not match the workspace");
  }

  std::string kind() const { return std::string(to_string(params_.kind)); }
  const std::vector<std::string>& users() const { return data_.dataset.user_tokens; }
  const std::vector<std::string>& items() const { return data_.dataset.item_tokens; }

  double score(const std::string& user, const std::string& item) const {
    return predict(params_, data_.features, user_id(user), item_id(item));
  }

  std::vector<std::pair<std::string, double>> top(const std::string& user,
                                                  std::size_t n) const {
    const UserId u = user_id(user);
    const UserScorer scorer(params_, data_.features, u);
    std::vector<ItemId> candidates;
    for (ItemId i = 0; i < data_.dataset.item_count(); ++i)
      if (!data_.dataset.is_positive(u, i)) candidates.push_back(i);
    std::vector<std::pair<std::string, double>> out;
    if (candidates.empty()) return out;
    auto ranked = rank_items(candidates, [&](ItemId i) { return scorer(i); });
    if (ranked.size() > n) ranked.resize(n);
    for (ItemId i : ranked) out.emplace_back(data_.dataset.item_tokens[i], scorer(i));
    return out;
  }

  double test_auc(const std::string& setting, std::size_t threshold,
                  const std::string& cold_mode) const {
    const EvalSetting s{parse_setting(setting), threshold, parse_cold_mode(cold_mode)};
    const auto pairs = select_test_pairs(data_.split, data_.dataset, s);
    return auc(params_, data_.features, data_.split, data_.dataset, pairs).auc;
  }

 private:
  UserId user_id(const std::string& token) const {
    const auto u = data_.dataset.find_user(token);
    if (u < 0) throw DataError("unknown user '" + token + "'");
    return static_cast<UserId>(u);
  }
  ItemId item_id(const std::string& token) const {
    const auto i = data_.dataset.find_item(token);
    if (i < 0) throw DataError("unknown item '" + token + "'");
    return static_cast<ItemId>(i);
  }

  Params params_;
  PreparedData data_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Review-aware Bayesian personalized ranking";

  // Later registrations are tried first, so derived types come last.
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
  py::register_exception<ChecksumError>(m, "ChecksumError", data.ptr());

  m.def("tokenize", &tokenize, py::arg("text"));

  m.def(
      "stats",
      [](const fs::path& config, const Overrides& overrides) {
        const StatsReport r = run_stats(config_from(config, overrides));
        py::dict d;
        d["users"] = r.user_count;
        d["items"] = r.item_count;
        d["feedback"] = r.feedback_count;
        d["words"] = r.word_count;
        d["cold_users"] = r.cold_user_count;
        d["cold_items"] = r.cold_item_count;
        d["density"] = r.density;
        return d;
      },
      py::arg("config"), py::arg("overrides") = Overrides{},
      "Write stats.csv and return the counts.");

  m.def(
      "prepare",
      [](const fs::path& config, const Overrides& overrides) {
        const auto cfg = config_from(config, overrides);
        auto r = prepare(cfg);
        save_prepared(cfg.output_dir, r.data);
        return py::make_tuple(r.data.dataset.user_count(), r.data.dataset.item_count(),
                              r.data.features.dim);
      },
      py::arg("config"), py::arg("overrides") = Overrides{},
      "Ingest, split and compose features into output_dir. Returns (users, items, dim).");

  m.def(
      "train",
      [](const fs::path& config, const std::string& model, const Overrides& overrides) {
        const auto cfg = config_from(config, overrides);
        FitResult r;
        {
          py::gil_scoped_release release;
          r = run_train(cfg, load_or_prepare(cfg), parse_model_kind(model));
        }
        std::vector<std::pair<std::size_t, double>> history;
        for (const auto& h : r.history) history.emplace_back(h.iteration, h.validation_auc);
        py::dict d;
        d["best_iteration"] = r.best_iteration;
        d["history"] = history;
        d["checkpoint"] = checkpoint_path(cfg, parse_model_kind(model));
        return d;
      },
      py::arg("config"), py::arg("model"), py::arg("overrides") = Overrides{},
      "Train one model and write its checkpoint and log.");

  m.def(
      "evaluate",
      [](const fs::path& config, const Overrides& overrides) {
        const auto cfg = config_from(config, overrides);
        const auto rows = run_eval(cfg, load_or_prepare(cfg), cfg.settings);
        py::list out;
        for (const auto& r : rows) out.append(row_dict(r));
        return out;
      },
      py::arg("config"), py::arg("overrides") = Overrides{},
      "Evaluate the configured checkpoints; writes report.csv and returns its rows.");

  m.def(
      "run",
      [](const fs::path& config, const Overrides& overrides) {
        const auto cfg = config_from(config, overrides);
        py::gil_scoped_release release;
        run_experiment(cfg);
        return cfg.output_dir;
      },
      py::arg("config"), py::arg("overrides") = Overrides{},
      "Full pipeline; returns the output directory.");

  m.def(
      "improvement",
      [](double pop, double mf, double tbpr) {
        const auto r = improvement_report(
            {{ModelKind::kPop, pop}, {ModelKind::kMf, mf}, {ModelKind::kShared, tbpr}});
        const auto& s = r.at(ModelKind::kShared);
        return py::make_tuple(s.improv1, s.improv2 ? py::cast(*s.improv2) : py::none());
      },
      py::arg("pop"), py::arg("mf"), py::arg("tbpr"),
      "Percent improvement over BPR-MF: (improv1, improv2).");

  m.def("recommend", &recommend, py::arg("checkpoint"), py::arg("workspace"),
        py::arg("user"), py::arg("top") = 10);

  py::class_<Model>(m, "Model")
      .def(py::init<const fs::path&, const fs::path&>(), py::arg("checkpoint"),
           py::arg("workspace"))
      .def_property_readonly("kind", &Model::kind)
      .def_property_readonly("users", &Model::users)
      .def_property_readonly("items", &Model::items)
      .def("score", &Model::score, py::arg("user"), py::arg("item"))
      .def("top", &Model::top, py::arg("user"), py::arg("n") = 10)
      .def("auc", &Model::test_auc, py::arg("setting") = "all", py::arg("threshold") = 3,
           py::arg("cold_mode") = "by_item");

#ifdef VERSION_INFO
#define TBPR_STR(x) #x
#define TBPR_XSTR(x) TBPR_STR(x)
  m.attr("__version__") = TBPR_XSTR(VERSION_INFO);
#else
  m.attr("__version__") = "dev";
#endif
}
