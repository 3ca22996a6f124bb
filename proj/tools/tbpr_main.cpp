// Command-line driver for the review-aware ranking experiments.
//
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric
// divergence.

#include <cstdlib>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "tbpr/error.hpp"
#include "tbpr/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitDiverged = 3;

std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& sets) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw tbpr::ConfigError("--set expects key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Review-aware Bayesian personalized ranking"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "Experiment config file")->required();
    sub->add_option("--set", sets, "Override a config value (key=value)");
  };

  auto* stats_cmd = app.add_subcommand("stats", "Write dataset statistics CSV");
  add_config(stats_cmd);

  auto* features_cmd =
      app.add_subcommand("features", "Ingest, split and compose item features");
  add_config(features_cmd);

  std::vector<std::string> train_models;
  auto* train_cmd = app.add_subcommand("train", "Train models and write checkpoints");
  add_config(train_cmd);
  train_cmd->add_option("--model", train_models, "pop, mf, diff or shared")
      ->check(CLI::IsMember({"pop", "mf", "diff", "shared"}));

  std::vector<std::string> eval_settings;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate checkpoints, write report.csv");
  add_config(eval_cmd);
  eval_cmd->add_option("--setting", eval_settings, "all, cold or warm")
      ->check(CLI::IsMember({"all", "cold", "warm"}));

  auto* sweep_cmd = app.add_subcommand("sweep", "Factor-count sweep");
  add_config(sweep_cmd);

  auto* run_cmd = app.add_subcommand("run", "Full pipeline");
  add_config(run_cmd);

  std::string checkpoint, user_token, workspace;
  std::size_t top_n = 10;
  auto* rec_cmd = app.add_subcommand("recommend", "Top-N items for a user");
  rec_cmd->add_option("checkpoint", checkpoint, "Model checkpoint")->required();
  rec_cmd->add_option("user", user_token, "User token")->required();
  rec_cmd->add_option("--top", top_n, "Number of items")->check(CLI::PositiveNumber);
  rec_cmd->add_option("--workspace", workspace,
                      "Directory with users.txt, items.txt, split.tsv and "
                      "features.txt (default: the checkpoint's directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (rec_cmd->parsed()) {
      std::filesystem::path ws = workspace.empty()
                                     ? std::filesystem::path(checkpoint).parent_path()
                                     : std::filesystem::path(workspace);
      if (ws.empty()) ws = ".";
      for (const auto& item : tbpr::recommend(checkpoint, ws, user_token, top_n))
        std::cout << item << '\n';
      return kExitOk;
    }

    const auto cfg = tbpr::load_config(config_path, parse_overrides(sets));

    if (stats_cmd->parsed()) {
      tbpr::run_stats(cfg);
      std::cout << (cfg.output_dir / "stats.csv").string() << '\n';
    } else if (features_cmd->parsed()) {
      auto r = tbpr::prepare(cfg);
      tbpr::save_prepared(cfg.output_dir, r.data);
      std::cerr << r.data.dataset.user_count() << " users, "
                << r.data.dataset.item_count() << " items, "
                << r.skipped_records << " skipped records\n";
    } else if (train_cmd->parsed()) {
      const auto data = tbpr::load_or_prepare(cfg);
      std::vector<tbpr::ModelKind> kinds;
      for (const auto& m : train_models) kinds.push_back(tbpr::parse_model_kind(m));
      if (kinds.empty()) kinds = cfg.models;
      for (auto k : kinds) {
        auto r = tbpr::run_train(cfg, data, k);
        std::cerr << tbpr::to_string(k) << ": best iteration " << r.best_iteration
                  << '\n';
      }
    } else if (eval_cmd->parsed()) {
      const auto data = tbpr::load_or_prepare(cfg);
      std::vector<tbpr::SettingName> settings;
      for (const auto& s : eval_settings) settings.push_back(tbpr::parse_setting(s));
      if (settings.empty()) settings = cfg.settings;
      tbpr::run_eval(cfg, data, settings);
      std::cout << (cfg.output_dir / "report.csv").string() << '\n';
    } else if (sweep_cmd->parsed()) {
      if (cfg.sweep_factors.empty())
        throw tbpr::ConfigError("sweep: 'sweep.factors' is not set");
      tbpr::run_sweep(cfg, tbpr::load_or_prepare(cfg));
    } else if (run_cmd->parsed()) {
      tbpr::run_experiment(cfg);
    }
    return kExitOk;
  } catch (const tbpr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case tbpr::ErrorKind::kConfig: return kExitConfig;
      case tbpr::ErrorKind::kDivergence: return kExitDiverged;
      default: return kExitData;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
