#pragma once

// Experiment configuration and the ingest -> features -> train -> eval
// pipeline, including the factor-count sweep.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tbpr/corpus.hpp"
#include "tbpr/eval.hpp"
#include "tbpr/model.hpp"
#include "tbpr/textfeat.hpp"
#include "tbpr/train.hpp"

namespace tbpr {

struct ExperimentConfig {
  std::filesystem::path interactions;
  std::string input_format = "auto";  // auto | json | tsv
  std::string dataset_name;

  // Embedding file, or empty for hash-derived synthetic vectors.
  std::filesystem::path embeddings;
  std::size_t synthetic_embedding_dim = 200;
  std::uint64_t embedding_seed = 7;
  // Empty means the built-in English list.
  std::filesystem::path stopwords;
  bool use_stopwords = true;
  DocScope doc_scope = DocScope::kAllInteractions;
  PriorScope prior_scope = PriorScope::kTraining;

  std::filesystem::path output_dir = "out";

  std::size_t min_activity = 5;
  std::size_t stats_cold_threshold = kDefaultColdThreshold;
  std::uint64_t split_seed = 1;

  std::size_t factors = 15;
  std::size_t text_factors = 15;
  bool allow_unequal_factors = false;

  std::vector<ModelKind> models = {ModelKind::kPop, ModelKind::kMf,
                                   ModelKind::kDiff, ModelKind::kShared};
  std::map<ModelKind, TrainConfig> train = {
      {ModelKind::kPop, TrainConfig::defaults_for(ModelKind::kPop)},
      {ModelKind::kMf, TrainConfig::defaults_for(ModelKind::kMf)},
      {ModelKind::kDiff, TrainConfig::defaults_for(ModelKind::kDiff)},
      {ModelKind::kShared, TrainConfig::defaults_for(ModelKind::kShared)},
  };

  std::vector<SettingName> settings = {SettingName::kAll};
  std::size_t cold_train_threshold = 3;
  ColdMode cold_mode = ColdMode::kByItem;

  std::vector<std::size_t> sweep_factors;

  // Applies one "key = value" assignment; throws ConfigError on unknown
  // keys or bad values. Relative paths are resolved against base_dir.
  void set(const std::string& key, const std::string& value,
           const std::filesystem::path& base_dir = {});
  // Checks invariants and that every input path exists.
  void validate() const;

  Dims dims_for(std::size_t feature_dim) const;
  EvalSetting eval_setting(SettingName name) const;
};

// Plain "key = value" lines; '#' starts a comment.
ExperimentConfig parse_config(std::istream& in,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Everything training and evaluation need.
struct PreparedData {
  Dataset dataset;
  Split split;
  FeatureMatrix features;
};

struct PrepareResult {
  PreparedData data;
  StatsReport stats;
  std::size_t skipped_records = 0;
};

Dataset read_dataset(const ExperimentConfig& cfg);
PrepareResult prepare(const ExperimentConfig& cfg);

// Intermediates under output_dir: users.txt, items.txt, split.tsv,
// features.txt.
void save_prepared(const std::filesystem::path& dir, const PreparedData& data);
PreparedData load_prepared(const std::filesystem::path& dir);
bool has_prepared(const std::filesystem::path& dir);
// Loads the intermediates if present, otherwise prepares and saves them.
PreparedData load_or_prepare(const ExperimentConfig& cfg);

std::filesystem::path checkpoint_path(const ExperimentConfig& cfg, ModelKind kind);
std::filesystem::path train_log_path(const ExperimentConfig& cfg, ModelKind kind);

// Writes the stats CSV; returns the report.
StatsReport run_stats(const ExperimentConfig& cfg);

// Trains one model and writes its checkpoint (and log, for trained kinds).
FitResult run_train(const ExperimentConfig& cfg, const PreparedData& data,
                    ModelKind kind);

// Evaluates the configured models' checkpoints and writes report.csv.
std::vector<ReportRow> run_eval(const ExperimentConfig& cfg,
                                const PreparedData& data,
                                const std::vector<SettingName>& settings);

// Factor sweep: sweep_report.csv (one row per factor count and setting) and
// sweep_curves.csv (validation AUC per iteration).
std::vector<ReportRow> run_sweep(const ExperimentConfig& cfg,
                                 const PreparedData& data);

// Full pipeline: stats, intermediates, every model, report, optional sweep.
void run_experiment(const ExperimentConfig& cfg);

// Top-n unobserved items for a user, ranked by a stored model.
std::vector<std::string> recommend(const std::filesystem::path& checkpoint,
                                   const std::filesystem::path& workspace,
                                   const std::string& user_token,
                                   std::size_t top_n);

}  // namespace tbpr
