#include "tbpr/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "tbpr/checkpoint.hpp"
#include "tbpr/error.hpp"
#include "tbpr/io.hpp"

namespace tbpr {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "': expected true or false");
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

std::string format_double(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_atomic(path, text);
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream ss;
  write_report_csv(ss, rows);
  return ss.str();
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value,
                           const fs::path& base_dir) {
  auto train_all = [&](auto&& fn) {
    for (auto& [kind, tc] : train) fn(tc);
  };
  auto train_text = [&](auto&& fn) {
    fn(train[ModelKind::kDiff]);
    fn(train[ModelKind::kShared]);
  };

  if (key == "interactions") {
    interactions = resolve(base_dir, value);
  } else if (key == "format") {
    if (value != "auto" && value != "json" && value != "tsv")
      throw ConfigError("format must be auto, json or tsv");
    input_format = value;
  } else if (key == "dataset_name") {
    dataset_name = value;
  } else if (key == "embeddings") {
    embeddings = value == "synthetic" ? fs::path{} : resolve(base_dir, value);
  } else if (key == "embedding_dim") {
    synthetic_embedding_dim = parse_number<std::size_t>(key, value);
  } else if (key == "embedding_seed") {
    embedding_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "stopwords") {
    use_stopwords = value != "none";
    stopwords = (value == "default" || value == "none") ? fs::path{}
                                                        : resolve(base_dir, value);
  } else if (key == "doc_scope") {
    if (value == "all") doc_scope = DocScope::kAllInteractions;
    else if (value == "train") doc_scope = DocScope::kTrainingOnly;
    else throw ConfigError("doc_scope must be all or train");
  } else if (key == "prior_scope") {
    if (value == "train") prior_scope = PriorScope::kTraining;
    else if (value == "all") prior_scope = PriorScope::kAllPositives;
    else throw ConfigError("prior_scope must be train or all");
  } else if (key == "output_dir") {
    output_dir = resolve(base_dir, value);
  } else if (key == "min_activity") {
    min_activity = parse_number<std::size_t>(key, value);
  } else if (key == "stats_cold_threshold") {
    stats_cold_threshold = parse_number<std::size_t>(key, value);
  } else if (key == "split_seed") {
    split_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "factors") {
    factors = parse_number<std::size_t>(key, value);
  } else if (key == "text_factors") {
    text_factors = parse_number<std::size_t>(key, value);
  } else if (key == "allow_unequal_factors") {
    allow_unequal_factors = parse_bool(key, value);
  } else if (key == "models") {
    models.clear();
    try {
      for (const auto& m : split_list(value)) {
        const ModelKind k = parse_model_kind(m);
        if (std::find(models.begin(), models.end(), k) == models.end())
          models.push_back(k);
      }
    } catch (const ContractError& e) {
      throw ConfigError(e.what());
    }
    std::sort(models.begin(), models.end());
  } else if (key == "train_seed") {
    const auto s = parse_number<std::uint64_t>(key, value);
    train_all([&](TrainConfig& tc) { tc.seed = s; });
  } else if (key == "max_iterations") {
    const auto n = parse_number<std::size_t>(key, value);
    train_all([&](TrainConfig& tc) { tc.max_iterations = n; });
  } else if (key == "patience") {
    const auto n = parse_number<std::size_t>(key, value);
    train_all([&](TrainConfig& tc) { tc.patience = n; });
  } else if (key == "eval_every") {
    const auto n = parse_number<std::size_t>(key, value);
    train_all([&](TrainConfig& tc) { tc.eval_every = n; });
  } else if (key == "valid_negatives") {
    const auto n = parse_number<std::size_t>(key, value);
    train_all([&](TrainConfig& tc) { tc.valid_negatives = n; });
  } else if (key == "log_wall_time") {
    const bool b = parse_bool(key, value);
    train_all([&](TrainConfig& tc) { tc.record_wall_time = b; });
  } else if (key == "mf.learning_rate") {
    train[ModelKind::kMf].learning_rate = parse_number<double>(key, value);
  } else if (key == "mf.lambda") {
    const auto l = parse_number<double>(key, value);
    train[ModelKind::kMf].lambda_latent = l;
    train[ModelKind::kMf].lambda_text = l;
  } else if (key == "tbpr.learning_rate") {
    const auto v = parse_number<double>(key, value);
    train_text([&](TrainConfig& tc) { tc.learning_rate = v; });
  } else if (key == "tbpr.lambda_latent") {
    const auto v = parse_number<double>(key, value);
    train_text([&](TrainConfig& tc) { tc.lambda_latent = v; });
  } else if (key == "tbpr.lambda_text") {
    const auto v = parse_number<double>(key, value);
    train_text([&](TrainConfig& tc) { tc.lambda_text = v; });
  } else if (key == "eval.settings") {
    settings.clear();
    for (const auto& s : split_list(value)) settings.push_back(parse_setting(s));
    if (settings.empty()) throw ConfigError("eval.settings is empty");
  } else if (key == "eval.cold_threshold") {
    cold_train_threshold = parse_number<std::size_t>(key, value);
  } else if (key == "eval.cold_mode") {
    cold_mode = parse_cold_mode(value);
  } else if (key == "sweep.factors") {
    sweep_factors.clear();
    for (const auto& s : split_list(value))
      sweep_factors.push_back(parse_number<std::size_t>(key, s));
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void ExperimentConfig::validate() const {
  if (interactions.empty()) throw ConfigError("config: 'interactions' is required");
  if (!fs::is_regular_file(interactions))
    throw ConfigError("interactions file '" + interactions.string() + "' not found");
  if (!embeddings.empty() && !fs::is_regular_file(embeddings))
    throw ConfigError("embeddings file '" + embeddings.string() + "' not found");
  if (!stopwords.empty() && !fs::is_regular_file(stopwords))
    throw ConfigError("stopwords file '" + stopwords.string() + "' not found");
  if (min_activity < kMinPositivesForSplit) {
    throw ConfigError("min_activity must be >= " +
                      std::to_string(kMinPositivesForSplit) +
                      " so every user keeps a training item");
  }
  if (stats_cold_threshold < 1) throw ConfigError("stats_cold_threshold must be >= 1");
  if (factors < 1 || text_factors < 1) throw ConfigError("factors must be >= 1");
  if (!allow_unequal_factors && factors != text_factors) {
    throw ConfigError(
        "factors and text_factors differ; set allow_unequal_factors = true to "
        "permit it");
  }
  if (embeddings.empty() && synthetic_embedding_dim < 1)
    throw ConfigError("embedding_dim must be >= 1");
  if (models.empty()) throw ConfigError("no models configured");
  for (const auto& s : sweep_factors)
    if (s < 1) throw ConfigError("sweep factor counts must be >= 1");
  for (const auto& [kind, tc] : train) tc.validate();
}

Dims ExperimentConfig::dims_for(std::size_t feature_dim) const {
  return Dims{factors, text_factors, feature_dim};
}

EvalSetting ExperimentConfig::eval_setting(SettingName name) const {
  return EvalSetting{name, cold_train_threshold, cold_mode};
}

ExperimentConfig parse_config(std::istream& in, const fs::path& base_dir) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), base_dir);
  }
  return cfg;
}

ExperimentConfig load_config(
    const fs::path& path,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  const fs::path base = path.parent_path();
  ExperimentConfig cfg = parse_config(in, base);
  for (const auto& [k, v] : overrides) cfg.set(k, v, fs::current_path());
  if (cfg.dataset_name.empty()) cfg.dataset_name = cfg.interactions.stem().string();
  cfg.validate();
  return cfg;
}

Dataset read_dataset(const ExperimentConfig& cfg) {
  std::ifstream in(cfg.interactions);
  if (!in) throw ConfigError("cannot open '" + cfg.interactions.string() + "'");
  std::string format = cfg.input_format;
  if (format == "auto") {
    const auto ext = cfg.interactions.extension().string();
    format = (ext == ".tsv" || ext == ".txt") ? "tsv" : "json";
  }
  ReadResult rr = format == "tsv" ? read_tsv(in) : read_json_lines(in);
  Dataset d = ingest(rr.records);
  d.skipped_records += rr.skipped;
  return d;
}

PrepareResult prepare(const ExperimentConfig& cfg) {
  PrepareResult out;
  Dataset raw = read_dataset(cfg);
  out.skipped_records = raw.skipped_records;
  out.data.dataset = filter_min_activity(raw, cfg.min_activity);
  if (out.data.dataset.user_count() == 0)
    throw DataError("no user has at least " + std::to_string(cfg.min_activity) +
                    " positives after filtering");
  out.stats = stats(out.data.dataset, cfg.stats_cold_threshold);
  out.data.split = split(out.data.dataset, cfg.split_seed);

  EmbeddingTable table;
  if (cfg.embeddings.empty()) {
    std::set<std::string> vocab;
    for (const auto& texts : out.data.dataset.reviews)
      for (const auto& t : texts)
        for (auto& w : tokenize(t)) vocab.insert(std::move(w));
    table = synth_embeddings({vocab.begin(), vocab.end()},
                             cfg.synthetic_embedding_dim, cfg.embedding_seed);
  } else {
    std::ifstream in(cfg.embeddings);
    if (!in) throw ConfigError("cannot open '" + cfg.embeddings.string() + "'");
    table = load_embeddings(in);
    if (table.dim() == 0)
      throw DataError("embedding file '" + cfg.embeddings.string() + "' is empty");
  }

  StopWords stop;
  if (cfg.use_stopwords) {
    if (cfg.stopwords.empty()) {
      stop = default_stopwords();
    } else {
      std::ifstream in(cfg.stopwords);
      if (!in) throw ConfigError("cannot open '" + cfg.stopwords.string() + "'");
      stop = load_stopwords(in);
    }
  }
  out.data.features = compose_item_features(out.data.dataset, out.data.split,
                                            table, stop, cfg.doc_scope);
  return out;
}

void save_prepared(const fs::path& dir, const PreparedData& data) {
  fs::create_directories(dir);
  std::string users, items, parts;
  for (const auto& t : data.dataset.user_tokens) users += t + '\n';
  for (const auto& t : data.dataset.item_tokens) items += t + '\n';
  for (std::size_t u = 0; u < data.split.user_count(); ++u) {
    const auto& us = data.split.users[u];
    auto emit = [&](const std::vector<ItemId>& v, const char* name) {
      for (ItemId i : v)
        parts += std::to_string(u) + '\t' + std::to_string(i) + '\t' + name + '\n';
    };
    emit(us.train, "train");
    emit(us.valid, "valid");
    emit(us.test, "test");
  }
  std::ostringstream features;
  write_features(features, data.features);
  write_text(dir / "users.txt", users);
  write_text(dir / "items.txt", items);
  write_text(dir / "split.tsv", parts);
  write_text(dir / "features.txt", features.str());
}

bool has_prepared(const fs::path& dir) {
  for (const char* f : {"users.txt", "items.txt", "split.tsv", "features.txt"})
    if (!fs::is_regular_file(dir / f)) return false;
  return true;
}

PreparedData load_prepared(const fs::path& dir) {
  PreparedData data;
  data.dataset.user_tokens = read_lines(dir / "users.txt");
  data.dataset.item_tokens = read_lines(dir / "items.txt");
  const std::size_t m = data.dataset.user_tokens.size();
  const std::size_t n = data.dataset.item_tokens.size();
  data.split.users.resize(m);
  std::size_t line_no = 0;
  for (const auto& line : read_lines(dir / "split.tsv")) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::size_t u = 0, i = 0;
    std::string part;
    if (!(ss >> u >> i >> part) || u >= m || i >= n)
      throw ParseError(line_no, "malformed split row '" + line + "'");
    auto& us = data.split.users[u];
    if (part == "train") us.train.push_back(static_cast<ItemId>(i));
    else if (part == "valid") us.valid.push_back(static_cast<ItemId>(i));
    else if (part == "test") us.test.push_back(static_cast<ItemId>(i));
    else throw ParseError(line_no, "unknown split part '" + part + "'");
  }
  data.dataset.positives.resize(m);
  data.dataset.reviews.resize(m);
  for (std::size_t u = 0; u < m; ++u) {
    auto& us = data.split.users[u];
    std::sort(us.train.begin(), us.train.end());
    std::sort(us.valid.begin(), us.valid.end());
    std::sort(us.test.begin(), us.test.end());
    auto& pos = data.dataset.positives[u];
    pos = us.train;
    pos.insert(pos.end(), us.valid.begin(), us.valid.end());
    pos.insert(pos.end(), us.test.begin(), us.test.end());
    std::sort(pos.begin(), pos.end());
    data.dataset.reviews[u].assign(pos.size(), std::string{});
  }
  std::ifstream fin(dir / "features.txt");
  if (!fin) throw DataError("cannot open '" + (dir / "features.txt").string() + "'");
  data.features = read_features(fin);
  if (data.features.item_count() != n)
    throw DataError("features.txt does not match items.txt");
  return data;
}

PreparedData load_or_prepare(const ExperimentConfig& cfg) {
  if (has_prepared(cfg.output_dir)) return load_prepared(cfg.output_dir);
  PrepareResult r = prepare(cfg);
  save_prepared(cfg.output_dir, r.data);
  return std::move(r.data);
}

fs::path checkpoint_path(const ExperimentConfig& cfg, ModelKind kind) {
  return cfg.output_dir / ("model_" + std::string(to_string(kind)) + ".tbpr");
}

fs::path train_log_path(const ExperimentConfig& cfg, ModelKind kind) {
  return cfg.output_dir / ("train_" + std::string(to_string(kind)) + ".csv");
}

StatsReport run_stats(const ExperimentConfig& cfg) {
  Dataset d = filter_min_activity(read_dataset(cfg), cfg.min_activity);
  StatsReport r = stats(d, cfg.stats_cold_threshold);
  fs::create_directories(cfg.output_dir);
  std::ostringstream ss;
  write_stats_csv(ss, cfg.dataset_name, r);
  write_text(cfg.output_dir / "stats.csv", ss.str());
  return r;
}

FitResult run_train(const ExperimentConfig& cfg, const PreparedData& data,
                    ModelKind kind) {
  fs::create_directories(cfg.output_dir);
  const Dims dims = cfg.dims_for(data.features.dim);
  const TrainConfig& tc = cfg.train.at(kind);

  if (kind == ModelKind::kPop) {
    FitResult r = fit(data.split, data.dataset, data.features, kind, dims, tc);
    save_model(r.params, checkpoint_path(cfg, kind));
    return r;
  }

  // The log is flushed per evaluation into a side file and renamed into
  // place only once training succeeds.
  const fs::path log_path = train_log_path(cfg, kind);
  fs::path partial = log_path;
  partial += ".partial";
  std::ofstream log(partial, std::ios::trunc);
  if (!log) throw DataError("cannot write '" + partial.string() + "'");
  log << "iteration,sampled_validation_auc,wall_seconds\n" << std::flush;
  auto observer = [&](const EvalRecord& r) {
    log << r.iteration << ',' << format_double(r.validation_auc, 6) << ','
        << format_double(r.wall_seconds, 3) << '\n'
        << std::flush;
  };
  FitResult result =
      fit(data.split, data.dataset, data.features, kind, dims, tc, observer);
  log.close();
  fs::rename(partial, log_path);
  save_model(result.params, checkpoint_path(cfg, kind));
  return result;
}

std::vector<ReportRow> run_eval(const ExperimentConfig& cfg,
                                const PreparedData& data,
                                const std::vector<SettingName>& settings) {
  std::map<ModelKind, Params> models;
  for (ModelKind k : cfg.models) models.emplace(k, load_model(checkpoint_path(cfg, k)));
  for (const auto& [k, p] : models) {
    if (p.user_count != data.dataset.user_count() ||
        p.item_count != data.dataset.item_count()) {
      throw DataError("checkpoint for '" + std::string(to_string(k)) +
                      "' does not match the prepared dataset");
    }
  }

  std::vector<ReportRow> rows;
  for (SettingName s : settings) {
    const auto pairs = select_test_pairs(data.split, data.dataset, cfg.eval_setting(s));
    ReportRow row{cfg.dataset_name, std::string(to_string(s)), std::nullopt, {}};
    for (const auto& [k, p] : models) {
      if (pairs.empty()) {
        row.auc[k] = std::nullopt;
      } else {
        row.auc[k] = auc(p, data.features, data.split, data.dataset, pairs).auc;
      }
    }
    rows.push_back(std::move(row));
  }
  write_text(cfg.output_dir / "report.csv", report_csv(rows));
  return rows;
}

std::vector<ReportRow> run_sweep(const ExperimentConfig& cfg,
                                 const PreparedData& data) {
  fs::create_directories(cfg.output_dir);
  std::vector<ReportRow> rows;
  std::string curves = "factors,model,iteration,sampled_validation_auc\n";

  std::optional<Params> pop;
  for (std::size_t f : cfg.sweep_factors) {
    ExperimentConfig c = cfg;
    c.factors = f;
    c.text_factors = f;
    const Dims dims = c.dims_for(data.features.dim);
    std::map<ModelKind, Params> models;
    for (ModelKind k : cfg.models) {
      if (k == ModelKind::kPop) {
        if (!pop) {
          pop = fit(data.split, data.dataset, data.features, k, dims,
                    cfg.train.at(k)).params;
        }
        models.emplace(k, *pop);
        continue;
      }
      FitResult r =
          fit(data.split, data.dataset, data.features, k, dims, cfg.train.at(k));
      for (const auto& rec : r.history) {
        curves += std::to_string(f) + ',' + std::string(to_string(k)) + ',' +
                  std::to_string(rec.iteration) + ',' +
                  format_double(rec.validation_auc, 6) + '\n';
      }
      models.emplace(k, std::move(r.params));
    }
    for (SettingName s : cfg.settings) {
      const auto pairs =
          select_test_pairs(data.split, data.dataset, cfg.eval_setting(s));
      ReportRow row{cfg.dataset_name, std::string(to_string(s)), f, {}};
      for (const auto& [k, p] : models) {
        if (pairs.empty()) row.auc[k] = std::nullopt;
        else row.auc[k] = auc(p, data.features, data.split, data.dataset, pairs).auc;
      }
      rows.push_back(std::move(row));
    }
  }
  write_text(cfg.output_dir / "sweep_report.csv", report_csv(rows));
  write_text(cfg.output_dir / "sweep_curves.csv", curves);
  return rows;
}

void run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  PrepareResult prepared = prepare(cfg);
  fs::create_directories(cfg.output_dir);
  std::ostringstream ss;
  write_stats_csv(ss, cfg.dataset_name, prepared.stats);
  write_text(cfg.output_dir / "stats.csv", ss.str());
  save_prepared(cfg.output_dir, prepared.data);

  for (ModelKind k : cfg.models) run_train(cfg, prepared.data, k);
  run_eval(cfg, prepared.data, cfg.settings);
  if (!cfg.sweep_factors.empty()) run_sweep(cfg, prepared.data);
}

std::vector<std::string> recommend(const fs::path& checkpoint,
                                   const fs::path& workspace,
                                   const std::string& user_token,
                                   std::size_t top_n) {
  const Params p = load_model(checkpoint);
  const PreparedData data = load_prepared(workspace);
  if (p.user_count != data.dataset.user_count() ||
      p.item_count != data.dataset.item_count()) {
    throw DataError("checkpoint does not match the workspace in '" +
                    workspace.string() + "'");
  }
  const auto u = data.dataset.find_user(user_token);
  if (u < 0) throw DataError("unknown user '" + user_token + "'");
  const auto user = static_cast<UserId>(u);

  std::vector<ItemId> candidates;
  for (ItemId i = 0; i < data.dataset.item_count(); ++i)
    if (!data.dataset.is_positive(user, i)) candidates.push_back(i);
  if (candidates.empty()) return {};
  auto ranked = rank(p, data.features, user, candidates);
  if (ranked.size() > top_n) ranked.resize(top_n);
  std::vector<std::string> out;
  out.reserve(ranked.size());
  for (ItemId i : ranked) out.push_back(data.dataset.item_tokens[i]);
  return out;
}

}  // namespace tbpr
