#include "tbpr/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <random>
#include <set>

#include "tbpr/error.hpp"

namespace tbpr {

std::string_view to_string(SettingName s) {
  switch (s) {
    case SettingName::kAll: return "All";
    case SettingName::kCold: return "Cold";
    case SettingName::kWarm: return "Warm";
  }
  return "unknown";
}

SettingName parse_setting(std::string_view name) {
  if (name == "all" || name == "All") return SettingName::kAll;
  if (name == "cold" || name == "Cold") return SettingName::kCold;
  if (name == "warm" || name == "Warm") return SettingName::kWarm;
  throw ConfigError("unknown evaluation setting '" + std::string(name) +
                    "' (expected all, cold or warm)");
}

std::string_view to_string(ColdMode m) {
  return m == ColdMode::kByItem ? "by_item" : "by_user";
}

ColdMode parse_cold_mode(std::string_view name) {
  if (name == "by_item") return ColdMode::kByItem;
  if (name == "by_user") return ColdMode::kByUser;
  throw ConfigError("unknown cold mode '" + std::string(name) +
                    "' (expected by_item or by_user)");
}

std::vector<TestPair> select_test_pairs(const Split& split, const Dataset& d,
                                        const EvalSetting& setting) {
  std::vector<std::size_t> train_counts(d.item_count(), 0);
  for (const auto& us : split.users)
    for (ItemId i : us.train) ++train_counts[i];

  const std::size_t limit = setting.cold_train_threshold;
  std::vector<TestPair> out;
  for (UserId u = 0; u < split.user_count(); ++u) {
    const auto& us = split.users[u];
    for (ItemId i : us.test) {
      bool cold = setting.cold_mode == ColdMode::kByItem
                      ? train_counts[i] <= limit
                      : us.train.size() <= limit;
      bool keep = setting.name == SettingName::kAll ||
                  (setting.name == SettingName::kCold && cold) ||
                  (setting.name == SettingName::kWarm && !cold);
      if (keep) out.emplace_back(u, i);
    }
  }
  return out;
}

ScoreFn model_scores(const Params& p, const FeatureMatrix& features) {
  return [&p, &features](UserId u, std::span<double> out) {
    UserScorer(p, features, u).score_all(out);
  };
}

AucResult auc(const ScoreFn& scores, const Dataset& d,
              std::span<const TestPair> pairs) {
  if (pairs.empty()) throw ContractError("auc: no test pairs selected");
  AucResult result;
  std::vector<double> all(d.item_count());
  std::vector<double> negatives;
  double total = 0.0;

  std::size_t k = 0;
  while (k < pairs.size()) {
    const UserId u = pairs[k].first;
    std::size_t end = k;
    while (end < pairs.size() && pairs[end].first == u) ++end;

    scores(u, all);
    negatives.clear();
    for (ItemId j = 0; j < d.item_count(); ++j)
      if (!d.is_positive(u, j)) negatives.push_back(all[j]);
    if (negatives.empty()) {
      ++result.skipped_users;
      k = end;
      continue;
    }
    std::sort(negatives.begin(), negatives.end());
    std::uint64_t hits = 0;
    for (std::size_t t = k; t < end; ++t) {
      const double s = all[pairs[t].second];
      hits += static_cast<std::uint64_t>(
          std::lower_bound(negatives.begin(), negatives.end(), s) -
          negatives.begin());
    }
    const std::uint64_t compared =
        static_cast<std::uint64_t>(end - k) * negatives.size();
    total += static_cast<double>(hits) / static_cast<double>(compared);
    ++result.users;
    k = end;
  }
  if (result.users > 0) result.auc = total / static_cast<double>(result.users);
  return result;
}

AucResult auc(const Params& p, const FeatureMatrix& features, const Split& split,
              const Dataset& d, std::span<const TestPair> pairs) {
  if (split.user_count() != d.user_count())
    throw ContractError("auc: split does not match dataset");
  return auc(model_scores(p, features), d, pairs);
}

ValidationSample make_validation_sample(const Split& split, const Dataset& d,
                                        std::size_t negatives_per_positive,
                                        std::uint64_t seed) {
  ValidationSample sample;
  std::mt19937_64 rng(seed);
  if (d.item_count() == 0) return sample;
  std::uniform_int_distribution<ItemId> pick(
      0, static_cast<ItemId>(d.item_count() - 1));
  for (UserId u = 0; u < split.user_count(); ++u) {
    const auto& valid = split.users[u].valid;
    if (valid.empty() || d.positives[u].size() >= d.item_count()) continue;
    ValidationSample::Entry e{u, valid, {}};
    e.negatives.reserve(valid.size() * negatives_per_positive);
    for (std::size_t n = 0; n < valid.size() * negatives_per_positive; ++n) {
      ItemId j = pick(rng);
      while (d.is_positive(u, j)) j = pick(rng);
      e.negatives.push_back(j);
    }
    sample.users.push_back(std::move(e));
  }
  return sample;
}

double sampled_auc(const Params& p, const FeatureMatrix& features,
                   const ValidationSample& sample) {
  if (sample.users.empty()) return 0.0;
  double total = 0.0;
  for (const auto& e : sample.users) {
    UserScorer scorer(p, features, e.user);
    const std::size_t per = e.negatives.size() / e.positives.size();
    std::size_t hits = 0;
    for (std::size_t a = 0; a < e.positives.size(); ++a) {
      const double s = scorer(e.positives[a]);
      for (std::size_t b = 0; b < per; ++b)
        if (s > scorer(e.negatives[a * per + b])) ++hits;
    }
    total += static_cast<double>(hits) / static_cast<double>(e.negatives.size());
  }
  return total / static_cast<double>(sample.users.size());
}

std::map<ModelKind, Improvement> improvement_report(
    const std::map<ModelKind, double>& aucs) {
  auto require = [&](ModelKind k, const char* name) {
    auto it = aucs.find(k);
    if (it == aucs.end())
      throw ContractError(std::string("improvement_report: missing ") + name +
                          " AUC");
    return it->second;
  };
  const double pop = require(ModelKind::kPop, "POP");
  const double base = require(ModelKind::kMf, "BPR-MF");
  if (!aucs.contains(ModelKind::kDiff) && !aucs.contains(ModelKind::kShared)) {
    throw ContractError(
        "improvement_report: missing TBPR-Diff or TBPR-Shared AUC");
  }
  std::map<ModelKind, Improvement> out;
  for (ModelKind k : {ModelKind::kDiff, ModelKind::kShared}) {
    auto it = aucs.find(k);
    if (it == aucs.end()) continue;
    Improvement imp;
    imp.improv1 = (it->second - base) / base * 100.0;
    if (base != pop) imp.improv2 = (it->second - base) / (base - pop) * 100.0;
    out.emplace(k, imp);
  }
  return out;
}

namespace {

std::string_view auc_column(ModelKind k) {
  switch (k) {
    case ModelKind::kPop: return "pop_auc";
    case ModelKind::kMf: return "bprmf_auc";
    case ModelKind::kDiff: return "tbpr_diff_auc";
    case ModelKind::kShared: return "tbpr_shared_auc";
  }
  return "auc";
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void write_report_csv(std::ostream& out, std::span<const ReportRow> rows) {
  std::set<ModelKind> kinds;
  bool with_factors = false;
  for (const auto& r : rows) {
    for (const auto& [k, v] : r.auc) kinds.insert(k);
    with_factors = with_factors || r.factors.has_value();
  }
  const bool with_improv =
      kinds.contains(ModelKind::kPop) && kinds.contains(ModelKind::kMf) &&
      (kinds.contains(ModelKind::kShared) || kinds.contains(ModelKind::kDiff));
  const ModelKind headline =
      kinds.contains(ModelKind::kShared) ? ModelKind::kShared : ModelKind::kDiff;

  out << "dataset,setting";
  if (with_factors) out << ",factors";
  for (ModelKind k : kinds) out << ',' << auc_column(k);
  if (with_improv) out << ",improv1_pct,improv2_pct";
  out << '\n';

  for (const auto& r : rows) {
    out << r.dataset << ',' << r.setting;
    if (with_factors)
      out << ',' << (r.factors ? std::to_string(*r.factors) : "");
    std::map<ModelKind, double> present;
    for (ModelKind k : kinds) {
      auto it = r.auc.find(k);
      if (it != r.auc.end() && it->second) {
        out << ',' << fixed(*it->second, 6);
        present.emplace(k, *it->second);
      } else {
        out << ",n/a";
      }
    }
    if (with_improv) {
      std::string i1 = "n/a", i2 = "n/a";
      if (present.contains(ModelKind::kPop) && present.contains(ModelKind::kMf) &&
          present.contains(headline)) {
        const auto imp = improvement_report(present).at(headline);
        i1 = fixed(imp.improv1, 3);
        if (imp.improv2) i2 = fixed(*imp.improv2, 2);
      }
      out << ',' << i1 << ',' << i2;
    }
    out << '\n';
  }
}

}  // namespace tbpr
