#pragma once

// AUC evaluation under the All / Cold / Warm settings and improvement
// summaries over the popularity and BPR-MF baselines.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tbpr/corpus.hpp"
#include "tbpr/model.hpp"
#include "tbpr/textfeat.hpp"

namespace tbpr {

enum class SettingName { kAll, kCold, kWarm };
enum class ColdMode {
  kByItem,  // item has <= threshold occurrences across all Train_u
  kByUser,  // user has |Train_u| <= threshold
};

std::string_view to_string(SettingName s);
SettingName parse_setting(std::string_view name);
std::string_view to_string(ColdMode m);
ColdMode parse_cold_mode(std::string_view name);

struct EvalSetting {
  SettingName name = SettingName::kAll;
  std::size_t cold_train_threshold = 3;
  ColdMode cold_mode = ColdMode::kByItem;
};

using TestPair = std::pair<UserId, ItemId>;

// Sorted (user, item) pairs with item in Test_u, filtered by the setting.
std::vector<TestPair> select_test_pairs(const Split& split, const Dataset& d,
                                        const EvalSetting& setting);

// Fills out[i] with the score of every item for user u.
using ScoreFn = std::function<void(UserId u, std::span<double> out)>;

ScoreFn model_scores(const Params& p, const FeatureMatrix& features);

struct AucResult {
  double auc = 0.0;
  std::size_t users = 0;          // users in the outer average
  std::size_t skipped_users = 0;  // selected users with no unobserved item
};

// Exact AUC: per user, the fraction of (selected test item, unobserved item)
// pairs with a strictly higher test score, then the plain mean over users.
// Throws ContractError on an empty selection.
AucResult auc(const ScoreFn& scores, const Dataset& d,
              std::span<const TestPair> pairs);

AucResult auc(const Params& p, const FeatureMatrix& features, const Split& split,
              const Dataset& d, std::span<const TestPair> pairs);

// Fixed negative sample for cheap validation AUC during training.
struct ValidationSample {
  struct Entry {
    UserId user;
    std::vector<ItemId> positives;  // Valid_u
    std::vector<ItemId> negatives;  // drawn uniformly from I \ N_u
  };
  std::vector<Entry> users;
};

ValidationSample make_validation_sample(const Split& split, const Dataset& d,
                                        std::size_t negatives_per_positive,
                                        std::uint64_t seed);

double sampled_auc(const Params& p, const FeatureMatrix& features,
                   const ValidationSample& sample);

struct Improvement {
  double improv1 = 0.0;                // percent of the BPR-MF AUC
  std::optional<double> improv2;       // percent of BPR-MF's margin over POP
};

// Needs POP, MF and at least one review-aware model. improv2 is empty when
// the MF and POP AUCs coincide.
std::map<ModelKind, Improvement> improvement_report(
    const std::map<ModelKind, double>& aucs);

struct ReportRow {
  std::string dataset;
  std::string setting;
  std::optional<std::size_t> factors;   // set for sweep rows
  std::map<ModelKind, std::optional<double>> auc;  // nullopt: empty selection
};

// Table-style CSV: AUC columns for the kinds present, plus improvement
// columns (shared-space model, else the diff model) when computable.
void write_report_csv(std::ostream& out, std::span<const ReportRow> rows);

}  // namespace tbpr
