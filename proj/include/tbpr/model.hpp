#pragma once

// Ranking models: popularity, BPR-MF and the two review-aware factor models.
//
// Scores leave out the global offset and per-user bias of the usual biased
// MF predictor. Both terms are constant across the items of one user, so
// they cancel in every pairwise difference and in every per-user ranking;
// they are never stored or trained.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "tbpr/corpus.hpp"
#include "tbpr/matrix.hpp"
#include "tbpr/textfeat.hpp"

namespace tbpr {

enum class ModelKind : std::uint8_t {
  kPop = 0,
  kMf = 1,
  kDiff = 2,    // separate text factor space: theta_u . (H f_i)
  kShared = 3,  // text prior folded into the item latent space
};

std::string_view to_string(ModelKind kind);
// Accepts "pop", "mf", "diff", "shared".
ModelKind parse_model_kind(std::string_view name);

bool uses_text(ModelKind kind);

struct Dims {
  std::size_t factors = 15;       // F
  std::size_t text_factors = 15;  // K
  std::size_t feature_dim = 200;  // D

  friend bool operator==(const Dims&, const Dims&) = default;
};

// Weight of the text interaction term relative to the feedback term.
inline constexpr double kTextWeight = 1.0;

// Which positives feed the user text prior of the shared-space model.
enum class PriorScope {
  kTraining,      // Train_u only
  kAllPositives,  // all of N_u
};

struct Params {
  ModelKind kind = ModelKind::kMf;
  Dims dims;
  std::size_t user_count = 0;
  std::size_t item_count = 0;

  std::vector<double> item_bias;  // N
  Matrix user_latent;             // M x F
  Matrix item_latent;             // N x F
  Matrix user_text;               // M x K, kDiff only
  Matrix kernel;                  // K x D, kDiff and kShared
  std::vector<double> text_bias;  // D, kDiff and kShared
  std::vector<double> popularity; // N, kPop only

  // kShared only: s_u = sum of f_k over the prior set, and its size.
  Matrix user_prior;               // M x D
  std::vector<double> prior_count; // M

  double prior_scale(UserId u) const;

  friend bool operator==(const Params&, const Params&) = default;
};

inline constexpr double kInitRange = 0.01;

// Zero biases, factor entries uniform in [-0.01, 0.01]. kPop gets training
// occurrence counts; kShared gets its user prior cache.
Params init_params(ModelKind kind, const Dims& dims, const Dataset& d,
                   const Split& split, const FeatureMatrix& features,
                   std::uint64_t seed,
                   PriorScope scope = PriorScope::kTraining);

// Sum of feature rows over each user's prior set; used to fill and to audit
// the kShared cache.
Matrix user_prior_sums(const Split& split, const FeatureMatrix& features,
                       std::vector<double>& counts,
                       PriorScope scope = PriorScope::kTraining);

double predict_pop(const Params& p, ItemId i);
double predict_mf(const Params& p, UserId u, ItemId i);
double predict_diff(const Params& p, const FeatureMatrix& features, UserId u,
                    ItemId i);
double predict_shared(const Params& p, const FeatureMatrix& features, UserId u,
                      ItemId i);

// Dispatches on p.kind.
double predict(const Params& p, const FeatureMatrix& features, UserId u,
               ItemId i);

// x_ui - x_uj. Throws ContractError when i == j.
double pairwise_diff(const Params& p, const FeatureMatrix& features, UserId u,
                     ItemId i, ItemId j);

// Scores every item for one user after precomputing the user-side vectors,
// so each item costs O(F + D) instead of O(K * D).
class UserScorer {
 public:
  UserScorer(const Params& p, const FeatureMatrix& features, UserId u);

  double operator()(ItemId i) const;
  void score_all(std::span<double> out) const;

 private:
  const Params& p_;
  const FeatureMatrix& features_;
  UserId user_;
  std::vector<double> latent_;  // effective user vector in item-latent space
  std::vector<double> text_;    // H^T theta_u + beta', kDiff / kShared
};

// Descending score, ties by ascending item id.
std::vector<ItemId> rank_items(std::span<const ItemId> candidates,
                               const std::function<double(ItemId)>& score);

std::vector<ItemId> rank(const Params& p, const FeatureMatrix& features,
                         UserId u, std::span<const ItemId> candidates);

}  // namespace tbpr
