#include "tbpr/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "tbpr/error.hpp"

namespace tbpr {

namespace {

void check_kind(const Params& p, ModelKind expected, const char* fn) {
  if (p.kind != expected) {
    throw ContractError(std::string(fn) + ": parameters are for model '" +
                        std::string(to_string(p.kind)) + "'");
  }
}

void check_user(const Params& p, UserId u) {
  if (u >= p.user_count) {
    throw ContractError("user index " + std::to_string(u) + " out of range [0, " +
                        std::to_string(p.user_count) + ")");
  }
}

void check_item(const Params& p, ItemId i) {
  if (i >= p.item_count) {
    throw ContractError("item index " + std::to_string(i) + " out of range [0, " +
                        std::to_string(p.item_count) + ")");
  }
}

void check_features(const Params& p, const FeatureMatrix& f) {
  if (f.dim != p.dims.feature_dim || f.item_count() != p.item_count) {
    throw ContractError("feature matrix is " + std::to_string(f.item_count()) +
                        "x" + std::to_string(f.dim) + ", model expects " +
                        std::to_string(p.item_count) + "x" +
                        std::to_string(p.dims.feature_dim));
  }
}

// H x for H of shape K x D.
std::vector<double> kernel_apply(const Matrix& h, std::span<const double> x) {
  std::vector<double> out(h.rows, 0.0);
  for (std::size_t k = 0; k < h.rows; ++k) out[k] = dot(h.row(k), x);
  return out;
}

void fill_uniform(Matrix& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-kInitRange, kInitRange);
  for (auto& v : m.data) v = dist(rng);
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kPop: return "pop";
    case ModelKind::kMf: return "mf";
    case ModelKind::kDiff: return "diff";
    case ModelKind::kShared: return "shared";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "pop") return ModelKind::kPop;
  if (name == "mf") return ModelKind::kMf;
  if (name == "diff") return ModelKind::kDiff;
  if (name == "shared") return ModelKind::kShared;
  throw ContractError("unknown model kind '" + std::string(name) +
                      "' (expected pop, mf, diff or shared)");
}

bool uses_text(ModelKind kind) {
  return kind == ModelKind::kDiff || kind == ModelKind::kShared;
}

double Params::prior_scale(UserId u) const {
  const double n = prior_count[u];
  return n > 0.0 ? 1.0 / std::sqrt(n) : 0.0;
}

Matrix user_prior_sums(const Split& split, const FeatureMatrix& features,
                       std::vector<double>& counts, PriorScope scope) {
  Matrix sums(split.user_count(), features.dim);
  counts.assign(split.user_count(), 0.0);
  auto add = [&](std::size_t u, const std::vector<ItemId>& items) {
    auto s = sums.row(u);
    for (ItemId k : items) {
      auto f = features.row(k);
      for (std::size_t d = 0; d < s.size(); ++d) s[d] += f[d];
    }
    counts[u] += static_cast<double>(items.size());
  };
  for (std::size_t u = 0; u < split.user_count(); ++u) {
    const auto& us = split.users[u];
    add(u, us.train);
    if (scope == PriorScope::kAllPositives) {
      add(u, us.valid);
      add(u, us.test);
    }
  }
  return sums;
}

Params init_params(ModelKind kind, const Dims& dims, const Dataset& d,
                   const Split& split, const FeatureMatrix& features,
                   std::uint64_t seed, PriorScope scope) {
  if (dims.factors < 1 || dims.text_factors < 1 || dims.feature_dim < 1) {
    throw ContractError("init_params: F, K and D must all be >= 1");
  }
  if (split.user_count() != d.user_count()) {
    throw ContractError("init_params: split has " +
                        std::to_string(split.user_count()) +
                        " users, dataset has " + std::to_string(d.user_count()));
  }
  Params p;
  p.kind = kind;
  p.dims = dims;
  p.user_count = d.user_count();
  p.item_count = d.item_count();
  if (uses_text(kind)) check_features(p, features);
  if (kind == ModelKind::kShared && dims.text_factors != dims.factors) {
    throw ContractError(
        "init_params: the shared-space model needs K == F (the kernel maps "
        "features into the item latent space)");
  }

  const std::size_t m = p.user_count;
  const std::size_t n = p.item_count;
  std::mt19937_64 rng(seed);

  if (kind == ModelKind::kPop) {
    p.popularity.assign(n, 0.0);
    for (const auto& us : split.users)
      for (ItemId i : us.train) p.popularity[i] += 1.0;
    return p;
  }

  p.item_bias.assign(n, 0.0);
  p.user_latent = Matrix(m, dims.factors);
  p.item_latent = Matrix(n, dims.factors);
  fill_uniform(p.user_latent, rng);
  fill_uniform(p.item_latent, rng);
  if (kind == ModelKind::kDiff) {
    p.user_text = Matrix(m, dims.text_factors);
    fill_uniform(p.user_text, rng);
  }
  if (uses_text(kind)) {
    p.kernel = Matrix(dims.text_factors, dims.feature_dim);
    fill_uniform(p.kernel, rng);
    p.text_bias.assign(dims.feature_dim, 0.0);
  }
  if (kind == ModelKind::kShared) {
    p.user_prior = user_prior_sums(split, features, p.prior_count, scope);
  }
  return p;
}

double predict_pop(const Params& p, ItemId i) {
  check_kind(p, ModelKind::kPop, "predict_pop");
  check_item(p, i);
  return p.popularity[i];
}

double predict_mf(const Params& p, UserId u, ItemId i) {
  check_kind(p, ModelKind::kMf, "predict_mf");
  check_user(p, u);
  check_item(p, i);
  return p.item_bias[i] + dot(p.user_latent.row(u), p.item_latent.row(i));
}

double predict_diff(const Params& p, const FeatureMatrix& features, UserId u,
                    ItemId i) {
  check_kind(p, ModelKind::kDiff, "predict_diff");
  check_user(p, u);
  check_item(p, i);
  check_features(p, features);
  const auto f = features.row(i);
  const auto hf = kernel_apply(p.kernel, f);
  return p.item_bias[i] + dot(p.user_latent.row(u), p.item_latent.row(i)) +
         kTextWeight * dot(p.user_text.row(u), hf) + dot(p.text_bias, f);
}

double predict_shared(const Params& p, const FeatureMatrix& features, UserId u,
                      ItemId i) {
  check_kind(p, ModelKind::kShared, "predict_shared");
  check_user(p, u);
  check_item(p, i);
  check_features(p, features);
  const auto hs = kernel_apply(p.kernel, p.user_prior.row(u));
  const double c = kTextWeight * p.prior_scale(u);
  const auto pu = p.user_latent.row(u);
  std::vector<double> user_vec(pu.size());
  for (std::size_t k = 0; k < pu.size(); ++k) user_vec[k] = pu[k] + c * hs[k];
  return dot(p.item_latent.row(i), user_vec) + p.item_bias[i] +
         dot(p.text_bias, features.row(i));
}

double predict(const Params& p, const FeatureMatrix& features, UserId u,
               ItemId i) {
  switch (p.kind) {
    case ModelKind::kPop: return predict_pop(p, i);
    case ModelKind::kMf: return predict_mf(p, u, i);
    case ModelKind::kDiff: return predict_diff(p, features, u, i);
    case ModelKind::kShared: return predict_shared(p, features, u, i);
  }
  throw ContractError("predict: invalid model kind");
}

double pairwise_diff(const Params& p, const FeatureMatrix& features, UserId u,
                     ItemId i, ItemId j) {
  if (i == j) {
    throw ContractError("pairwise_diff: positive and negative item are both " +
                        std::to_string(i));
  }
  return predict(p, features, u, i) - predict(p, features, u, j);
}

UserScorer::UserScorer(const Params& p, const FeatureMatrix& features, UserId u)
    : p_(p), features_(features), user_(u) {
  if (p.kind == ModelKind::kPop) return;
  check_user(p, u);
  const auto pu = p.user_latent.row(u);
  latent_.assign(pu.begin(), pu.end());
  if (!uses_text(p.kind)) return;
  check_features(p, features);
  text_ = p.text_bias;
  if (p.kind == ModelKind::kDiff) {
    // theta_u . (H f) == (H^T theta_u) . f
    const auto theta = p.user_text.row(u);
    for (std::size_t k = 0; k < p.kernel.rows; ++k) {
      const auto hk = p.kernel.row(k);
      const double w = kTextWeight * theta[k];
      for (std::size_t d = 0; d < text_.size(); ++d) text_[d] += w * hk[d];
    }
  } else {
    const auto hs = kernel_apply(p.kernel, p.user_prior.row(u));
    const double c = kTextWeight * p.prior_scale(u);
    for (std::size_t k = 0; k < latent_.size(); ++k) latent_[k] += c * hs[k];
  }
}

double UserScorer::operator()(ItemId i) const {
  if (p_.kind == ModelKind::kPop) return p_.popularity[i];
  double s = p_.item_bias[i] + dot(p_.item_latent.row(i), latent_);
  if (!text_.empty()) s += dot(features_.row(i), text_);
  return s;
}

void UserScorer::score_all(std::span<double> out) const {
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (*this)(static_cast<ItemId>(i));
}

std::vector<ItemId> rank_items(std::span<const ItemId> candidates,
                               const std::function<double(ItemId)>& score) {
  if (candidates.empty()) throw ContractError("rank: candidate set is empty");
  std::vector<std::pair<double, ItemId>> scored;
  scored.reserve(candidates.size());
  for (ItemId i : candidates) scored.emplace_back(score(i), i);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<ItemId> out;
  out.reserve(scored.size());
  for (const auto& [s, i] : scored) out.push_back(i);
  return out;
}

std::vector<ItemId> rank(const Params& p, const FeatureMatrix& features,
                         UserId u, std::span<const ItemId> candidates) {
  for (ItemId i : candidates) check_item(p, i);
  UserScorer scorer(p, features, u);
  return rank_items(candidates, [&](ItemId i) { return scorer(i); });
}

}  // namespace tbpr
