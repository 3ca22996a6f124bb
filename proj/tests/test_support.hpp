#pragma once

// Random instance generators and brute-force oracles shared by the unit and
// acceptance suites. Nothing here calls into the scoring or AUC code paths
// it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tbpr/corpus.hpp"
#include "tbpr/model.hpp"
#include "tbpr/textfeat.hpp"
#include "tbpr/train.hpp"

namespace tbpr::testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::path(TBPR_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Dataset with the given number of users, each holding between min_pos and
// max_pos distinct positives over n_items items. Items without feedback are
// possible; callers that care use ingest() instead.
inline Dataset random_dataset(std::size_t users, std::size_t n_items,
                              std::size_t min_pos, std::size_t max_pos,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d;
  for (std::size_t i = 0; i < n_items; ++i) d.item_tokens.push_back("i" + std::to_string(i));
  std::uniform_int_distribution<std::size_t> count(min_pos, max_pos);
  std::vector<ItemId> all(n_items);
  for (std::size_t i = 0; i < n_items; ++i) all[i] = static_cast<ItemId>(i);
  for (std::size_t u = 0; u < users; ++u) {
    d.user_tokens.push_back("u" + std::to_string(u));
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<ItemId> pos(all.begin(), all.begin() + count(rng));
    std::sort(pos.begin(), pos.end());
    d.reviews.emplace_back(pos.size(), std::string{});
    d.positives.push_back(std::move(pos));
  }
  return d;
}

inline FeatureMatrix random_features(std::size_t items, std::size_t dim,
                                     std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FeatureMatrix f;
  f.dim = dim;
  f.rows = Matrix(items, dim);
  for (auto& v : f.rows.data) v = u(rng);
  f.coverage.assign(items, 1);
  f.oov.assign(items, 0);
  return f;
}

// Overwrites every trainable entry with U(-scale, scale).
inline void randomize(Params& p, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto* v : {&p.item_bias, &p.text_bias})
    for (auto& x : *v) x = u(rng);
  for (auto* m : {&p.user_latent, &p.item_latent, &p.user_text, &p.kernel})
    for (auto& x : m->data) x = u(rng);
}

// Straight from the model definitions, with the user prior rebuilt from the
// split on every call.
inline double naive_score(const Params& p, const FeatureMatrix& f,
                          const Split& split, UserId u, ItemId i) {
  const std::size_t nf = p.dims.factors, nk = p.dims.text_factors,
                    nd = p.dims.feature_dim;
  if (p.kind == ModelKind::kPop) {
    double c = 0;
    for (const auto& us : split.users)
      for (ItemId k : us.train) c += (k == i);
    return c;
  }
  double s = p.item_bias[i];
  if (p.kind != ModelKind::kShared)
    for (std::size_t k = 0; k < nf; ++k) s += p.user_latent.at(u, k) * p.item_latent.at(i, k);
  if (p.kind == ModelKind::kDiff) {
    for (std::size_t k = 0; k < nk; ++k) {
      double hf = 0;
      for (std::size_t d = 0; d < nd; ++d) hf += p.kernel.at(k, d) * f.rows.at(i, d);
      s += p.user_text.at(u, k) * hf;
    }
  }
  if (p.kind == ModelKind::kShared) {
    const auto& train = split.users[u].train;
    const double scale = train.empty() ? 0.0 : std::pow(double(train.size()), -0.5);
    for (std::size_t k = 0; k < nf; ++k) {
      double prior = 0;
      for (ItemId t : train)
        for (std::size_t d = 0; d < nd; ++d) prior += p.kernel.at(k, d) * f.rows.at(t, d);
      s += p.item_latent.at(i, k) * (p.user_latent.at(u, k) + scale * prior);
    }
  }
  if (uses_text(p.kind))
    for (std::size_t d = 0; d < nd; ++d) s += p.text_bias[d] * f.rows.at(i, d);
  return s;
}

// AUC by enumerating every (test item, unobserved item) pair.
template <typename ScoreOf>
double brute_force_auc(const Dataset& d,
                       const std::vector<std::pair<UserId, ItemId>>& pairs,
                       ScoreOf score) {
  std::set<UserId> users;
  for (const auto& pr : pairs) users.insert(pr.first);
  double total = 0.0;
  std::size_t counted = 0;
  for (UserId u : users) {
    std::uint64_t hits = 0, compared = 0;
    for (const auto& [pu, i] : pairs) {
      if (pu != u) continue;
      for (ItemId j = 0; j < d.item_count(); ++j) {
        if (std::find(d.positives[u].begin(), d.positives[u].end(), j) !=
            d.positives[u].end())
          continue;
        ++compared;
        if (score(u, i) > score(u, j)) ++hits;
      }
    }
    if (compared == 0) continue;
    total += static_cast<double>(hits) / static_cast<double>(compared);
    ++counted;
  }
  return counted ? total / static_cast<double>(counted) : 0.0;
}

}  // namespace tbpr::testing
