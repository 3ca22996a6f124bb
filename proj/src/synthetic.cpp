#include "tbpr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "tbpr/error.hpp"

namespace tbpr {

TextSignalInstance make_text_signal_instance(const TextSignalOptions& opts) {
  const std::size_t per_user = opts.train_per_user + kTestPerUser + kValidPerUser;
  if (opts.train_per_user < 1 || opts.items < per_user || opts.feature_dim < 1) {
    throw ContractError("make_text_signal_instance: invalid options");
  }
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t dim = opts.feature_dim;

  Matrix raw(opts.items, dim);
  for (std::size_t i = 0; i < opts.items; ++i) {
    auto r = raw.row(i);
    double n2 = 0.0;
    for (auto& v : r) {
      v = normal(rng);
      n2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& v : r) v *= inv;
  }

  std::vector<double> common(dim);
  for (auto& v : common) v = normal(rng);
  const double cn = 1.0 / std::sqrt(dot(common, common));
  for (auto& v : common) v *= cn;

  TextSignalInstance out;
  out.user_weights = Matrix(opts.users, dim);
  std::vector<Interaction> records;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<double, std::size_t>> keys(opts.items);
  for (std::size_t u = 0; u < opts.users; ++u) {
    auto w = out.user_weights.row(u);
    std::vector<double> personal(dim);
    for (auto& v : personal) v = normal(rng);
    const double pn = 1.0 / std::sqrt(dot(personal, personal));
    for (std::size_t k = 0; k < dim; ++k)
      w[k] = opts.shared_weight * common[k] + opts.personal_weight * personal[k] * pn;
    // Gumbel top-k: sampling without replacement from the softmax.
    for (std::size_t i = 0; i < opts.items; ++i) {
      const double g = -std::log(-std::log(unit(rng) + 1e-300) + 1e-300);
      keys[i] = {dot(w, raw.row(i)) / opts.temperature + g, i};
    }
    std::partial_sort(keys.begin(), keys.begin() + per_user, keys.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; k < per_user; ++k) {
      records.push_back({"u" + std::to_string(u),
                         "i" + std::to_string(keys[k].second), ""});
    }
  }

  out.dataset = ingest(records);
  out.split = split(out.dataset, opts.seed ^ 0x5deece66dULL);
  out.features.dim = dim;
  out.features.rows = Matrix(out.dataset.item_count(), dim);
  out.features.coverage.assign(out.dataset.item_count(), 1);
  out.features.oov.assign(out.dataset.item_count(), 0);
  for (ItemId i = 0; i < out.dataset.item_count(); ++i) {
    const std::size_t original = std::stoul(out.dataset.item_tokens[i].substr(1));
    std::copy_n(raw.row(original).begin(), dim, out.features.rows.row(i).begin());
  }
  return out;
}

}  // namespace tbpr
