#include "tbpr/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "tbpr/error.hpp"
#include "tbpr/eval.hpp"

namespace tbpr {

namespace {

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// Stream seeds derived from the run seed so that initialization, triple
// sampling and the validation sample do not share a generator.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

TrainConfig TrainConfig::defaults_for(ModelKind kind) {
  TrainConfig cfg;
  if (kind == ModelKind::kMf || kind == ModelKind::kPop) {
    cfg.learning_rate = 0.005;
    cfg.lambda_latent = 11.0;
    cfg.lambda_text = 11.0;
  }
  return cfg;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning rate must be a finite non-negative number");
  if (!(lambda_latent >= 0.0) || !(lambda_text >= 0.0))
    throw ConfigError("regularization weights must be >= 0");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (valid_negatives < 1) throw ConfigError("valid_negatives must be >= 1");
}

TripleSampler::TripleSampler(const Dataset& d, const Split& split)
    : d_(d), split_(split) {
  if (split.user_count() != d.user_count())
    throw ContractError("TripleSampler: split does not match dataset");
  for (UserId u = 0; u < d.user_count(); ++u) {
    if (!split.users[u].train.empty() &&
        d.positives[u].size() < d.item_count()) {
      eligible_.push_back(u);
    }
  }
  if (eligible_.empty()) {
    throw DataError(
        "no user has both a training positive and an unobserved item; "
        "cannot sample training triples");
  }
}

Triple TripleSampler::operator()(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> pick_user(0, eligible_.size() - 1);
  const UserId u = eligible_[pick_user(rng)];
  const auto& train = split_.users[u].train;
  std::uniform_int_distribution<std::size_t> pick_pos(0, train.size() - 1);
  const ItemId i = train[pick_pos(rng)];
  std::uniform_int_distribution<ItemId> pick_item(
      0, static_cast<ItemId>(d_.item_count() - 1));
  ItemId j = pick_item(rng);
  while (d_.is_positive(u, j)) j = pick_item(rng);
  return {u, i, j};
}

Triple sample_triple(const Split& split, const Dataset& d, Rng& rng) {
  return TripleSampler(d, split)(rng);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

Gradient score_gradient(const Params& p, const FeatureMatrix& features,
                        const Triple& t) {
  if (p.kind == ModelKind::kPop)
    throw ContractError("the popularity model has no trainable parameters");
  if (t.i == t.j) throw ContractError("triple has i == j");

  Gradient g;
  const auto pu = p.user_latent.row(t.u);
  const auto qi = p.item_latent.row(t.i);
  const auto qj = p.item_latent.row(t.j);
  const std::size_t nf = p.dims.factors;

  g.user_latent.resize(nf);
  for (std::size_t k = 0; k < nf; ++k) g.user_latent[k] = qi[k] - qj[k];
  g.pos_latent.assign(pu.begin(), pu.end());

  if (p.kind == ModelKind::kMf) {
    g.neg_latent.resize(nf);
    for (std::size_t k = 0; k < nf; ++k) g.neg_latent[k] = -pu[k];
    return g;
  }

  const std::size_t nd = p.dims.feature_dim;
  const std::size_t nk = p.dims.text_factors;
  const auto fi = features.row(t.i);
  const auto fj = features.row(t.j);
  g.text_bias.resize(nd);
  for (std::size_t d = 0; d < nd; ++d) g.text_bias[d] = fi[d] - fj[d];
  g.kernel = Matrix(nk, nd);

  if (p.kind == ModelKind::kDiff) {
    g.neg_latent.resize(nf);
    for (std::size_t k = 0; k < nf; ++k) g.neg_latent[k] = -pu[k];
    const auto theta = p.user_text.row(t.u);
    g.user_text.resize(nk);
    for (std::size_t k = 0; k < nk; ++k) {
      g.user_text[k] = kTextWeight * dot(p.kernel.row(k), g.text_bias);
      const double w = kTextWeight * theta[k];
      auto hk = g.kernel.row(k);
      for (std::size_t d = 0; d < nd; ++d) hk[d] = w * g.text_bias[d];
    }
    return g;
  }

  // Shared space: the item factors see P_u plus the scaled text prior.
  const auto su = p.user_prior.row(t.u);
  const double c = kTextWeight * p.prior_scale(t.u);
  for (std::size_t k = 0; k < nk; ++k)
    g.pos_latent[k] += c * dot(p.kernel.row(k), su);
  g.neg_latent.resize(nf);
  for (std::size_t k = 0; k < nf; ++k) g.neg_latent[k] = -g.pos_latent[k];
  for (std::size_t k = 0; k < nk; ++k) {
    const double w = c * (qi[k] - qj[k]);
    auto hk = g.kernel.row(k);
    for (std::size_t d = 0; d < nd; ++d) hk[d] = w * su[d];
  }
  return g;
}

double sgd_step(Params& p, const FeatureMatrix& features, const Triple& t,
                const TrainConfig& cfg, std::size_t iteration) {
  if (p.kind == ModelKind::kPop)
    throw ContractError("sgd_step: the popularity model is not trained");
  if (t.i == t.j) throw ContractError("sgd_step: triple has i == j");

  const double x = pairwise_diff(p, features, t.u, t.i, t.j);
  if (!std::isfinite(x)) {
    throw DivergenceError(iteration, "non-finite pairwise score for user " +
                                         std::to_string(t.u));
  }
  const Gradient g = score_gradient(p, features, t);
  const double scale = sigmoid(-x);
  const double eta = cfg.learning_rate;
  bool finite = true;

  auto update = [&](std::span<double> theta, std::span<const double> grad,
                    double lambda) {
    for (std::size_t k = 0; k < theta.size(); ++k) {
      theta[k] += eta * (scale * grad[k] - lambda * theta[k]);
      finite = finite && std::isfinite(theta[k]);
    }
  };
  auto update_scalar = [&](double& theta, double grad, double lambda) {
    theta += eta * (scale * grad - lambda * theta);
    finite = finite && std::isfinite(theta);
  };

  update(p.user_latent.row(t.u), g.user_latent, cfg.lambda_latent);
  update(p.item_latent.row(t.i), g.pos_latent, cfg.lambda_latent);
  update(p.item_latent.row(t.j), g.neg_latent, cfg.lambda_latent);
  update_scalar(p.item_bias[t.i], g.pos_bias, cfg.lambda_latent);
  update_scalar(p.item_bias[t.j], g.neg_bias, cfg.lambda_latent);
  if (p.kind == ModelKind::kDiff)
    update(p.user_text.row(t.u), g.user_text, cfg.lambda_text);
  if (uses_text(p.kind)) {
    update(p.kernel.data, g.kernel.data, cfg.lambda_text);
    update(p.text_bias, g.text_bias, cfg.lambda_text);
  }
  if (!finite) {
    throw DivergenceError(iteration, "non-finite parameter after update of (" +
                                         std::to_string(t.u) + ", " +
                                         std::to_string(t.i) + ", " +
                                         std::to_string(t.j) + ")");
  }
  return x;
}

double bpr_objective(const Params& p, const FeatureMatrix& features,
                     std::span<const Triple> triples, const TrainConfig& cfg) {
  double fit_term = 0.0;
  for (const auto& t : triples)
    fit_term += log_sigmoid(pairwise_diff(p, features, t.u, t.i, t.j));
  if (p.kind == ModelKind::kPop) return fit_term;
  const double latent = squared_norm(p.user_latent.data) +
                        squared_norm(p.item_latent.data) +
                        squared_norm(p.item_bias);
  const double text = squared_norm(p.user_text.data) +
                      squared_norm(p.kernel.data) + squared_norm(p.text_bias);
  return fit_term - cfg.lambda_latent * latent - cfg.lambda_text * text;
}

FitResult fit(const Split& split, const Dataset& d,
              const FeatureMatrix& features, ModelKind kind, const Dims& dims,
              const TrainConfig& cfg, const FitObserver& observer) {
  cfg.validate();
  if (uses_text(kind) && features.dim != dims.feature_dim) {
    throw ContractError("fit: features have dimension " +
                        std::to_string(features.dim) + ", dims.D is " +
                        std::to_string(dims.feature_dim));
  }
  FitResult result;
  Params p = init_params(kind, dims, d, split, features, cfg.seed);
  if (kind == ModelKind::kPop) {
    result.params = std::move(p);
    return result;
  }

  const TripleSampler sampler(d, split);
  Rng rng(derive_seed(cfg.seed, 1));
  const ValidationSample validation = make_validation_sample(
      split, d, cfg.valid_negatives, derive_seed(cfg.seed, 2));
  const std::size_t steps_per_iteration = split.train_size();
  const auto start = std::chrono::steady_clock::now();

  double best_auc = -std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  auto evaluate = [&](std::size_t iteration) {
    EvalRecord rec;
    rec.iteration = iteration;
    rec.validation_auc = sampled_auc(p, features, validation);
    if (cfg.record_wall_time) {
      rec.wall_seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    }
    result.history.push_back(rec);
    if (observer) observer(rec);
    if (rec.validation_auc > best_auc) {
      best_auc = rec.validation_auc;
      result.params = p;
      result.best_iteration = iteration;
      stale = 0;
    } else {
      ++stale;
    }
  };

  for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
    for (std::size_t s = 0; s < steps_per_iteration; ++s)
      sgd_step(p, features, sampler(rng), cfg, it);
    if (it % cfg.eval_every == 0 || it == cfg.max_iterations) {
      evaluate(it);
      if (stale >= cfg.patience) break;
    }
  }
  if (result.history.empty()) evaluate(0);
  return result;
}

}  // namespace tbpr
