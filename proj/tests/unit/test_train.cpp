#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "tbpr/error.hpp"
#include "tbpr/eval.hpp"
#include "tbpr/train.hpp"
#include "test_support.hpp"

using namespace tbpr;

namespace {

struct Instance {
  Dataset d;
  Split split;
  FeatureMatrix f;
  Params p;
};

Instance random_instance(ModelKind kind, Dims dims, std::uint64_t seed, double scale = 1.0) {
  Instance in;
  in.d = testing::random_dataset(8, 20, 5, 10, seed);
  in.split = split(in.d, seed);
  std::mt19937_64 rng(seed + 1);
  in.f = testing::random_features(20, dims.feature_dim, rng);
  in.p = init_params(kind, dims, in.d, in.split, in.f, seed);
  testing::randomize(in.p, rng, scale);
  return in;
}

// Preferences generated by planted two-factor vectors: each user's positives
// are the items with the largest planted scores.
Dataset planted_dataset(std::size_t users, std::size_t items, std::size_t per_user,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<std::array<double, 2>> pu(users), qi(items);
  for (auto& v : pu) v = {g(rng), g(rng)};
  for (auto& v : qi) v = {g(rng), g(rng)};
  std::vector<Interaction> recs;
  for (std::size_t u = 0; u < users; ++u) {
    std::vector<std::pair<double, std::size_t>> s;
    for (std::size_t i = 0; i < items; ++i)
      s.emplace_back(-(pu[u][0] * qi[i][0] + pu[u][1] * qi[i][1]), i);
    std::sort(s.begin(), s.end());
    for (std::size_t k = 0; k < per_user; ++k)
      recs.push_back({"u" + std::to_string(u), "i" + std::to_string(s[k].second), ""});
  }
  // Make sure every item exists even if nobody picked it.
  for (std::size_t i = 0; i < items; ++i) recs.push_back({"filler", "i" + std::to_string(i), ""});
  Dataset d = ingest(recs);
  return d;
}

}  // namespace

TEST_CASE("TrainConfig defaults and validation") {
  const auto mf = TrainConfig::defaults_for(ModelKind::kMf);
  CHECK(mf.learning_rate == 0.005);
  CHECK(mf.lambda_latent == 11.0);
  const auto tb = TrainConfig::defaults_for(ModelKind::kShared);
  CHECK(tb.learning_rate == 0.001);
  CHECK(tb.lambda_latent == 11.0);
  CHECK(tb.lambda_text == 5.0);
  TrainConfig bad;
  bad.patience = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.lambda_text = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.learning_rate = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("sampler: a single valid triple") {
  Dataset d = ingest({{"u", "i1", ""}, {"v", "i2", ""}});
  d.user_tokens.pop_back();
  d.positives.pop_back();
  d.reviews.pop_back();
  Split s;
  s.users.resize(1);
  s.users[0].train = {0};
  Rng rng(3);
  for (int t = 0; t < 100; ++t) CHECK(sample_triple(s, d, rng) == Triple{0, 0, 1});
}

TEST_CASE("sampler: positives drawn uniformly") {
  const Dataset d = testing::random_dataset(1, 30, 6, 6, 2);
  Split s;
  s.users.resize(1);
  s.users[0].train = {d.positives[0][0], d.positives[0][1]};
  const TripleSampler sampler(d, s);
  Rng rng(17);
  int first = 0;
  for (int t = 0; t < 10000; ++t) first += sampler(rng).i == s.users[0].train[0];
  CHECK(std::abs(first / 10000.0 - 0.5) <= 0.02);
}

TEST_CASE("sampler: membership scan") {
  Dataset d = testing::random_dataset(30, 25, 5, 24, 9);
  // One user owns every item and must never be drawn.
  d.positives[0].clear();
  for (ItemId i = 0; i < 25; ++i) d.positives[0].push_back(i);
  d.reviews[0].assign(25, "");
  const Split s = split(d, 1);
  const TripleSampler sampler(d, s);
  Rng rng(5);
  for (int t = 0; t < 10000; ++t) {
    const Triple tr = sampler(rng);
    CHECK(tr.u != 0);
    const auto& train = s.users[tr.u].train;
    CHECK(std::binary_search(train.begin(), train.end(), tr.i));
    CHECK_FALSE(d.is_positive(tr.u, tr.j));
  }
}

TEST_CASE("sampler: unsatisfiable") {
  const Dataset d = testing::random_dataset(3, 6, 6, 6, 1);
  const Split s = split(d, 1);
  CHECK_THROWS_AS(TripleSampler(d, s), DataError);
}

TEST_CASE("sgd_step: all-zero parameters") {
  for (auto kind : {ModelKind::kMf, ModelKind::kDiff, ModelKind::kShared}) {
    auto in = random_instance(kind, {3, 3, 4}, 4);
    for (auto* v : {&in.p.item_bias, &in.p.text_bias}) std::fill(v->begin(), v->end(), 0.0);
    for (auto* m : {&in.p.user_latent, &in.p.item_latent, &in.p.user_text, &in.p.kernel})
      std::fill(m->data.begin(), m->data.end(), 0.0);
    const Params before = in.p;
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.lambda_latent = cfg.lambda_text = 0.0;
    ItemId j = 0;
    while (in.d.is_positive(1, j)) ++j;
    const Triple t{1, in.split.users[1].train[0], j};
    CHECK(sgd_step(in.p, in.f, t, cfg) == 0.0);
    CHECK(in.p.item_bias[t.i] == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(in.p.item_bias[t.j] == doctest::Approx(-0.05).epsilon(1e-15));
    for (std::size_t k = 0; k < in.p.text_bias.size(); ++k)
      CHECK(in.p.text_bias[k] ==
            doctest::Approx(0.05 * (in.f.rows.at(t.i, k) - in.f.rows.at(t.j, k))).epsilon(1e-14));
    CHECK(in.p.user_latent == before.user_latent);
    CHECK(in.p.item_latent == before.item_latent);
    CHECK(in.p.user_text == before.user_text);
    CHECK(in.p.kernel == before.kernel);
  }
}

TEST_CASE("sgd_step: only the touched entries change") {
  for (auto kind : {ModelKind::kMf, ModelKind::kDiff, ModelKind::kShared}) {
    auto in = random_instance(kind, {3, 3, 4}, 6, 0.5);
    const Params before = in.p;
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.lambda_latent = 0.3;
    cfg.lambda_text = 0.2;
    const Triple t{2, in.split.users[2].train[0],
                   [&] {
                     for (ItemId j = 0;; ++j)
                       if (!in.d.is_positive(2, j)) return j;
                   }()};
    sgd_step(in.p, in.f, t, cfg);
    for (UserId u = 0; u < in.p.user_count; ++u) {
      for (std::size_t k = 0; k < 3; ++k) {
        if (u != t.u) {
          CHECK(in.p.user_latent.at(u, k) == before.user_latent.at(u, k));
          if (kind == ModelKind::kDiff) CHECK(in.p.user_text.at(u, k) == before.user_text.at(u, k));
        }
      }
    }
    for (ItemId i = 0; i < in.p.item_count; ++i) {
      if (i == t.i || i == t.j) {
        CHECK(in.p.item_bias[i] != before.item_bias[i]);
        continue;
      }
      CHECK(in.p.item_bias[i] == before.item_bias[i]);
      for (std::size_t k = 0; k < 3; ++k) CHECK(in.p.item_latent.at(i, k) == before.item_latent.at(i, k));
    }
    CHECK(in.p.user_prior == before.user_prior);
    CHECK(in.p.prior_count == before.prior_count);
  }
}

TEST_CASE("sgd_step: zero gradient and zero penalty leave a block alone") {
  // With theta_u = 0 the kernel gradient of the diff model vanishes.
  auto in = random_instance(ModelKind::kDiff, {3, 3, 4}, 12);
  std::fill(in.p.user_text.data.begin(), in.p.user_text.data.end(), 0.0);
  const Params before = in.p;
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.lambda_latent = cfg.lambda_text = 0.0;
  ItemId j = 0;
  while (in.d.is_positive(0, j)) ++j;
  sgd_step(in.p, in.f, {0, in.split.users[0].train[0], j}, cfg);
  CHECK(in.p.kernel == before.kernel);
}

TEST_CASE("score gradients match central finite differences") {
  const double h = 1e-5;
  for (auto kind : {ModelKind::kMf, ModelKind::kDiff, ModelKind::kShared}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      auto in = random_instance(kind, {3, 3, 4}, 50 + seed, 0.7);
      const UserId u = static_cast<UserId>(seed % in.p.user_count);
      ItemId j = 0;
      while (in.d.is_positive(u, j)) ++j;
      const Triple t{u, in.split.users[u].train.back(), j};
      const double x = pairwise_diff(in.p, in.f, u, t.i, t.j);
      const Gradient g = score_gradient(in.p, in.f, t);
      const double w = sigmoid(-x);  // d ln sigma(x) / dx

      auto check = [&](double& slot, double analytic) {
        const double keep = slot;
        slot = keep + h;
        const double up = log_sigmoid(pairwise_diff(in.p, in.f, u, t.i, t.j));
        slot = keep - h;
        const double down = log_sigmoid(pairwise_diff(in.p, in.f, u, t.i, t.j));
        slot = keep;
        const double numeric = (up - down) / (2 * h);
        const double a = w * analytic;
        const double scale = std::max({std::abs(a), std::abs(numeric), 1e-3});
        CHECK(std::abs(a - numeric) / scale <= 1e-4);
      };

      for (std::size_t k = 0; k < 3; ++k) {
        check(in.p.user_latent.at(u, k), g.user_latent[k]);
        check(in.p.item_latent.at(t.i, k), g.pos_latent[k]);
        check(in.p.item_latent.at(t.j, k), g.neg_latent[k]);
      }
      check(in.p.item_bias[t.i], g.pos_bias);
      check(in.p.item_bias[t.j], g.neg_bias);
      if (kind == ModelKind::kDiff)
        for (std::size_t k = 0; k < 3; ++k) check(in.p.user_text.at(u, k), g.user_text[k]);
      if (uses_text(kind)) {
        for (std::size_t k = 0; k < 3; ++k)
          for (std::size_t dd = 0; dd < 4; ++dd) check(in.p.kernel.at(k, dd), g.kernel.at(k, dd));
        for (std::size_t dd = 0; dd < 4; ++dd) check(in.p.text_bias[dd], g.text_bias[dd]);
      }
    }
  }
}

TEST_CASE("sgd_step: update rule applied to every block") {
  // Same triple through sgd_step and through the closed-form rule.
  for (auto kind : {ModelKind::kMf, ModelKind::kDiff, ModelKind::kShared}) {
    auto in = random_instance(kind, {3, 3, 4}, 33, 0.5);
    TrainConfig cfg;
    cfg.learning_rate = 0.07;
    cfg.lambda_latent = 0.4;
    cfg.lambda_text = 0.9;
    ItemId j = 0;
    while (in.d.is_positive(3, j)) ++j;
    const Triple t{3, in.split.users[3].train[0], j};
    const Params before = in.p;
    const double x = pairwise_diff(before, in.f, t.u, t.i, t.j);
    const Gradient g = score_gradient(before, in.f, t);
    const double w = sigmoid(-x);
    const double eta = cfg.learning_rate;
    sgd_step(in.p, in.f, t, cfg);
    auto expect = [&](double old, double grad, double lambda) {
      return old + eta * (w * grad - lambda * old);
    };
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(in.p.user_latent.at(t.u, k) ==
            doctest::Approx(expect(before.user_latent.at(t.u, k), g.user_latent[k], 0.4)).epsilon(1e-14));
      CHECK(in.p.item_latent.at(t.i, k) ==
            doctest::Approx(expect(before.item_latent.at(t.i, k), g.pos_latent[k], 0.4)).epsilon(1e-14));
      CHECK(in.p.item_latent.at(t.j, k) ==
            doctest::Approx(expect(before.item_latent.at(t.j, k), g.neg_latent[k], 0.4)).epsilon(1e-14));
      if (kind == ModelKind::kDiff)
        CHECK(in.p.user_text.at(t.u, k) ==
              doctest::Approx(expect(before.user_text.at(t.u, k), g.user_text[k], 0.9)).epsilon(1e-14));
    }
    CHECK(in.p.item_bias[t.i] ==
          doctest::Approx(expect(before.item_bias[t.i], 1.0, 0.4)).epsilon(1e-14));
    CHECK(in.p.item_bias[t.j] ==
          doctest::Approx(expect(before.item_bias[t.j], -1.0, 0.4)).epsilon(1e-14));
    if (uses_text(kind)) {
      for (std::size_t n = 0; n < in.p.kernel.data.size(); ++n)
        CHECK(in.p.kernel.data[n] ==
              doctest::Approx(expect(before.kernel.data[n], g.kernel.data[n], 0.9)).epsilon(1e-14));
      for (std::size_t dd = 0; dd < 4; ++dd)
        CHECK(in.p.text_bias[dd] ==
              doctest::Approx(expect(before.text_bias[dd], g.text_bias[dd], 0.9)).epsilon(1e-14));
    }
  }
}

TEST_CASE("sgd_step: divergence is reported with the iteration") {
  auto in = random_instance(ModelKind::kMf, {2, 2, 3}, 2);
  in.p.item_bias[in.split.users[0].train[0]] = std::numeric_limits<double>::infinity();
  ItemId j = 0;
  while (in.d.is_positive(0, j)) ++j;
  TrainConfig cfg;
  try {
    sgd_step(in.p, in.f, {0, in.split.users[0].train[0], j}, cfg, 17);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.iteration() == 17);
  }

  auto big = random_instance(ModelKind::kMf, {2, 2, 3}, 2);
  // Finite score, but the shrinkage of P_u overflows.
  for (auto& v : big.p.user_latent.row(0)) v = 1e300;
  cfg.learning_rate = 1e10;
  CHECK_THROWS_AS(sgd_step(big.p, big.f, {0, big.split.users[0].train[0], j}, cfg), DivergenceError);
}

TEST_CASE("bpr_objective") {
  auto in = random_instance(ModelKind::kDiff, {2, 2, 3}, 5);
  TrainConfig cfg;
  Params zero = in.p;
  for (auto* v : {&zero.item_bias, &zero.text_bias}) std::fill(v->begin(), v->end(), 0.0);
  for (auto* m : {&zero.user_latent, &zero.item_latent, &zero.user_text, &zero.kernel})
    std::fill(m->data.begin(), m->data.end(), 0.0);
  CHECK(bpr_objective(zero, in.f, {}, cfg) == 0.0);
  ItemId j = 0;
  while (in.d.is_positive(0, j)) ++j;
  const std::vector<Triple> one{{0, in.split.users[0].train[0], j}};
  cfg.lambda_latent = cfg.lambda_text = 0.0;
  CHECK(bpr_objective(zero, in.f, one, cfg) == doctest::Approx(std::log(0.5)).epsilon(1e-15));

  // Summation oracle.
  cfg.lambda_latent = 0.7;
  cfg.lambda_text = 0.2;
  const TripleSampler sampler(in.d, in.split);
  Rng rng(1);
  std::vector<Triple> ts;
  for (int k = 0; k < 50; ++k) ts.push_back(sampler(rng));
  double fit = 0, latent = 0, text = 0;
  for (const auto& t : ts) {
    const double x = testing::naive_score(in.p, in.f, in.split, t.u, t.i) -
                     testing::naive_score(in.p, in.f, in.split, t.u, t.j);
    fit += std::log(1.0 / (1.0 + std::exp(-x)));
  }
  for (const auto* m : {&in.p.user_latent, &in.p.item_latent})
    for (double v : m->data) latent += v * v;
  for (double v : in.p.item_bias) latent += v * v;
  for (const auto* m : {&in.p.user_text, &in.p.kernel})
    for (double v : m->data) text += v * v;
  for (double v : in.p.text_bias) text += v * v;
  CHECK(std::abs(bpr_objective(in.p, in.f, ts, cfg) - (fit - 0.7 * latent - 0.2 * text)) <= 1e-10);
}

TEST_CASE("fit: deterministic for a fixed seed") {
  const Dataset d = testing::random_dataset(30, 40, 6, 10, 1);
  const Split s = split(d, 1);
  std::mt19937_64 rng(2);
  const FeatureMatrix f = testing::random_features(40, 5, rng);
  for (auto kind : {ModelKind::kMf, ModelKind::kDiff, ModelKind::kShared}) {
    TrainConfig cfg = TrainConfig::defaults_for(kind);
    cfg.max_iterations = 6;
    cfg.valid_negatives = 10;
    const FitResult a = fit(s, d, f, kind, {4, 4, 5}, cfg);
    const FitResult b = fit(s, d, f, kind, {4, 4, 5}, cfg);
    CHECK(a.params == b.params);
    CHECK(a.history == b.history);
    CHECK(a.best_iteration == b.best_iteration);
    CHECK(a.history.size() == 6);
  }
}

TEST_CASE("fit: patience 1 with a zero learning rate stops at the second evaluation") {
  const Dataset d = testing::random_dataset(20, 30, 6, 8, 3);
  const Split s = split(d, 3);
  TrainConfig cfg = TrainConfig::defaults_for(ModelKind::kMf);
  cfg.learning_rate = 0.0;
  cfg.patience = 1;
  const FitResult r = fit(s, d, {}, ModelKind::kMf, {3, 3, 1}, cfg);
  REQUIRE(r.history.size() == 2);
  CHECK(r.history[0].validation_auc == r.history[1].validation_auc);
  CHECK(r.best_iteration == 1);
}

TEST_CASE("fit: eval_every and the final iteration") {
  const Dataset d = testing::random_dataset(20, 30, 6, 8, 3);
  const Split s = split(d, 3);
  TrainConfig cfg = TrainConfig::defaults_for(ModelKind::kMf);
  cfg.max_iterations = 7;
  cfg.eval_every = 3;
  cfg.patience = 100;
  std::vector<std::size_t> seen;
  fit(s, d, {}, ModelKind::kMf, {3, 3, 1}, cfg,
      [&](const EvalRecord& r) { seen.push_back(r.iteration); });
  CHECK(seen == std::vector<std::size_t>{3, 6, 7});
}

TEST_CASE("fit: BPR-MF recovers planted preferences") {
  const Dataset d = planted_dataset(60, 40, 8, 21);
  const Split s = split(d, 21);
  TrainConfig cfg = TrainConfig::defaults_for(ModelKind::kMf);
  cfg.learning_rate = 0.05;
  cfg.lambda_latent = 0.01;
  cfg.max_iterations = 200;
  cfg.patience = 200;
  cfg.eval_every = 20;
  cfg.seed = 4;
  const FitResult r = fit(s, d, {}, ModelKind::kMf, {5, 5, 1}, cfg);

  // AUC over training pairs (i in Train_u against unobserved j).
  std::vector<TestPair> pairs;
  for (UserId u = 0; u < d.user_count(); ++u)
    for (ItemId i : s.users[u].train) pairs.emplace_back(u, i);
  const FeatureMatrix none;
  const double train_auc = auc(model_scores(r.params, none), d, pairs).auc;
  MESSAGE("planted training AUC " << train_auc);
  CHECK(train_auc > 0.95);
}

TEST_CASE("objective rises over the first evaluations") {
  const Dataset d = planted_dataset(60, 40, 8, 5);
  const Split s = split(d, 5);
  TrainConfig cfg = TrainConfig::defaults_for(ModelKind::kMf);
  cfg.learning_rate = 0.05;
  cfg.lambda_latent = 0.01;
  Params p = init_params(ModelKind::kMf, {5, 5, 1}, d, s, {}, 3);
  const TripleSampler sampler(d, s);
  Rng held(99), rng(7);
  std::vector<Triple> fixed;
  for (int k = 0; k < 2000; ++k) fixed.push_back(sampler(held));
  double prev = bpr_objective(p, {}, fixed, cfg) / fixed.size();
  for (int it = 0; it < 10; ++it) {
    for (std::size_t k = 0; k < s.train_size(); ++k) sgd_step(p, {}, sampler(rng), cfg);
    const double now = bpr_objective(p, {}, fixed, cfg) / fixed.size();
    CHECK(now >= prev - 1e-3);
    prev = now;
  }
}
