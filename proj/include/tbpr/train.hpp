#pragma once

// Stochastic gradient ascent on the BPR pairwise objective.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "tbpr/corpus.hpp"
#include "tbpr/model.hpp"
#include "tbpr/textfeat.hpp"

namespace tbpr {

using Rng = std::mt19937_64;

struct Triple {
  UserId u = 0;
  ItemId i = 0;  // observed, from Train_u
  ItemId j = 0;  // unobserved, outside N_u

  friend bool operator==(const Triple&, const Triple&) = default;
};

struct TrainConfig {
  double learning_rate = 0.001;
  double lambda_latent = 11.0;  // P, Q, item bias
  double lambda_text = 5.0;     // theta, H, text bias
  std::size_t max_iterations = 200;
  std::size_t patience = 5;
  std::size_t eval_every = 1;
  std::uint64_t seed = 1;
  std::size_t valid_negatives = 100;
  // Off by default so that training logs are reproducible byte for byte.
  bool record_wall_time = false;

  // Reference settings: eta 0.005 / lambda 11 for BPR-MF, eta 0.001 /
  // lambda_latent 11 / lambda_text 5 for the review-aware models.
  static TrainConfig defaults_for(ModelKind kind);
  void validate() const;
};

// Draws u uniformly among users that have a training positive and at least
// one unobserved item, i uniformly from Train_u and j uniformly from I \ N_u
// by rejection.
class TripleSampler {
 public:
  TripleSampler(const Dataset& d, const Split& split);

  Triple operator()(Rng& rng) const;

 private:
  const Dataset& d_;
  const Split& split_;
  std::vector<UserId> eligible_;
};

Triple sample_triple(const Split& split, const Dataset& d, Rng& rng);

// Partial derivatives of x_uij over the parameter blocks one triple touches.
// Blocks that the model kind lacks are left empty.
struct Gradient {
  std::vector<double> user_latent;  // dP_u
  std::vector<double> pos_latent;   // dQ_i
  std::vector<double> neg_latent;   // dQ_j
  double pos_bias = 1.0;
  double neg_bias = -1.0;
  std::vector<double> user_text;  // dtheta_u
  Matrix kernel;                  // dH
  std::vector<double> text_bias;  // dbeta'
};

Gradient score_gradient(const Params& p, const FeatureMatrix& features,
                        const Triple& t);

double log_sigmoid(double x);
double sigmoid(double x);

// One update  theta += eta * (sigmoid(-x_uij) * dx_uij/dtheta - lambda *
// theta)  on every block the triple touches, all gradients taken at the
// pre-update values. Returns x_uij before the update. Throws DivergenceError
// if any value becomes non-finite.
double sgd_step(Params& p, const FeatureMatrix& features, const Triple& t,
                const TrainConfig& cfg, std::size_t iteration = 0);

// sum ln sigmoid(x_uij) - lambda_latent |latent|^2 - lambda_text |text|^2.
double bpr_objective(const Params& p, const FeatureMatrix& features,
                     std::span<const Triple> triples, const TrainConfig& cfg);

struct EvalRecord {
  std::size_t iteration = 0;
  double validation_auc = 0.0;
  double wall_seconds = 0.0;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

struct FitResult {
  Params params;  // snapshot at best_iteration
  std::vector<EvalRecord> history;
  std::size_t best_iteration = 0;
};

using FitObserver = std::function<void(const EvalRecord&)>;

// One iteration is sum_u |Train_u| sampled updates. Validation AUC is
// evaluated every eval_every iterations against a fixed sample of
// valid_negatives unobserved items per validation positive; training stops
// after `patience` evaluations without improvement.
FitResult fit(const Split& split, const Dataset& d,
              const FeatureMatrix& features, ModelKind kind, const Dims& dims,
              const TrainConfig& cfg, const FitObserver& observer = {});

}  // namespace tbpr
