#pragma once

// Planted-preference corpora for testing whether text features are used.

#include <cstddef>
#include <cstdint>

#include "tbpr/corpus.hpp"
#include "tbpr/matrix.hpp"
#include "tbpr/textfeat.hpp"

namespace tbpr {

struct TextSignalOptions {
  std::size_t users = 200;
  std::size_t items = 500;
  std::size_t train_per_user = 3;
  std::size_t feature_dim = 16;
  // User taste w_u = shared_weight * w_0 + personal_weight * g_u.
  double shared_weight = 1.0;
  double personal_weight = 0.5;
  // Positives are drawn without replacement with probability proportional
  // to exp(w_u . f_i / temperature).
  double temperature = 0.25;
  std::uint64_t seed = 1;
};

struct TextSignalInstance {
  Dataset dataset;
  Split split;
  FeatureMatrix features;
  Matrix user_weights;  // planted w_u, users x feature_dim
};

// Feature rows are unit-norm Gaussian directions; each user gets
// train_per_user + 4 positives so the standard split leaves exactly
// train_per_user training items. Items that end up with no feedback are
// dropped.
TextSignalInstance make_text_signal_instance(const TextSignalOptions& opts);

}  // namespace tbpr
