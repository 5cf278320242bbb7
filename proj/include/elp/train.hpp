#pragma once

#include <cstdint>
#include <vector>

#include "elp/model.hpp"
#include "elp/vocabulary.hpp"

namespace elp::nn {

struct TrainConfig {
  std::size_t max_epochs = 25;
  std::size_t batch_size = 64;
  double lr = 0.001;  // Adam
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double l2_coeff = 1e-5;     // applied to weights, not biases
  double dropout_keep = 0.8;  // probability of keeping a unit
  std::uint64_t seed = 1;
  std::size_t patience = 0;  // epochs without val improvement; 0 disables
  double clip_norm = 5.0;    // global gradient norm; <= 0 disables
  double val_fraction = 0.1;

  void validate() const;
};

struct EpochStats {
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  bool clipped = false;  // clipping fired in some batch
};

struct TrainResult {
  Model model;  // parameters of the best validation epoch
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;  // 0-based index into history
  double best_val_acc = 0.0;
};

using Dataset = std::vector<vocab::TokenSequence>;

// Mean loss (cross-entropy plus the L2 term) and accuracy, dropout off.
std::pair<double, double> evaluate_model(const Model& model,
                                         const Dataset& data,
                                         double l2_coeff);

// Adam training with a seeded stratified validation holdout (val_fraction of
// each class), per-epoch shuffling, inverted dropout, L2 on weights, global
// norm clipping, and a best-validation-accuracy snapshot. Aborts with a
// diagnostic when the loss turns non-finite. Deterministic for a fixed seed.
TrainResult train_model(const ModelSpec& spec, const TrainConfig& cfg,
                        const Dataset& examples,
                        const Matrix* embedding_init = nullptr);

}  // namespace elp::nn
