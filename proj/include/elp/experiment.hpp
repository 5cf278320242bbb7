#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "elp/embedding.hpp"
#include "elp/kmeans.hpp"
#include "elp/metrics.hpp"
#include "elp/model.hpp"
#include "elp/train.hpp"
#include "elp/wave_segment.hpp"

namespace elp::eval {

// One labeled example: its extracted waves in temporal order.
struct WaveExample {
  std::string id;
  std::vector<wave::WaveSegment> waves;
  int label = 0;
};

struct ExperimentConfig {
  std::size_t n_classes = 2;
  std::vector<std::string> class_names;  // empty -> class0, class1, ...
  std::size_t folds = 10;
  bool stratified = true;
  std::uint64_t seed = 1;
  cluster::KMeansConfig kmeans;  // k and restarts; seed derived per fold
  std::size_t canonical_len = 64;
  bool per_kind_vocab = false;
  bool beat_tokens = false;  // one token per beat (QRS only)
  std::size_t max_len = 45;
  embed::SkipgramConfig skipgram;  // dim forced to model.embed_dim
  nn::ModelSpec model;  // n_classes/n_ids/max_len/vocab_hash set per fold
  nn::TrainConfig train;

  void validate() const;
  std::vector<std::string> resolved_class_names() const;
  std::uint64_t fingerprint() const;
};

struct FoldResult {
  ConfusionMatrix confusion;  // zero counts when the fold failed
  bool failed = false;
  std::string error;
  double best_val_acc = 0.0;
  std::size_t best_epoch = 0;
};

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<FoldResult> folds;
  ConfusionMatrix pooled;  // elementwise sum over successful folds
  bool any_failed = false;
  std::uint64_t config_fingerprint = 0;
};

// Cross-validated experiment: per fold, the vocabulary, embeddings and model
// are fitted on the train portion only, then the test portion is scored into
// the fold's confusion matrix. A stage failure marks that fold failed and the
// run continues. Deterministic for fixed seeds.
EvalReport run_experiment(const ExperimentConfig& cfg,
                          std::span<const WaveExample> examples);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string report_to_text(const EvalReport& report);

}  // namespace elp::eval
