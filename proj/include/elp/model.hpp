#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "elp/layers.hpp"
#include "elp/matrix.hpp"
#include "elp/tensor.hpp"

namespace elp::nn {

enum class HeadKind { kCnn, kRnn, kRnnAttention };

const char* head_kind_name(HeadKind head);
HeadKind head_kind_from_name(const std::string& name);

struct PoolSpec {
  std::size_t size = 2;
  std::size_t stride = 2;
};

struct ModelSpec {
  HeadKind head = HeadKind::kCnn;
  std::size_t n_classes = 2;
  std::size_t n_ids = 22;  // vocabulary ids incl. PAD and UNK
  std::size_t embed_dim = 64;
  std::size_t max_len = 45;
  // CNN head: one conv block (conv -> relu -> maxpool) per pool entry.
  std::size_t conv_filters = 128;
  std::size_t conv_kernel = 5;
  std::vector<PoolSpec> pools = {{3, 3}, {2, 2}};
  // Recurrent heads.
  std::size_t lstm_hidden = 128;
  std::size_t lstm_layers = 2;
  std::size_t attention_dim = 64;
  // Shared tail: dense hidden -> relu -> dense n_classes -> softmax.
  std::size_t dense_hidden = 64;
  bool freeze_embedding = false;
  std::uint64_t vocab_hash = 0;  // fingerprint of the vocabulary trained with

  void validate() const;
  // Time length left after the conv/pool chain (CNN head).
  std::size_t pooled_len() const;
};

// A named-parameter container plus the forward graph builders. Parameters
// keep a stable order for the optimizer and the checkpoint layout.
struct Model {
  ModelSpec spec;
  std::vector<std::pair<std::string, Tensor>> params;

  Tensor param(const std::string& name) const;

  // Logits (1 x n_classes) for one tokenized example. `train` enables
  // dropout through `rng`; tokens must have length spec.max_len.
  Tensor forward(std::span<const int> tokens, bool train, Rng& rng,
                 double dropout_keep) const;

  // Class probabilities, dropout off. Sums to 1.
  std::vector<double> predict(std::span<const int> tokens) const;

  void zero_grads();
};

// Seeded initialization; weights are uniform fan-in/fan-out scaled, biases
// zero except the LSTM forget gates at +1. When `embedding_init` is given
// its rows seed the embedding table (shape must match).
Model build_model(const ModelSpec& spec, std::uint64_t seed,
                  const Matrix* embedding_init = nullptr);

// Checkpoint: <base>.json architecture manifest + <base>.bin parameter blob.
void save_model(const std::string& base_path, const Model& model);
Model load_model(const std::string& base_path);

}  // namespace elp::nn
