#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "elp/matrix.hpp"
#include "elp/vocabulary.hpp"

namespace elp::embed {

// Histogram over token ids (length n_ids). PAD is never counted, so the sum
// equals the non-PAD token count; optional L1 normalization.
std::vector<double> count_vectorize(const vocab::TokenSequence& seq,
                                    std::size_t n_ids, bool normalize = false);

struct SkipgramConfig {
  std::size_t dim = 64;
  std::size_t window = 2;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr = 0.025;
  std::uint64_t seed = 1;
};

struct EmbeddingMatrix {
  Matrix w_in;   // n_ids x dim; the embedding used downstream
  Matrix w_out;  // context side
  SkipgramConfig config;
};

// Seeded initialization: w_in uniform in (-0.5/dim, 0.5/dim), w_out zero,
// PAD row zero in both.
EmbeddingMatrix skipgram_init(std::size_t n_ids, const SkipgramConfig& cfg);

struct SkipgramResult {
  EmbeddingMatrix embedding;
  std::vector<double> epoch_loss;  // mean pair loss per epoch
  std::size_t total_pairs = 0;     // center/context pairs per epoch
};

// Skip-gram with negative sampling over the token corpus. Noise distribution
// is unigram^0.75 over non-PAD ids; PAD never appears as center, context or
// negative, so its rows stay zero. Plain SGD, lr decaying linearly over all
// updates. Deterministic for a fixed seed.
SkipgramResult skipgram_train(std::span<const vocab::TokenSequence> corpus,
                              std::size_t n_ids, const SkipgramConfig& cfg);

// Loss of one (center, context) pair with fixed negatives:
// -log s(u_o . v_c) - sum_n log s(-u_n . v_c). Gradients go to the matching
// rows of g_in/g_out (same shapes as w_in/w_out), accumulated.
double skipgram_pair_loss(const EmbeddingMatrix& e, int center, int context,
                          std::span<const int> negatives);
double skipgram_pair_loss_grad(const EmbeddingMatrix& e, int center,
                               int context, std::span<const int> negatives,
                               Matrix* g_in, Matrix* g_out);

// Rows of w_in for each token; PAD rows are zero. Out-of-range tokens throw.
Matrix embed_lookup(const Matrix& w_in, std::span<const int> tokens);

void save_embedding(const std::string& base_path, const EmbeddingMatrix& e);
EmbeddingMatrix load_embedding(const std::string& base_path);

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace elp::embed
