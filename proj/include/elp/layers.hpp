#pragma once

#include <span>
#include <vector>

#include "elp/tensor.hpp"

namespace elp::nn {

// Gathers table rows for each token; PAD (id 0) rows come out zero and never
// receive gradient, which keeps the PAD embedding frozen. `frozen` detaches
// the table entirely.
Tensor embedding_rows(Tensor table, std::span<const int> tokens,
                      bool frozen = false);

// 1D convolution over time with "same" zero padding: x is T x d, w is
// F x K x d (K odd), b is F; output T x F.
Tensor conv1d_same(Tensor x, Tensor w, Tensor b);

Tensor relu(Tensor x);  // gradient at 0 is 0

// Max pooling over time per feature column; output floor((T-size)/stride)+1
// rows. Gradient routes to the first argmax of each window.
Tensor maxpool1d(Tensor x, std::size_t size, std::size_t stride);

// Single-direction LSTM over a T x d sequence; returns T x h hidden states.
// Weights: w 4h x d, u 4h x h, b 4h, gate order [input, forget, cell,
// output]. `reverse` runs right to left (output stays time-aligned).
Tensor lstm_layer(Tensor x, Tensor w, Tensor u, Tensor b, bool reverse);

// Column-wise concatenation of two T x * tensors.
Tensor concat_cols(Tensor a, Tensor b);

// Mean over rows whose mask bit is set; 1 x h. Throws if nothing is valid.
Tensor masked_mean(Tensor x, const std::vector<bool>& mask);

struct AttentionOut {
  Tensor context;               // 1 x h
  std::vector<double> weights;  // per step; masked steps are 0
};

// Additive attention pooling: score_t = v . tanh(w f_t + b), softmax over
// unmasked steps, context = sum of weighted features. w is a x h, b and v
// length a. Throws if every step is masked.
AttentionOut attention_pool(Tensor f, Tensor w, Tensor b, Tensor v,
                            const std::vector<bool>& mask);

// y = W x + b for a row vector x (1 x in); W is out x in, b length out.
Tensor dense(Tensor x, Tensor w, Tensor b);

Tensor flatten(Tensor x);  // 1 x size copy

// Inverted dropout: at train time each element survives with probability
// `keep` and is scaled by 1/keep; at eval time identity.
Tensor dropout(Tensor x, double keep, Rng& rng, bool train);

// Numerically stable fused softmax + cross-entropy for a 1 x C logit row.
// Probabilities (optional out) use max-subtraction; the log is clamped at
// 1e-12. Gradient is probs - onehot(label).
Tensor softmax_cross_entropy(Tensor logits, std::size_t label,
                             std::vector<double>* probs = nullptr);

// Plain stable softmax on values (no graph); used for inference.
std::vector<double> softmax_values(std::span<const double> logits);

}  // namespace elp::nn
