// Gradient checks: every layer's analytic gradient is compared against
// central finite differences of a scalar readout of its forward pass.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <vector>

#include "elp/common.hpp"
#include "elp/layers.hpp"
#include "elp/tensor.hpp"

using namespace elp;
using namespace elp::nn;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng,
                     double scale = 0.5) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.value()) v = scale * rng.normal();
  return t;
}

// Fixed full-rank coefficients: wrong gradients cannot cancel in the sum.
Tensor readout_weights(std::size_t n) {
  Tensor w = Tensor::zeros({1, n});
  auto v = w.value();
  for (std::size_t i = 0; i < n; ++i) v[i] = std::sin(0.7 * double(i + 1));
  return w;
}

// Collapses any output to a scalar through a fixed linear map, so backward()
// can run from a single value.
Tensor scalar_readout(Tensor out) {
  Tensor flat = flatten(out);
  Tensor w = readout_weights(flat.size());
  Tensor b = Tensor::zeros({1});
  return dense(flat, w, b);
}

// Central-difference check of d(scalar_readout(forward()))/d(input) for every
// element of every listed input. `forward` must rebuild the graph from these
// same tensors each call.
void check_gradients(const std::function<Tensor()>& forward,
                     std::vector<Tensor> inputs) {
  Tensor loss = scalar_readout(forward());
  for (auto& t : inputs) t.zero_grad();
  backward(loss);

  const double h = 1e-5;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    auto& t = inputs[ti];
    auto values = t.value();
    auto grads = t.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double keep = values[i];
      values[i] = keep + h;
      const double up = scalar_readout(forward()).item();
      values[i] = keep - h;
      const double down = scalar_readout(forward()).item();
      values[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double denom =
          std::max({std::abs(fd), std::abs(grads[i]), 1e-2});
      const double rel = std::abs(fd - grads[i]) / denom;
      INFO("input ", ti, " element ", i, ": fd=", fd, " grad=", grads[i]);
      CHECK(rel < 1e-4);
    }
  }
}

}  // namespace

TEST_CASE("dense gradient") {
  auto rng = make_rng(1);
  Tensor x = random_tensor({1, 5}, rng);
  Tensor w = random_tensor({3, 5}, rng);
  Tensor b = random_tensor({3}, rng);
  check_gradients([&] { return dense(x, w, b); }, {x, w, b});
}

TEST_CASE("relu gradient and value") {
  auto rng = make_rng(2);
  Tensor x = random_tensor({4, 3}, rng, 1.0);
  Tensor y = relu(x);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(y.value()[i] == std::max(0.0, x.value()[i]));
  check_gradients([&] { return relu(x); }, {x});
}

TEST_CASE("conv1d gradient wrt input, kernel and bias") {
  auto rng = make_rng(3);
  Tensor x = random_tensor({6, 3}, rng);
  Tensor w = random_tensor({2, 3, 3}, rng);
  Tensor b = random_tensor({2}, rng);
  Tensor y = conv1d_same(x, w, b);
  CHECK(y.rows() == 6);
  CHECK(y.cols() == 2);
  check_gradients([&] { return conv1d_same(x, w, b); }, {x, w, b});
}

TEST_CASE("conv1d same-padding edges only see in-range samples") {
  // kernel that copies the left neighbour: output row 0 must be bias only
  Tensor x = Tensor::zeros({3, 1});
  x.value()[0] = 5.0;
  x.value()[1] = 7.0;
  x.value()[2] = 11.0;
  Tensor w = Tensor::zeros({1, 3, 1});
  w.value()[0] = 1.0;  // tap on t-1
  Tensor b = Tensor::zeros({1});
  b.value()[0] = 0.25;
  Tensor y = conv1d_same(x, w, b);
  CHECK(y.value()[0] == doctest::Approx(0.25));
  CHECK(y.value()[1] == doctest::Approx(5.25));
  CHECK(y.value()[2] == doctest::Approx(7.25));
}

TEST_CASE("maxpool gradient routes to the argmax") {
  auto rng = make_rng(4);
  Tensor x = random_tensor({7, 2}, rng, 1.0);
  Tensor y = maxpool1d(x, 3, 2);
  CHECK(y.rows() == 3);
  CHECK(y.cols() == 2);
  check_gradients([&] { return maxpool1d(x, 3, 2); }, {x});

  // routing: bump the winning element, output follows; others do nothing
  Tensor simple = Tensor::zeros({4, 1});
  simple.value()[2] = 3.0;
  Tensor pooled = maxpool1d(simple, 4, 4);
  REQUIRE(pooled.size() == 1);
  CHECK(pooled.value()[0] == 3.0);
  pooled.zero_grad();
  simple.zero_grad();
  backward(pooled);
  CHECK(simple.grad()[2] == 1.0);
  CHECK(simple.grad()[0] == 0.0);
}

TEST_CASE("lstm gradient, forward direction") {
  auto rng = make_rng(5);
  const std::size_t d = 3, hdim = 2, T = 4;
  Tensor x = random_tensor({T, d}, rng);
  Tensor w = random_tensor({4 * hdim, d}, rng);
  Tensor u = random_tensor({4 * hdim, hdim}, rng);
  Tensor b = random_tensor({4 * hdim}, rng);
  Tensor y = lstm_layer(x, w, u, b, false);
  CHECK(y.rows() == T);
  CHECK(y.cols() == hdim);
  check_gradients([&] { return lstm_layer(x, w, u, b, false); },
                  {x, w, u, b});
}

TEST_CASE("lstm gradient, reverse direction") {
  auto rng = make_rng(6);
  const std::size_t d = 2, hdim = 2, T = 3;
  Tensor x = random_tensor({T, d}, rng);
  Tensor w = random_tensor({4 * hdim, d}, rng);
  Tensor u = random_tensor({4 * hdim, hdim}, rng);
  Tensor b = random_tensor({4 * hdim}, rng);
  check_gradients([&] { return lstm_layer(x, w, u, b, true); }, {x, w, u, b});
}

TEST_CASE("reverse lstm is the forward lstm on the flipped sequence") {
  auto rng = make_rng(7);
  const std::size_t d = 2, hdim = 3, T = 5;
  Tensor x = random_tensor({T, d}, rng);
  Tensor w = random_tensor({4 * hdim, d}, rng);
  Tensor u = random_tensor({4 * hdim, hdim}, rng);
  Tensor b = random_tensor({4 * hdim}, rng);

  Tensor flipped = Tensor::zeros({T, d});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < d; ++j)
      flipped.value()[t * d + j] = x.value()[(T - 1 - t) * d + j];

  Tensor rev = lstm_layer(x, w, u, b, true);
  Tensor fwd = lstm_layer(flipped, w, u, b, false);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < hdim; ++j)
      CHECK(rev.value()[t * hdim + j] ==
            doctest::Approx(fwd.value()[(T - 1 - t) * hdim + j])
                .epsilon(1e-12));
}

TEST_CASE("concat_cols gradient and layout") {
  auto rng = make_rng(8);
  Tensor a = random_tensor({3, 2}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  Tensor y = concat_cols(a, b);
  CHECK(y.rows() == 3);
  CHECK(y.cols() == 6);
  CHECK(y.value()[0] == a.value()[0]);
  CHECK(y.value()[2] == b.value()[0]);
  check_gradients([&] { return concat_cols(a, b); }, {a, b});
}

TEST_CASE("masked_mean gradient and masking") {
  auto rng = make_rng(9);
  Tensor x = random_tensor({4, 3}, rng);
  const std::vector<bool> mask = {true, false, true, false};
  Tensor y = masked_mean(x, mask);
  CHECK(y.rows() == 1);
  CHECK(y.cols() == 3);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(y.value()[j] ==
          doctest::Approx((x.value()[j] + x.value()[6 + j]) / 2.0));
  check_gradients([&] { return masked_mean(x, mask); }, {x});

  const std::vector<bool> none(4, false);
  CHECK_THROWS_AS(masked_mean(x, none), Error);
}

TEST_CASE("attention pool gradient and weight structure") {
  auto rng = make_rng(10);
  const std::size_t hdim = 3, adim = 4, T = 5;
  Tensor f = random_tensor({T, hdim}, rng);
  Tensor w = random_tensor({adim, hdim}, rng);
  Tensor b = random_tensor({adim}, rng);
  Tensor v = random_tensor({adim}, rng);
  const std::vector<bool> mask = {true, true, false, true, false};

  auto out = attention_pool(f, w, b, v, mask);
  CHECK(out.context.rows() == 1);
  CHECK(out.context.cols() == hdim);
  REQUIRE(out.weights.size() == T);
  double wsum = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    if (mask[t]) {
      CHECK(out.weights[t] > 0.0);
      wsum += out.weights[t];
    } else {
      CHECK(out.weights[t] == 0.0);
    }
  }
  CHECK(wsum == doctest::Approx(1.0));

  check_gradients(
      [&] { return attention_pool(f, w, b, v, mask).context; },
      {f, w, b, v});

  const std::vector<bool> none(T, false);
  CHECK_THROWS_AS(attention_pool(f, w, b, v, none), Error);
}

TEST_CASE("embedding rows gradient accumulates per id and PAD stays frozen") {
  auto rng = make_rng(11);
  Tensor table = random_tensor({5, 3}, rng);
  const std::vector<int> tokens = {2, 0, 2, 4};

  Tensor y = embedding_rows(table, tokens);
  CHECK(y.rows() == 4);
  CHECK(y.cols() == 3);
  for (std::size_t j = 0; j < 3; ++j) CHECK(y.value()[3 + j] == 0.0);

  check_gradients([&] { return embedding_rows(table, tokens); }, {table});

  // PAD row gradient is structurally zero
  Tensor loss = scalar_readout(embedding_rows(table, tokens));
  table.zero_grad();
  backward(loss);
  for (std::size_t j = 0; j < 3; ++j) CHECK(table.grad()[j] == 0.0);

  // frozen lookup detaches the table completely
  Tensor frozen_loss = scalar_readout(embedding_rows(table, tokens, true));
  table.zero_grad();
  backward(frozen_loss);
  for (double g : table.grad()) CHECK(g == 0.0);

  const std::vector<int> bad = {7};
  CHECK_THROWS_AS(embedding_rows(table, bad), Error);
}

TEST_CASE("flatten is a transparent copy") {
  auto rng = make_rng(12);
  Tensor x = random_tensor({3, 4}, rng);
  Tensor y = flatten(x);
  CHECK(y.rows() == 1);
  CHECK(y.cols() == 12);
  check_gradients([&] { return flatten(x); }, {x});
}

TEST_CASE("dropout identity cases") {
  auto rng = make_rng(13);
  Tensor x = random_tensor({4, 4}, rng);

  auto r1 = make_rng(99);
  Tensor eval = dropout(x, 0.5, r1, false);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(eval.value()[i] == x.value()[i]);

  auto r2 = make_rng(99);
  Tensor keep_all = dropout(x, 1.0, r2, true);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(keep_all.value()[i] == x.value()[i]);
}

TEST_CASE("dropout scales survivors and drops the rest") {
  auto rng = make_rng(14);
  Tensor x = random_tensor({10, 10}, rng, 1.0);
  auto r = make_rng(7);
  Tensor y = dropout(x, 0.8, r, true);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y.value()[i] == 0.0) {
      ++zeros;
    } else {
      CHECK(y.value()[i] == doctest::Approx(x.value()[i] / 0.8));
    }
  }
  CHECK(zeros > 0);
  CHECK(zeros < 60);  // keep 0.8 over 100 elements
}

TEST_CASE("dropout gradient with a deterministic mask") {
  auto rng = make_rng(15);
  Tensor x = random_tensor({3, 3}, rng);
  check_gradients(
      [&] {
        auto r = make_rng(42);  // same mask on every rebuild
        return dropout(x, 0.6, r, true);
      },
      {x});
}

TEST_CASE("softmax cross entropy value, gradient and shift invariance") {
  auto rng = make_rng(16);
  Tensor logits = random_tensor({1, 5}, rng, 2.0);
  std::vector<double> probs;
  Tensor loss = softmax_cross_entropy(logits, 2, &probs);
  REQUIRE(probs.size() == 5);
  double psum = 0.0;
  for (double p : probs) psum += p;
  CHECK(psum == doctest::Approx(1.0));
  CHECK(loss.item() == doctest::Approx(-std::log(probs[2])));

  // analytic gradient equals probs - onehot
  logits.zero_grad();
  backward(loss);
  for (std::size_t i = 0; i < 5; ++i) {
    const double expect = probs[i] - (i == 2 ? 1.0 : 0.0);
    CHECK(logits.grad()[i] == doctest::Approx(expect).epsilon(1e-10));
  }

  // finite differences agree
  const double h = 1e-6;
  for (std::size_t i = 0; i < 5; ++i) {
    const double keep = logits.value()[i];
    logits.value()[i] = keep + h;
    const double up = softmax_cross_entropy(logits, 2).item();
    logits.value()[i] = keep - h;
    const double down = softmax_cross_entropy(logits, 2).item();
    logits.value()[i] = keep;
    CHECK((up - down) / (2 * h) ==
          doctest::Approx(logits.grad()[i]).epsilon(1e-4));
  }

  // shifting all logits leaves loss and probs unchanged
  Tensor shifted = Tensor::zeros({1, 5});
  for (std::size_t i = 0; i < 5; ++i)
    shifted.value()[i] = logits.value()[i] + 1000.0;
  std::vector<double> probs2;
  Tensor loss2 = softmax_cross_entropy(shifted, 2, &probs2);
  CHECK(loss2.item() == doctest::Approx(loss.item()).epsilon(1e-10));
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(probs2[i] == doctest::Approx(probs[i]).epsilon(1e-9));

  CHECK_THROWS_AS(softmax_cross_entropy(logits, 9), Error);
}

TEST_CASE("softmax_values is stable for extreme logits") {
  const std::vector<double> big = {1000.0, 1001.0, 999.0};
  const auto p = softmax_values(big);
  REQUIRE(p.size() == 3);
  double sum = 0.0;
  for (double v : p) {
    CHECK(std::isfinite(v));
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0));
  CHECK(p[1] > p[0]);
  CHECK(p[0] > p[2]);
}

TEST_CASE("gradients accumulate across backward calls") {
  Tensor x = Tensor::zeros({1, 2});
  x.value()[0] = 1.0;
  x.value()[1] = 2.0;
  Tensor w = readout_weights(2);
  Tensor b = Tensor::zeros({1});

  Tensor l1 = dense(x, w, b);
  x.zero_grad();
  backward(l1);
  const double once = x.grad()[0];
  Tensor l2 = dense(x, w, b);
  backward(l2);
  CHECK(x.grad()[0] == doctest::Approx(2.0 * once));

  // fractional seeds scale the whole sweep
  x.zero_grad();
  Tensor l3 = dense(x, w, b);
  backward(l3, 0.5);
  CHECK(x.grad()[0] == doctest::Approx(0.5 * once));
}

TEST_CASE("deep chained graph backpropagates through every layer") {
  auto rng = make_rng(17);
  Tensor x = random_tensor({6, 2}, rng);
  Tensor wc = random_tensor({3, 3, 2}, rng);
  Tensor bc = random_tensor({3}, rng);
  Tensor wl = random_tensor({8, 3}, rng);
  Tensor ul = random_tensor({8, 2}, rng);
  Tensor bl = random_tensor({8}, rng);
  const std::vector<bool> mask = {true, true, true, true, false, false};

  auto forward = [&] {
    Tensor h = relu(conv1d_same(x, wc, bc));
    Tensor p = maxpool1d(h, 2, 1);
    Tensor s = lstm_layer(p, wl, ul, bl, false);
    std::vector<bool> m(mask.begin(), mask.begin() + long(s.rows()));
    return masked_mean(s, m);
  };
  check_gradients(forward, {x, wc, bc, wl, ul, bl});
}
