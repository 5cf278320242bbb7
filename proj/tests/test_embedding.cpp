// Count vectors and the skip-gram trainer. The pair-loss gradient is checked
// against central finite differences; training is checked for loss descent
// and for the PAD row staying untouched.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <vector>

#include "elp/common.hpp"
#include "elp/embedding.hpp"
#include "elp/vocabulary.hpp"

using namespace elp;
using namespace elp::embed;
using vocab::TokenSequence;

namespace {

TokenSequence seq_of(std::vector<int> tokens) {
  TokenSequence s;
  s.original_len = tokens.size();
  s.tokens = std::move(tokens);
  return s;
}

// corpus with strong 1<->2 and 3<->4 co-occurrence
std::vector<TokenSequence> toy_corpus() {
  std::vector<TokenSequence> corpus;
  for (int r = 0; r < 40; ++r) {
    corpus.push_back(seq_of({1, 2, 1, 2, 1, 2, 0, 0}));
    corpus.push_back(seq_of({3, 4, 3, 4, 3, 4, 0, 0}));
  }
  return corpus;
}

}  // namespace

TEST_CASE("count vectors skip PAD and optionally normalize") {
  const auto seq = seq_of({1, 2, 2, 5, 0, 0, 0});
  const auto counts = count_vectorize(seq, 7);
  REQUIRE(counts.size() == 7);
  CHECK(counts[0] == 0.0);
  CHECK(counts[1] == 1.0);
  CHECK(counts[2] == 2.0);
  CHECK(counts[5] == 1.0);
  CHECK(counts[3] == 0.0);

  const auto norm = count_vectorize(seq, 7, true);
  CHECK(norm[2] == doctest::Approx(0.5));
  double total = 0.0;
  for (double v : norm) total += v;
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("count vector of an all-PAD sequence is zero") {
  const auto seq = seq_of({0, 0, 0});
  for (double v : count_vectorize(seq, 4, true)) CHECK(v == 0.0);
}

TEST_CASE("count_vectorize rejects out-of-range tokens") {
  const auto seq = seq_of({1, 9});
  CHECK_THROWS_AS(count_vectorize(seq, 4), Error);
}

TEST_CASE("skipgram init shapes, ranges and PAD zeroing") {
  SkipgramConfig cfg;
  cfg.dim = 16;
  cfg.seed = 9;
  const auto e = skipgram_init(10, cfg);
  CHECK(e.w_in.rows == 10);
  CHECK(e.w_in.cols == 16);
  CHECK(e.w_out.rows == 10);
  const double bound = 0.5 / 16.0;
  for (std::size_t j = 0; j < 16; ++j) {
    CHECK(e.w_in.at(0, j) == 0.0);
    CHECK(e.w_out.at(0, j) == 0.0);
  }
  bool any_nonzero = false;
  for (std::size_t i = 1; i < 10; ++i) {
    for (std::size_t j = 0; j < 16; ++j) {
      CHECK(std::abs(e.w_in.at(i, j)) <= bound);
      CHECK(e.w_out.at(i, j) == 0.0);
      any_nonzero = any_nonzero || e.w_in.at(i, j) != 0.0;
    }
  }
  CHECK(any_nonzero);
}

TEST_CASE("pair loss gradient matches finite differences") {
  SkipgramConfig cfg;
  cfg.dim = 6;
  cfg.seed = 4;
  auto e = skipgram_init(8, cfg);
  // w_out starts zero, which hides gradient structure; randomize it
  auto rng = make_rng(11);
  for (std::size_t i = 1; i < e.w_out.rows; ++i)
    for (std::size_t j = 0; j < e.w_out.cols; ++j)
      e.w_out.at(i, j) = 0.3 * rng.normal();
  for (std::size_t i = 1; i < e.w_in.rows; ++i)
    for (std::size_t j = 0; j < e.w_in.cols; ++j)
      e.w_in.at(i, j) = 0.3 * rng.normal();

  const int center = 2, context = 5;
  const std::vector<int> negatives = {1, 3, 7};

  Matrix g_in(e.w_in.rows, e.w_in.cols);
  Matrix g_out(e.w_out.rows, e.w_out.cols);
  const double loss =
      skipgram_pair_loss_grad(e, center, context, negatives, &g_in, &g_out);
  CHECK(loss == doctest::Approx(
                    skipgram_pair_loss(e, center, context, negatives)));
  CHECK(loss > 0.0);

  const double h = 1e-5;
  auto check_grad = [&](Matrix& w, const Matrix& g, std::size_t i,
                        std::size_t j) {
    const double keep = w.at(i, j);
    w.at(i, j) = keep + h;
    const double up = skipgram_pair_loss(e, center, context, negatives);
    w.at(i, j) = keep - h;
    const double down = skipgram_pair_loss(e, center, context, negatives);
    w.at(i, j) = keep;
    const double fd = (up - down) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(g.at(i, j)), 1e-8});
    CHECK(std::abs(fd - g.at(i, j)) / denom < 1e-4);
  };

  for (std::size_t j = 0; j < e.w_in.cols; ++j) {
    check_grad(e.w_in, g_in, std::size_t(center), j);
    check_grad(e.w_out, g_out, std::size_t(context), j);
    check_grad(e.w_out, g_out, 3, j);  // one negative row
  }
  // rows not involved in the pair get no gradient
  for (std::size_t j = 0; j < e.w_in.cols; ++j) {
    CHECK(g_in.at(4, j) == 0.0);
    CHECK(g_out.at(4, j) == 0.0);
  }
}

TEST_CASE("training reduces the mean pair loss") {
  const auto corpus = toy_corpus();
  SkipgramConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 8;
  cfg.lr = 0.05;
  cfg.seed = 2;
  const auto result = skipgram_train(corpus, 6, cfg);
  REQUIRE(result.epoch_loss.size() == 8);
  CHECK(result.total_pairs > 0);
  CHECK(result.epoch_loss.back() < result.epoch_loss.front());
  for (double l : result.epoch_loss) CHECK(std::isfinite(l));
}

TEST_CASE("training is deterministic and leaves PAD rows zero") {
  const auto corpus = toy_corpus();
  SkipgramConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 3;
  cfg.seed = 6;
  const auto a = skipgram_train(corpus, 6, cfg);
  const auto b = skipgram_train(corpus, 6, cfg);
  CHECK(a.embedding.w_in == b.embedding.w_in);
  CHECK(a.embedding.w_out == b.embedding.w_out);
  CHECK(a.epoch_loss == b.epoch_loss);

  for (std::size_t j = 0; j < a.embedding.w_in.cols; ++j) {
    CHECK(a.embedding.w_in.at(0, j) == 0.0);
    CHECK(a.embedding.w_out.at(0, j) == 0.0);
  }
}

TEST_CASE("co-occurring tokens end closer than non-co-occurring ones") {
  const auto corpus = toy_corpus();
  SkipgramConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 12;
  cfg.lr = 0.06;
  cfg.seed = 3;
  const auto result = skipgram_train(corpus, 6, cfg);
  const auto& w = result.embedding.w_in;
  const double same = cosine(w.row(1), w.row(2));
  const double cross = cosine(w.row(1), w.row(4));
  CHECK(same > cross);
}

TEST_CASE("training needs two distinct non-PAD tokens") {
  std::vector<TokenSequence> corpus = {seq_of({1, 1, 1, 0})};
  SkipgramConfig cfg;
  CHECK_THROWS_AS(skipgram_train(corpus, 3, cfg), Error);
  std::vector<TokenSequence> empty;
  CHECK_THROWS_AS(skipgram_train(empty, 3, cfg), Error);
}

TEST_CASE("embed_lookup stacks rows and checks bounds") {
  Matrix w(4, 3);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) w.at(i, j) = double(i * 10 + j);
  const std::vector<int> tokens = {2, 0, 1};
  const auto rows = embed_lookup(w, tokens);
  CHECK(rows.rows == 3);
  CHECK(rows.cols == 3);
  CHECK(rows.at(0, 1) == 21.0);
  CHECK(rows.at(1, 0) == 0.0);
  CHECK(rows.at(2, 2) == 12.0);
  const std::vector<int> bad = {5};
  CHECK_THROWS_AS(embed_lookup(w, bad), Error);
  const std::vector<int> negative = {-1};
  CHECK_THROWS_AS(embed_lookup(w, negative), Error);
}

TEST_CASE("embedding round trips bit-exactly") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "elp_test_embed";
  fs::create_directories(dir);
  const std::string base = (dir / "embed").string();

  const auto corpus = toy_corpus();
  SkipgramConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 2;
  cfg.seed = 8;
  const auto result = skipgram_train(corpus, 6, cfg);
  save_embedding(base, result.embedding);
  const auto back = load_embedding(base);
  CHECK(back.w_in == result.embedding.w_in);
  CHECK(back.w_out == result.embedding.w_out);
  CHECK(back.config.dim == cfg.dim);
  CHECK(back.config.seed == cfg.seed);
  fs::remove_all(dir);
}

TEST_CASE("cosine basics") {
  const std::vector<double> x = {1.0, 0.0};
  const std::vector<double> y = {0.0, 2.0};
  const std::vector<double> z = {3.0, 0.0};
  CHECK(cosine(x, y) == doctest::Approx(0.0));
  CHECK(cosine(x, z) == doctest::Approx(1.0));
  const std::vector<double> zero = {0.0, 0.0};
  CHECK(cosine(x, zero) == 0.0);
}
