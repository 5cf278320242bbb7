#include "elp/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace elp::embed {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Clamped log of a probability; keeps the loss finite at saturation.
double log_p(double p) { return std::log(std::max(p, 1e-12)); }

void check_token(int t, std::size_t n_ids, const char* what) {
  if (t <= vocab::kPadId || t >= static_cast<int>(n_ids))
    throw Error(std::string("skipgram: ") + what + " token " +
                std::to_string(t) + " out of range");
}

// Cumulative unigram^0.75 table over non-PAD ids.
struct NoiseTable {
  std::vector<double> cumulative;  // per id, 0 for PAD and unseen ids
  double total = 0.0;

  explicit NoiseTable(std::span<const std::size_t> counts) {
    cumulative.resize(counts.size(), 0.0);
    for (std::size_t id = 1; id < counts.size(); ++id) {
      if (counts[id] > 0)
        total += std::pow(static_cast<double>(counts[id]), 0.75);
      cumulative[id] = total;
    }
  }

  int sample(Rng& rng) const {
    double target = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin() + 1, cumulative.end(),
                               target);
    if (it == cumulative.end()) return static_cast<int>(cumulative.size()) - 1;
    return static_cast<int>(it - cumulative.begin());
  }
};

}  // namespace

std::vector<double> count_vectorize(const vocab::TokenSequence& seq,
                                    std::size_t n_ids, bool normalize) {
  std::vector<double> out(n_ids, 0.0);
  double total = 0.0;
  for (int t : seq.tokens) {
    if (t == vocab::kPadId) continue;
    if (t < 0 || t >= static_cast<int>(n_ids))
      throw Error("count_vectorize: token " + std::to_string(t) +
                  " out of range for " + std::to_string(n_ids) + " ids");
    out[static_cast<std::size_t>(t)] += 1.0;
    total += 1.0;
  }
  if (normalize && total > 0.0)
    for (double& v : out) v /= total;
  return out;
}

EmbeddingMatrix skipgram_init(std::size_t n_ids, const SkipgramConfig& cfg) {
  if (cfg.dim < 2) throw Error("skipgram: dim must be at least 2");
  if (n_ids < 2) throw Error("skipgram: need at least 2 ids");
  EmbeddingMatrix e;
  e.config = cfg;
  e.w_in = Matrix(n_ids, cfg.dim);
  e.w_out = Matrix(n_ids, cfg.dim);
  Rng rng = make_rng(cfg.seed);
  const double half = 0.5 / static_cast<double>(cfg.dim);
  for (std::size_t r = 1; r < n_ids; ++r)  // PAD row stays zero
    for (std::size_t c = 0; c < cfg.dim; ++c)
      e.w_in.at(r, c) = rng.uniform(-half, half);
  return e;
}

double skipgram_pair_loss(const EmbeddingMatrix& e, int center, int context,
                          std::span<const int> negatives) {
  return skipgram_pair_loss_grad(e, center, context, negatives, nullptr,
                                 nullptr);
}

double skipgram_pair_loss_grad(const EmbeddingMatrix& e, int center,
                               int context, std::span<const int> negatives,
                               Matrix* g_in, Matrix* g_out) {
  const std::size_t n_ids = e.w_in.rows;
  check_token(center, n_ids, "center");
  check_token(context, n_ids, "context");
  for (int n : negatives) check_token(n, n_ids, "negative");

  auto v_c = e.w_in.row(static_cast<std::size_t>(center));
  auto u_o = e.w_out.row(static_cast<std::size_t>(context));
  const std::size_t d = e.w_in.cols;

  double s_pos = sigmoid(dot(u_o, v_c));
  double loss = -log_p(s_pos);

  std::vector<double> g_center(g_in != nullptr ? d : 0, 0.0);
  if (g_out != nullptr) {
    auto g_ctx = g_out->row(static_cast<std::size_t>(context));
    for (std::size_t i = 0; i < d; ++i) g_ctx[i] += (s_pos - 1.0) * v_c[i];
  }
  if (g_in != nullptr)
    for (std::size_t i = 0; i < d; ++i) g_center[i] += (s_pos - 1.0) * u_o[i];

  for (int n : negatives) {
    auto u_n = e.w_out.row(static_cast<std::size_t>(n));
    double s_neg = sigmoid(dot(u_n, v_c));
    loss += -log_p(1.0 - s_neg);
    if (g_out != nullptr) {
      auto g_n = g_out->row(static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < d; ++i) g_n[i] += s_neg * v_c[i];
    }
    if (g_in != nullptr)
      for (std::size_t i = 0; i < d; ++i) g_center[i] += s_neg * u_n[i];
  }

  if (g_in != nullptr) {
    auto row = g_in->row(static_cast<std::size_t>(center));
    for (std::size_t i = 0; i < d; ++i) row[i] += g_center[i];
  }
  return loss;
}

SkipgramResult skipgram_train(std::span<const vocab::TokenSequence> corpus,
                              std::size_t n_ids, const SkipgramConfig& cfg) {
  if (corpus.empty()) throw Error("skipgram: empty corpus");
  if (cfg.window == 0) throw Error("skipgram: window must be positive");

  // Unigram counts; also validates tokens and collects the distinct set.
  std::vector<std::size_t> counts(n_ids, 0);
  std::set<int> distinct;
  for (const auto& seq : corpus)
    for (int t : seq.tokens) {
      if (t == vocab::kPadId) continue;
      if (t < 0 || t >= static_cast<int>(n_ids))
        throw Error("skipgram: token " + std::to_string(t) +
                    " out of range for " + std::to_string(n_ids) + " ids");
      ++counts[static_cast<std::size_t>(t)];
      distinct.insert(t);
    }
  if (distinct.size() < 2)
    throw Error("skipgram: corpus has " + std::to_string(distinct.size()) +
                " distinct tokens, need at least 2");

  // Count center/context pairs once so the lr schedule knows its length.
  std::size_t pairs_per_epoch = 0;
  const auto w = static_cast<std::ptrdiff_t>(cfg.window);
  for (const auto& seq : corpus) {
    const auto len = static_cast<std::ptrdiff_t>(seq.tokens.size());
    for (std::ptrdiff_t i = 0; i < len; ++i) {
      if (seq.tokens[static_cast<std::size_t>(i)] == vocab::kPadId) continue;
      for (std::ptrdiff_t off = -w; off <= w; ++off) {
        if (off == 0) continue;
        std::ptrdiff_t j = i + off;
        if (j < 0 || j >= len) continue;
        if (seq.tokens[static_cast<std::size_t>(j)] != vocab::kPadId)
          ++pairs_per_epoch;
      }
    }
  }

  SkipgramResult res;
  res.embedding = skipgram_init(n_ids, cfg);
  res.total_pairs = pairs_per_epoch;
  if (cfg.epochs == 0 || pairs_per_epoch == 0) return res;

  NoiseTable noise(counts);
  Rng rng = make_rng(cfg.seed).child(0x5917);
  EmbeddingMatrix& e = res.embedding;
  const std::size_t d = cfg.dim;
  const double total_updates =
      static_cast<double>(cfg.epochs) * static_cast<double>(pairs_per_epoch);
  std::size_t done = 0;

  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<int> negs(cfg.negatives);
  std::vector<double> g_center(d);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t oi : order) {
      const auto& seq = corpus[oi];
      const auto len = static_cast<std::ptrdiff_t>(seq.tokens.size());
      for (std::ptrdiff_t i = 0; i < len; ++i) {
        int center = seq.tokens[static_cast<std::size_t>(i)];
        if (center == vocab::kPadId) continue;
        for (std::ptrdiff_t off = -w; off <= w; ++off) {
          if (off == 0) continue;
          std::ptrdiff_t j = i + off;
          if (j < 0 || j >= len) continue;
          int context = seq.tokens[static_cast<std::size_t>(j)];
          if (context == vocab::kPadId) continue;

          for (std::size_t ni = 0; ni < cfg.negatives; ++ni) {
            int n = noise.sample(rng);
            while (n == context) n = noise.sample(rng);
            negs[ni] = n;
          }

          const double progress =
              static_cast<double>(done) / total_updates;
          const double lr = cfg.lr * std::max(1e-4, 1.0 - progress);
          ++done;

          // Inline SGD step; same math as skipgram_pair_loss_grad.
          auto v_c = e.w_in.row(static_cast<std::size_t>(center));
          auto u_o = e.w_out.row(static_cast<std::size_t>(context));
          double s_pos = sigmoid(dot(u_o, v_c));
          epoch_loss += -log_p(s_pos);
          std::fill(g_center.begin(), g_center.end(), 0.0);
          for (std::size_t x = 0; x < d; ++x) {
            g_center[x] += (s_pos - 1.0) * u_o[x];
            u_o[x] -= lr * (s_pos - 1.0) * v_c[x];
          }
          for (int n : negs) {
            auto u_n = e.w_out.row(static_cast<std::size_t>(n));
            double s_neg = sigmoid(dot(u_n, v_c));
            epoch_loss += -log_p(1.0 - s_neg);
            for (std::size_t x = 0; x < d; ++x) {
              g_center[x] += s_neg * u_n[x];
              u_n[x] -= lr * s_neg * v_c[x];
            }
          }
          for (std::size_t x = 0; x < d; ++x) v_c[x] -= lr * g_center[x];
        }
      }
    }
    res.epoch_loss.push_back(epoch_loss /
                             static_cast<double>(pairs_per_epoch));
  }
  return res;
}

Matrix embed_lookup(const Matrix& w_in, std::span<const int> tokens) {
  Matrix out(tokens.size(), w_in.cols);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    int t = tokens[i];
    if (t < 0 || t >= static_cast<int>(w_in.rows))
      throw Error("embed_lookup: token " + std::to_string(t) +
                  " out of range for " + std::to_string(w_in.rows) + " ids");
    if (t == vocab::kPadId) continue;  // PAD row stays zero
    std::copy_n(w_in.row(static_cast<std::size_t>(t)).begin(), w_in.cols,
                out.row(i).begin());
  }
  return out;
}

void save_embedding(const std::string& base_path, const EmbeddingMatrix& e) {
  std::map<std::string, std::string> meta;
  meta["kind"] = "wave_embedding";
  meta["dim"] = std::to_string(e.config.dim);
  meta["window"] = std::to_string(e.config.window);
  meta["negatives"] = std::to_string(e.config.negatives);
  meta["epochs"] = std::to_string(e.config.epochs);
  char lr_buf[32];
  std::snprintf(lr_buf, sizeof(lr_buf), "%.17g", e.config.lr);
  meta["lr"] = lr_buf;
  meta["seed"] = std::to_string(e.config.seed);
  save_matrix(base_path, e.w_in, meta);
  save_matrix(base_path + ".out", e.w_out, {{"kind", "wave_embedding_out"}});
}

EmbeddingMatrix load_embedding(const std::string& base_path) {
  std::map<std::string, std::string> meta;
  EmbeddingMatrix e;
  e.w_in = load_matrix(base_path, &meta);
  auto need = [&](const std::string& key) {
    auto it = meta.find(key);
    if (it == meta.end())
      throw ParseError("embedding file missing meta key '" + key + "'");
    return it->second;
  };
  if (need("kind") != "wave_embedding")
    throw ParseError("not an embedding artifact: " + base_path);
  e.config.dim = std::stoull(need("dim"));
  e.config.window = std::stoull(need("window"));
  e.config.negatives = std::stoull(need("negatives"));
  e.config.epochs = std::stoull(need("epochs"));
  e.config.lr = std::stod(need("lr"));
  e.config.seed = std::stoull(need("seed"));
  e.w_out = load_matrix(base_path + ".out");
  if (e.w_in.cols != e.config.dim || e.w_out.rows != e.w_in.rows)
    throw ParseError("embedding artifact shape mismatch: " + base_path);
  return e;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double na = std::sqrt(dot(a, a));
  double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

}  // namespace elp::embed
