#include "elp/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace elp::nn {

namespace {

bool is_bias(const std::string& name) {
  return name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0;
}

double l2_penalty(const Model& model, double l2_coeff) {
  if (l2_coeff == 0.0) return 0.0;
  double s = 0.0;
  for (const auto& [name, t] : model.params) {
    if (is_bias(name)) continue;
    for (double v : t.value()) s += v * v;
  }
  return l2_coeff * s;
}

void check_labels(const Dataset& data, std::size_t n_classes) {
  if (data.empty()) throw Error("train: empty dataset");
  for (const auto& ex : data)
    if (ex.label < 0 || ex.label >= static_cast<int>(n_classes))
      throw Error("train: example '" + ex.example_id + "' has label " +
                  std::to_string(ex.label) + ", expected 0.." +
                  std::to_string(n_classes - 1));
}

// Indices per class, order preserved.
std::map<int, std::vector<std::size_t>> by_class(const Dataset& data) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.size(); ++i)
    groups[data[i].label].push_back(i);
  return groups;
}

}  // namespace

void TrainConfig::validate() const {
  if (lr < 0.0) throw Error("train: lr must be nonnegative");
  if (dropout_keep <= 0.0 || dropout_keep > 1.0)
    throw Error("train: dropout keep must be in (0, 1]");
  if (batch_size == 0) throw Error("train: batch_size must be positive");
  if (max_epochs == 0) throw Error("train: max_epochs must be positive");
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw Error("train: val_fraction must be in [0, 1)");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw Error("train: Adam betas must be in [0, 1)");
}

std::pair<double, double> evaluate_model(const Model& model,
                                         const Dataset& data,
                                         double l2_coeff) {
  if (data.empty()) throw Error("evaluate: empty dataset");
  Rng rng = make_rng(0);
  double loss = 0.0;
  std::size_t correct = 0;
  for (const auto& ex : data) {
    Tensor logits = model.forward(ex.tokens, false, rng, 1.0);
    std::vector<double> probs;
    Tensor l = softmax_cross_entropy(logits,
                                     static_cast<std::size_t>(ex.label),
                                     &probs);
    loss += l.item();
    const auto arg = static_cast<std::size_t>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
    if (arg == static_cast<std::size_t>(ex.label)) ++correct;
  }
  return {loss / static_cast<double>(data.size()) +
              l2_penalty(model, l2_coeff),
          static_cast<double>(correct) / static_cast<double>(data.size())};
}

TrainResult train_model(const ModelSpec& spec, const TrainConfig& cfg,
                        const Dataset& examples,
                        const Matrix* embedding_init) {
  cfg.validate();
  spec.validate();
  check_labels(examples, spec.n_classes);

  // Stratified validation holdout.
  Rng split_rng = make_rng(cfg.seed).child(1);
  std::vector<std::size_t> train_idx, val_idx;
  for (auto& [cls, idx] : by_class(examples)) {
    std::vector<std::size_t> pool = idx;
    split_rng.shuffle(pool);
    const auto n_val = static_cast<std::size_t>(
        cfg.val_fraction * static_cast<double>(pool.size()));
    for (std::size_t i = 0; i < pool.size(); ++i)
      (i < n_val ? val_idx : train_idx).push_back(pool[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());

  Dataset train_set, val_set;
  for (std::size_t i : train_idx) train_set.push_back(examples[i]);
  for (std::size_t i : val_idx) val_set.push_back(examples[i]);
  if (train_set.empty()) train_set = examples;
  const Dataset& val_view = val_set.empty() ? train_set : val_set;

  TrainResult res;
  res.model = build_model(spec, cfg.seed, embedding_init);
  Model& model = res.model;

  // Adam state per parameter, in parameter order.
  struct AdamState {
    std::vector<double> m, v;
  };
  std::vector<AdamState> adam(model.params.size());
  for (std::size_t p = 0; p < model.params.size(); ++p) {
    adam[p].m.assign(model.params[p].second.size(), 0.0);
    adam[p].v.assign(model.params[p].second.size(), 0.0);
  }
  std::size_t step = 0;

  std::vector<std::vector<double>> best_params;
  auto snapshot = [&]() {
    best_params.clear();
    for (auto& [name, t] : model.params)
      best_params.emplace_back(t.value().begin(), t.value().end());
  };
  snapshot();

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  Rng shuffle_rng = make_rng(cfg.seed).child(2);
  Rng dropout_rng = make_rng(cfg.seed).child(3);
  std::size_t epochs_since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochStats stats;
    double epoch_ce = 0.0;
    std::size_t correct = 0;

    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t batch_n =
          std::min(cfg.batch_size, order.size() - start);
      model.zero_grads();
      double batch_ce = 0.0;

      for (std::size_t bi = 0; bi < batch_n; ++bi) {
        const auto& ex = train_set[order[start + bi]];
        Tensor logits =
            model.forward(ex.tokens, true, dropout_rng, cfg.dropout_keep);
        std::vector<double> probs;
        Tensor loss = softmax_cross_entropy(
            logits, static_cast<std::size_t>(ex.label), &probs);
        batch_ce += loss.item();
        const auto arg = static_cast<std::size_t>(
            std::max_element(probs.begin(), probs.end()) - probs.begin());
        if (arg == static_cast<std::size_t>(ex.label)) ++correct;
        backward(loss, 1.0 / static_cast<double>(batch_n));
      }

      if (!std::isfinite(batch_ce))
        throw Error("training diverged: non-finite loss at epoch " +
                    std::to_string(epoch + 1) + ", batch " +
                    std::to_string(start / cfg.batch_size + 1));
      epoch_ce += batch_ce;

      // L2 pulls weights (not biases) toward zero: d(l2*w^2)/dw = 2*l2*w.
      if (cfg.l2_coeff != 0.0)
        for (auto& [name, t] : model.params) {
          if (is_bias(name)) continue;
          auto g = t.grad();
          auto w = t.value();
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += 2.0 * cfg.l2_coeff * w[i];
        }

      if (cfg.clip_norm > 0.0) {
        double norm_sq = 0.0;
        for (auto& [name, t] : model.params)
          for (double g : t.grad()) norm_sq += g * g;
        const double norm = std::sqrt(norm_sq);
        if (norm > cfg.clip_norm) {
          stats.clipped = true;
          const double scale = cfg.clip_norm / norm;
          for (auto& [name, t] : model.params)
            for (double& g : t.grad()) g *= scale;
        }
      }

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t p = 0; p < model.params.size(); ++p) {
        auto w = model.params[p].second.value();
        auto g = model.params[p].second.grad();
        auto& st = adam[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
          st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g[i];
          st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
          const double mhat = st.m[i] / bc1;
          const double vhat = st.v[i] / bc2;
          w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
      }
    }

    stats.train_loss = epoch_ce / static_cast<double>(train_set.size()) +
                       l2_penalty(model, cfg.l2_coeff);
    stats.train_acc =
        static_cast<double>(correct) / static_cast<double>(train_set.size());
    auto [val_loss, val_acc] = evaluate_model(model, val_view, cfg.l2_coeff);
    stats.val_loss = val_loss;
    stats.val_acc = val_acc;
    res.history.push_back(stats);

    if (res.history.size() == 1 || val_acc > res.best_val_acc) {
      res.best_val_acc = val_acc;
      res.best_epoch = epoch;
      snapshot();
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (cfg.patience > 0 && epochs_since_best >= cfg.patience) break;
    }
  }

  for (std::size_t p = 0; p < model.params.size(); ++p)
    std::copy(best_params[p].begin(), best_params[p].end(),
              model.params[p].second.value().begin());
  return res;
}

}  // namespace elp::nn
