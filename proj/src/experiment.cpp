#include "elp/experiment.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

#include "elp/common.hpp"
#include "elp/kfold.hpp"
#include "elp/vocabulary.hpp"

namespace elp::eval {

namespace {

using nlohmann::json;

json confusion_to_json(const ConfusionMatrix& cm) {
  json rows = json::array();
  for (std::size_t r = 0; r < cm.n(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < cm.n(); ++c) row.push_back(cm.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

ConfusionMatrix confusion_from_json(const json& rows,
                                    const std::vector<std::string>& names) {
  ConfusionMatrix cm(names);
  if (!rows.is_array() || rows.size() != cm.n())
    throw ParseError("report: confusion matrix row count mismatch");
  for (std::size_t r = 0; r < cm.n(); ++r) {
    const json& row = rows[r];
    if (!row.is_array() || row.size() != cm.n())
      throw ParseError("report: confusion matrix column count mismatch");
    for (std::size_t c = 0; c < cm.n(); ++c)
      cm.at(r, c) = row[c].get<std::size_t>();
  }
  return cm;
}

// Canonical waves of the train portion, as k-means input.
Matrix gather_waves(std::span<const WaveExample> examples,
                    const std::vector<std::size_t>& indices, std::size_t len,
                    wave::WaveKind only_kind, bool filter_kind) {
  std::vector<const std::vector<double>*> rows;
  for (std::size_t i : indices) {
    for (const auto& w : examples[i].waves) {
      if (w.missing || w.degenerate) continue;
      if (filter_kind && w.kind != only_kind) continue;
      if (w.canonical.size() != len)
        throw Error("experiment: canonical length mismatch in example " +
                    examples[i].id);
      rows.push_back(&w.canonical);
    }
  }
  Matrix m(rows.size(), len);
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(rows[r]->begin(), rows[r]->end(), m.row(r).begin());
  return m;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n_classes < 2) throw Error("experiment: need at least two classes");
  if (!class_names.empty() && class_names.size() != n_classes)
    throw Error("experiment: class_names size differs from n_classes");
  if (folds < 2) throw Error("experiment: folds must be at least 2");
  if (max_len == 0) throw Error("experiment: max_len must be positive");
  if (canonical_len < 2)
    throw Error("experiment: canonical_len must be at least 2");
  if (kmeans.k < 2) throw Error("experiment: vocabulary k must be at least 2");
  train.validate();
}

std::vector<std::string> ExperimentConfig::resolved_class_names() const {
  if (!class_names.empty()) return class_names;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < n_classes; ++c)
    names.push_back("class" + std::to_string(c));
  return names;
}

std::uint64_t ExperimentConfig::fingerprint() const {
  std::ostringstream s;
  s << "n_classes=" << n_classes << ";folds=" << folds
    << ";stratified=" << stratified << ";seed=" << seed << ";k=" << kmeans.k
    << ";restarts=" << kmeans.restarts << ";L=" << canonical_len
    << ";per_kind=" << per_kind_vocab << ";beat_tokens=" << beat_tokens
    << ";max_len=" << max_len << ";sg_dim=" << model.embed_dim
    << ";sg_window=" << skipgram.window << ";sg_neg=" << skipgram.negatives
    << ";sg_epochs=" << skipgram.epochs << ";sg_lr=" << skipgram.lr
    << ";head=" << nn::head_kind_name(model.head)
    << ";conv_filters=" << model.conv_filters
    << ";conv_kernel=" << model.conv_kernel << ";pools=";
  for (const auto& p : model.pools) s << p.size << "/" << p.stride << ",";
  s << ";lstm_hidden=" << model.lstm_hidden
    << ";lstm_layers=" << model.lstm_layers
    << ";attention_dim=" << model.attention_dim
    << ";dense_hidden=" << model.dense_hidden
    << ";freeze=" << model.freeze_embedding << ";epochs=" << train.max_epochs
    << ";batch=" << train.batch_size << ";lr=" << train.lr
    << ";l2=" << train.l2_coeff << ";keep=" << train.dropout_keep
    << ";patience=" << train.patience << ";clip=" << train.clip_norm
    << ";val=" << train.val_fraction;
  for (const auto& n : resolved_class_names()) s << ";name=" << n;
  return fnv1a(s.str());
}

EvalReport run_experiment(const ExperimentConfig& cfg,
                          std::span<const WaveExample> examples) {
  cfg.validate();
  if (examples.empty()) throw Error("experiment: no examples");

  std::vector<int> labels;
  for (const auto& ex : examples) {
    if (ex.label < 0 || ex.label >= static_cast<int>(cfg.n_classes))
      throw Error("experiment: label out of range in example " + ex.id);
    if (ex.waves.empty())
      throw Error("experiment: example " + ex.id +
                  " has no waves; drop it before evaluating");
    labels.push_back(ex.label);
  }

  const auto names = cfg.resolved_class_names();
  const auto splits = kfold_split(labels, cfg.folds, cfg.seed, cfg.stratified);

  EvalReport report;
  report.class_names = names;
  report.pooled = ConfusionMatrix(names);
  report.config_fingerprint = cfg.fingerprint();

  Rng root = make_rng(cfg.seed);
  for (std::size_t f = 0; f < splits.size(); ++f) {
    FoldResult fr;
    fr.confusion = ConfusionMatrix(names);
    try {
      Rng fold_rng = root.child(f + 1);
      const auto& split = splits[f];

      cluster::KMeansConfig km = cfg.kmeans;
      km.seed = fold_rng.child(1).next_u64();
      vocab::WaveVocabulary vocabulary;
      if (cfg.per_kind_vocab) {
        std::array<Matrix, wave::kNumWaveKinds> by_kind;
        for (std::size_t k = 0; k < wave::kNumWaveKinds; ++k)
          by_kind[k] = gather_waves(examples, split.train, cfg.canonical_len,
                                    static_cast<wave::WaveKind>(k), true);
        vocabulary =
            vocab::build_vocabulary_per_kind(by_kind, km, cfg.canonical_len);
      } else {
        Matrix waves = gather_waves(examples, split.train, cfg.canonical_len,
                                    wave::WaveKind::kQrs, false);
        vocabulary = vocab::build_vocabulary(waves, km, cfg.canonical_len);
      }

      auto tokenize_one = [&](std::size_t i) {
        const auto& ex = examples[i];
        return cfg.beat_tokens
                   ? vocab::tokenize_beats(ex.waves, vocabulary, cfg.max_len,
                                           ex.id, ex.label)
                   : vocab::tokenize(ex.waves, vocabulary, cfg.max_len, ex.id,
                                     ex.label);
      };
      nn::Dataset train_set, test_set;
      for (std::size_t i : split.train) train_set.push_back(tokenize_one(i));
      for (std::size_t i : split.test) test_set.push_back(tokenize_one(i));

      embed::SkipgramConfig sg = cfg.skipgram;
      sg.dim = cfg.model.embed_dim;
      sg.seed = fold_rng.child(2).next_u64();
      auto embedding =
          embed::skipgram_train(train_set, vocabulary.n_ids(), sg);

      nn::ModelSpec spec = cfg.model;
      spec.n_classes = cfg.n_classes;
      spec.n_ids = vocabulary.n_ids();
      spec.max_len = cfg.max_len;
      spec.vocab_hash = vocabulary.training_hash;
      spec.validate();

      nn::TrainConfig tc = cfg.train;
      tc.seed = fold_rng.child(3).next_u64();
      auto trained =
          nn::train_model(spec, tc, train_set, &embedding.embedding.w_in);
      fr.best_val_acc = trained.best_val_acc;
      fr.best_epoch = trained.best_epoch;

      for (const auto& seq : test_set) {
        const auto probs = trained.model.predict(seq.tokens);
        const std::size_t pred = static_cast<std::size_t>(
            std::max_element(probs.begin(), probs.end()) - probs.begin());
        fr.confusion.add(static_cast<std::size_t>(seq.label), pred);
      }
      report.pooled += fr.confusion;
    } catch (const std::exception& e) {
      fr.failed = true;
      fr.error = e.what();
      fr.confusion = ConfusionMatrix(names);
      report.any_failed = true;
    }
    report.folds.push_back(std::move(fr));
  }
  return report;
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["kind"] = "eval_report";
  j["class_names"] = report.class_names;
  j["config_fingerprint"] = hex64(report.config_fingerprint);
  j["any_failed"] = report.any_failed;
  j["pooled"] = confusion_to_json(report.pooled);
  json folds = json::array();
  for (const auto& fr : report.folds) {
    json jf;
    jf["confusion"] = confusion_to_json(fr.confusion);
    jf["failed"] = fr.failed;
    jf["error"] = fr.error;
    jf["best_val_acc"] = fr.best_val_acc;
    jf["best_epoch"] = fr.best_epoch;
    folds.push_back(std::move(jf));
  }
  j["folds"] = std::move(folds);
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: invalid JSON: ") + e.what());
  }
  try {
    if (j.value("kind", "") != "eval_report")
      throw ParseError("report: not an eval_report document");
    EvalReport report;
    report.class_names = j.at("class_names").get<std::vector<std::string>>();
    report.config_fingerprint =
        std::stoull(j.at("config_fingerprint").get<std::string>(), nullptr,
                    16);
    report.any_failed = j.at("any_failed").get<bool>();
    report.pooled = confusion_from_json(j.at("pooled"), report.class_names);
    for (const auto& jf : j.at("folds")) {
      FoldResult fr;
      fr.confusion =
          confusion_from_json(jf.at("confusion"), report.class_names);
      fr.failed = jf.at("failed").get<bool>();
      fr.error = jf.at("error").get<std::string>();
      fr.best_val_acc = jf.at("best_val_acc").get<double>();
      fr.best_epoch = jf.at("best_epoch").get<std::size_t>();
      report.folds.push_back(std::move(fr));
    }
    return report;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: missing or mistyped field: ") +
                     e.what());
  }
}

std::string report_to_text(const EvalReport& report) {
  std::ostringstream out;
  out << "folds " << report.folds.size() << "  fingerprint "
      << hex64(report.config_fingerprint) << "\n";
  for (std::size_t f = 0; f < report.folds.size(); ++f) {
    const auto& fr = report.folds[f];
    out << "fold " << f << ": ";
    if (fr.failed) {
      out << "FAILED: " << fr.error << "\n";
      continue;
    }
    out << "acc " << format_percent(overall_accuracy(fr.confusion))
        << "  best val acc " << format_percent(100.0 * fr.best_val_acc)
        << " at epoch " << fr.best_epoch << "\n";
  }
  out << "\npooled over " << (report.folds.size() -
                              static_cast<std::size_t>(std::count_if(
                                  report.folds.begin(), report.folds.end(),
                                  [](const FoldResult& fr) {
                                    return fr.failed;
                                  })))
      << " folds:\n";
  out << render_metrics_text(report.pooled);
  if (report.any_failed) out << "\nWARNING: one or more folds failed\n";
  return out.str();
}

}  // namespace elp::eval
