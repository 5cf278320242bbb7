// elp: ECG language processing pipeline driver.
//
// Stages write content-addressed artifacts under the output root
// (out/<stage>/<hash>/) indexed by a single manifest.json. Re-running a
// stage with an unchanged configuration and inputs is a no-op. Commands
// that need an upstream artifact fail naming the stage to run first.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "elp/common.hpp"
#include "elp/csv.hpp"
#include "elp/embedding.hpp"
#include "elp/experiment.hpp"
#include "elp/metrics.hpp"
#include "elp/model.hpp"
#include "elp/pan_tompkins.hpp"
#include "elp/pipeline.hpp"
#include "elp/synth.hpp"
#include "elp/tasks.hpp"
#include "elp/train.hpp"
#include "elp/vocabulary.hpp"
#include "elp/wave_segment.hpp"
#include "elp/wfdb.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace elp;

namespace {

struct Options {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 1;
  std::string task = "synth";
  std::size_t folds = 0;    // 0 = task default
  std::string model;        // empty = task default
  std::size_t k = 20;
  std::size_t embed_dim = 64;
  std::size_t max_len = 0;  // 0 = task default
  std::size_t canonical_len = 64;
  std::size_t restarts = 5;
  bool per_kind_vocab = false;
  bool beat_tokens = false;

  std::size_t epochs = 25;
  std::size_t batch_size = 64;
  double lr = 0.001;
  double dropout_keep = 0.8;
  double l2 = 1e-5;
  std::size_t patience = 0;
  double val_fraction = 0.1;

  std::size_t sg_window = 2;
  std::size_t sg_negatives = 5;
  std::size_t sg_epochs = 5;
  double sg_lr = 0.025;

  std::string data_dir;
  std::string reference_csv;
  std::string ann_ext = "atr";
  std::vector<std::string> records;

  std::size_t n_records = 200;
  double duration_s = 10.0;
  double fs = 360.0;
  double bpm = 75.0;
  double snr_db = 20.0;
};

template <typename T>
void maybe(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void load_config(const std::string& path, Options& o) {
  json j;
  try {
    j = json::parse(read_file_text(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": invalid JSON: " + e.what());
  }
  try {
    maybe(j, "out", o.out_dir);
    maybe(j, "seed", o.seed);
    maybe(j, "task", o.task);
    maybe(j, "folds", o.folds);
    maybe(j, "model", o.model);
    maybe(j, "k", o.k);
    maybe(j, "embed_dim", o.embed_dim);
    maybe(j, "max_len", o.max_len);
    maybe(j, "canonical_len", o.canonical_len);
    maybe(j, "restarts", o.restarts);
    maybe(j, "per_kind_vocab", o.per_kind_vocab);
    maybe(j, "beat_tokens", o.beat_tokens);
    maybe(j, "epochs", o.epochs);
    maybe(j, "batch_size", o.batch_size);
    maybe(j, "lr", o.lr);
    maybe(j, "dropout_keep", o.dropout_keep);
    maybe(j, "l2", o.l2);
    maybe(j, "patience", o.patience);
    maybe(j, "val_fraction", o.val_fraction);
    maybe(j, "data_dir", o.data_dir);
    maybe(j, "reference_csv", o.reference_csv);
    maybe(j, "ann_ext", o.ann_ext);
    maybe(j, "records", o.records);
    if (j.contains("skipgram")) {
      const json& s = j.at("skipgram");
      maybe(s, "window", o.sg_window);
      maybe(s, "negatives", o.sg_negatives);
      maybe(s, "epochs", o.sg_epochs);
      maybe(s, "lr", o.sg_lr);
    }
    if (j.contains("synth")) {
      const json& s = j.at("synth");
      maybe(s, "n_records", o.n_records);
      maybe(s, "duration", o.duration_s);
      maybe(s, "fs", o.fs);
      maybe(s, "bpm", o.bpm);
      maybe(s, "snr_db", o.snr_db);
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": mistyped config field: " + e.what());
  }
}

std::string resolve_out_dir(const Options& o) {
  if (!o.out_dir.empty()) return o.out_dir;
  if (const char* env = std::getenv("ELP_OUT"); env && *env) return env;
  return "out";
}

tasks::TaskPaths task_paths(const Options& o) {
  tasks::TaskPaths p;
  p.data_dir = o.data_dir;
  p.records = o.records;
  p.reference_csv = o.reference_csv;
  p.ann_ext = o.ann_ext;
  return p;
}

tasks::SynthTaskConfig synth_task_config(const Options& o) {
  tasks::SynthTaskConfig c;
  c.n_records = o.n_records;
  c.duration_s = o.duration_s;
  c.fs = o.fs;
  c.bpm = o.bpm;
  c.snr_db = o.snr_db;
  c.seed = o.seed;
  c.canonical_len = o.canonical_len;
  return c;
}

std::vector<eval::WaveExample> build_dataset(const Options& o,
                                             tasks::TaskId task) {
  switch (task) {
    case tasks::TaskId::kSynth:
      return tasks::build_synth_dataset(synth_task_config(o));
    case tasks::TaskId::kMitbih:
      return tasks::build_mitbih_beat_dataset(task_paths(o), o.canonical_len);
    case tasks::TaskId::kAfib5s:
      return tasks::build_afib_segment_dataset(task_paths(o), {},
                                               o.canonical_len, o.seed);
    case tasks::TaskId::kChallenge2017:
      return tasks::build_challenge2017_dataset(task_paths(o),
                                                o.canonical_len);
  }
  throw Error("unknown task");
}

eval::ExperimentConfig make_experiment(const Options& o, tasks::TaskId task) {
  eval::ExperimentConfig cfg = tasks::default_experiment(task);
  cfg.seed = o.seed;
  if (o.folds > 0) cfg.folds = o.folds;
  if (o.max_len > 0) cfg.max_len = o.max_len;
  if (!o.model.empty()) cfg.model.head = nn::head_kind_from_name(o.model);
  cfg.kmeans.k = o.k;
  cfg.kmeans.restarts = o.restarts;
  cfg.canonical_len = o.canonical_len;
  cfg.per_kind_vocab = o.per_kind_vocab;
  cfg.beat_tokens = o.beat_tokens;
  cfg.model.embed_dim = o.embed_dim;
  cfg.skipgram.dim = o.embed_dim;
  cfg.skipgram.window = o.sg_window;
  cfg.skipgram.negatives = o.sg_negatives;
  cfg.skipgram.epochs = o.sg_epochs;
  cfg.skipgram.lr = o.sg_lr;
  cfg.train.max_epochs = o.epochs;
  cfg.train.batch_size = o.batch_size;
  cfg.train.lr = o.lr;
  cfg.train.dropout_keep = o.dropout_keep;
  cfg.train.l2_coeff = o.l2;
  cfg.train.patience = o.patience;
  cfg.train.val_fraction = o.val_fraction;
  return cfg;
}

// ---- single-record stage helpers -------------------------------------------

struct RecordArtifact {
  ingest::EcgRecord record;
  const pipeline::ManifestEntry* entry;
};

std::string record_id_of(const pipeline::ArtifactStore& store,
                         const pipeline::ManifestEntry& entry) {
  const json info =
      json::parse(read_file_text(store.file_path(entry, "info.json")));
  return info.at("record").get<std::string>();
}

RecordArtifact load_record_artifact(const pipeline::ArtifactStore& store,
                                    const std::string& needed_by) {
  const auto& entry = store.require_latest("ingest", needed_by);
  const std::string id = record_id_of(store, entry);
  RecordArtifact out;
  out.record = ingest::read_wfdb_record(
      (fs::path(store.root()) / entry.stage / entry.id_hash / id).string());
  out.entry = &entry;
  return out;
}

const pipeline::ManifestEntry& write_record_artifact(
    pipeline::ArtifactStore& store, const ingest::EcgRecord& record,
    std::uint64_t id_hash, std::uint64_t fingerprint,
    const std::vector<std::string>& extra_files) {
  const std::string dir = store.dir_for("ingest", id_hash);
  ingest::write_wfdb_record(record, dir);
  std::vector<std::string> files = {record.record_id + ".hea",
                                    record.record_id + ".dat"};
  if (!record.annotations.empty()) files.push_back(record.record_id + ".atr");
  json info;
  info["record"] = record.record_id;
  info["fs"] = record.fs;
  info["n_samples"] = record.n_samples();
  info["n_channels"] = record.channels.size();
  info["n_annotations"] = record.annotations.size();
  write_file_text((fs::path(dir) / "info.json").string(), info.dump(2) + "\n");
  files.push_back("info.json");
  for (const auto& f : extra_files) files.push_back(f);
  return store.record("ingest", id_hash, fingerprint, files);
}

std::vector<std::size_t> load_peaks_csv(const std::string& path) {
  std::istringstream in(read_file_text(path));
  std::string line;
  std::vector<std::size_t> peaks;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {  // header
      first = false;
      continue;
    }
    if (line.empty()) continue;
    peaks.push_back(std::stoull(line.substr(0, line.find(','))));
  }
  return peaks;
}

// Waves rebuilt from a segment artifact: kind/missing flags from waves.csv,
// canonical forms from the matrix rows.
std::vector<wave::WaveSegment> load_segment_waves(
    const pipeline::ArtifactStore& store,
    const pipeline::ManifestEntry& entry, Matrix* canonical_out = nullptr) {
  Matrix canonical = load_matrix(
      (fs::path(store.file_path(entry, "canonical")).string()), nullptr);
  std::istringstream in(read_file_text(store.file_path(entry, "waves.csv")));
  std::string line;
  std::getline(in, line);  // header
  std::vector<wave::WaveSegment> waves;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    auto next = [&]() {
      if (!std::getline(row, cell, ',')) throw ParseError("waves.csv: short row");
      return cell;
    };
    wave::WaveSegment w;
    const long long crow = std::stoll(next());
    w.beat_ordinal = std::stoull(next());
    const std::string kind = next();
    if (kind == "P") w.kind = wave::WaveKind::kP;
    else if (kind == "QRS") w.kind = wave::WaveKind::kQrs;
    else if (kind == "T") w.kind = wave::WaveKind::kT;
    else throw ParseError("waves.csv: unknown kind " + kind);
    w.start = std::stoull(next());
    w.end = std::stoull(next());
    w.missing = next() == "1";
    w.degenerate = next() == "1";
    if (crow >= 0) {
      const auto r = canonical.row(static_cast<std::size_t>(crow));
      w.canonical.assign(r.begin(), r.end());
    }
    waves.push_back(std::move(w));
  }
  if (canonical_out) *canonical_out = std::move(canonical);
  return waves;
}

int run_report_command(const std::string& path) {
  const std::string text = read_file_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(path + ": invalid JSON: " + e.what());
  }
  if (j.value("kind", "") == "eval_report") {
    const auto report = eval::report_from_json(text);
    std::cout << eval::report_to_text(report);
    return report.any_failed ? 1 : 0;
  }
  // Bare confusion matrix: {"class_names": [...], "counts": [[...], ...]}
  eval::ConfusionMatrix cm(
      j.at("class_names").get<std::vector<std::string>>());
  const json& rows = j.at("counts");
  if (!rows.is_array() || rows.size() != cm.n())
    throw ParseError(path + ": counts must be a " + std::to_string(cm.n()) +
                     "-row square matrix");
  for (std::size_t r = 0; r < cm.n(); ++r)
    for (std::size_t c = 0; c < cm.n(); ++c)
      cm.at(r, c) = rows[r][c].get<std::size_t>();
  std::cout << eval::render_metrics_text(cm);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options opts;

  // --config is honored before everything else so flags can override it.
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) opts.config_path = argv[i + 1];
    else if (arg.rfind("--config=", 0) == 0) opts.config_path = arg.substr(9);
  }
  try {
    if (!opts.config_path.empty()) load_config(opts.config_path, opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  CLI::App app{"ECG language processing pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_sink;
  app.add_option("--config", config_sink, "JSON config file");
  app.add_option("--out", opts.out_dir, "output root (default $ELP_OUT or ./out)");
  app.add_option("--seed", opts.seed, "global seed");
  app.add_option("--task", opts.task,
                 "dataset task: mitbih|afib5s|challenge2017|synth");
  app.add_option("--folds", opts.folds, "cross-validation folds");
  std::string model_flag;
  app.add_option("--model", model_flag, "classifier head: cnn|rnn|rnn-attn");
  app.add_option("--k", opts.k, "vocabulary size");
  app.add_option("--embed-dim", opts.embed_dim, "embedding dimension");
  app.add_option("--max-len", opts.max_len, "token sequence length");
  app.add_option("--data-dir", opts.data_dir, "corpus directory");
  app.add_option("--reference-csv", opts.reference_csv,
                 "challenge2017 label file");
  app.add_option("--epochs", opts.epochs, "training epochs");
  app.add_option("--n-records", opts.n_records, "synth task record count");
  app.add_option("--snr", opts.snr_db, "synth noise SNR in dB");
  app.add_option("--duration", opts.duration_s, "synth record seconds");

  // ingest
  auto* c_ingest = app.add_subcommand("ingest", "read a record into the store");
  std::string ingest_input, ingest_format = "auto", ingest_id;
  double ingest_fs = 0.0;
  c_ingest->add_option("input", ingest_input, "WFDB base path or CSV file")
      ->required();
  c_ingest->add_option("--format", ingest_format, "auto|wfdb|csv");
  c_ingest->add_option("--fs", ingest_fs, "sampling rate (CSV input)");
  c_ingest->add_option("--id", ingest_id, "record id override");
  c_ingest->add_option("--ann-ext", opts.ann_ext, "annotation extension");

  // synth
  auto* c_synth =
      app.add_subcommand("synth", "generate a synthetic record artifact");
  std::size_t synth_classes = 1;
  double synth_bpm = 75.0, synth_duration = 60.0;
  c_synth->add_option("--classes", synth_classes, "beat classes (1 or 2)");
  c_synth->add_option("--bpm", synth_bpm, "mean heart rate");
  c_synth->add_option("--seconds", synth_duration, "record duration");

  // detect
  auto* c_detect = app.add_subcommand("detect", "R-peak detection");
  std::size_t detect_channel = 0;
  c_detect->add_option("--channel", detect_channel, "signal channel");

  // segment
  auto* c_segment =
      app.add_subcommand("segment", "wave segmentation + canonical forms");

  // build-vocab
  auto* c_vocab = app.add_subcommand("build-vocab", "k-means wave vocabulary");

  // tokenize
  auto* c_tokenize = app.add_subcommand("tokenize", "record to token sequence");

  // train
  auto* c_train = app.add_subcommand("train", "train one model on a task");

  // evaluate
  auto* c_eval =
      app.add_subcommand("evaluate", "cross-validated task evaluation");

  // report
  auto* c_report = app.add_subcommand("report", "print metrics for a report");
  std::string report_path;
  c_report->add_option("input", report_path, "eval report or confusion JSON")
      ->required();

  // gallery
  auto* c_gallery = app.add_subcommand("gallery", "SVG cluster gallery");
  std::size_t gallery_samples = 10;
  c_gallery->add_option("--samples", gallery_samples, "waves shown per cluster");

  CLI11_PARSE(app, argc, argv);
  if (!model_flag.empty())
    opts.model = model_flag == "rnn-attn" ? "rnn_attention" : model_flag;

  try {
    const std::string out_root = resolve_out_dir(opts);
    pipeline::ArtifactStore store(out_root);

    if (*c_report) return run_report_command(report_path);

    if (*c_ingest) {
      ingest::EcgRecord record;
      std::string format = ingest_format;
      if (format == "auto")
        format = fs::path(ingest_input).extension() == ".csv" ? "csv" : "wfdb";
      std::uint64_t content = 0;
      if (format == "csv") {
        if (ingest_fs <= 0.0)
          throw Error("ingest: CSV input needs --fs");
        const std::string text = read_file_text(ingest_input);
        content = fnv1a(text);
        record = ingest::parse_csv_record(
            text, ingest_fs,
            ingest_id.empty() ? fs::path(ingest_input).stem().string()
                              : ingest_id);
      } else if (format == "wfdb") {
        std::string base = ingest_input;
        if (fs::path(base).extension() == ".hea")
          base = base.substr(0, base.size() - 4);
        record = ingest::read_wfdb_record(base, opts.ann_ext);
        if (!ingest_id.empty()) record.record_id = ingest_id;
        const std::string hea = read_file_text(base + ".hea");
        content = fnv1a(hea);
        const auto header = ingest::parse_wfdb_header(hea);
        const auto dat_path =
            fs::path(base).parent_path() / header.signals[0].file_name;
        const auto dat = read_file_bytes(dat_path.string());
        content = fnv1a(dat.data(), dat.size(), content);
      } else {
        throw Error("ingest: unknown --format " + format);
      }
      std::ostringstream idstr;
      idstr << "ingest|" << record.record_id << "|" << hex64(content);
      const auto& entry = write_record_artifact(
          store, record, fnv1a(idstr.str()), fnv1a(idstr.str()), {});
      std::cout << "ingest -> " << store.file_path(entry, "") << "\n"
                << record.record_id << ": " << record.channels.size()
                << " channel(s), " << record.n_samples() << " samples at "
                << record.fs << " Hz, " << record.annotations.size()
                << " annotations\n";
      return 0;
    }

    if (*c_synth) {
      if (synth_classes < 1 || synth_classes > 2)
        throw Error("synth: --classes must be 1 or 2");
      synth::SynthSpec spec;
      spec.fs = opts.fs;
      spec.duration_s = synth_duration;
      spec.bpm = synth_bpm;
      spec.snr_db = opts.snr_db;
      spec.seed = opts.seed;
      spec.record_id = "synth-" + std::to_string(opts.seed);
      spec.classes.clear();
      for (std::size_t c = 0; c < synth_classes; ++c)
        spec.classes.push_back(tasks::synth_class_shape(static_cast<int>(c)));

      std::ostringstream idstr;
      idstr << "synth|fs=" << spec.fs << "|dur=" << spec.duration_s
            << "|bpm=" << spec.bpm << "|snr=" << spec.snr_db
            << "|seed=" << spec.seed << "|classes=" << synth_classes;
      const std::uint64_t id_hash = fnv1a(idstr.str());
      if (const auto* existing = store.find("ingest", id_hash)) {
        store.verify(*existing);
        std::cout << "synth: up to date -> " << store.file_path(*existing, "")
                  << "\n";
        return 0;
      }
      const auto generated = synth::generate(spec);
      const std::string dir = store.dir_for("ingest", id_hash);
      std::ostringstream truth;
      truth << "sample_index,class\n";
      for (std::size_t i = 0; i < generated.peaks.size(); ++i)
        truth << generated.peaks[i] << "," << generated.beat_classes[i]
              << "\n";
      write_file_text((fs::path(dir) / "truth.csv").string(), truth.str());
      const auto& entry = write_record_artifact(
          store, generated.record, id_hash, id_hash, {"truth.csv"});
      std::cout << "synth -> " << store.file_path(entry, "") << "\n"
                << generated.peaks.size() << " ground-truth beats\n";
      return 0;
    }

    if (*c_detect) {
      auto loaded = load_record_artifact(store, "detect");
      if (detect_channel >= loaded.record.channels.size())
        throw Error("detect: record has no channel " +
                    std::to_string(detect_channel));
      std::ostringstream idstr;
      idstr << "detect|in=" << loaded.entry->content_hash
            << "|channel=" << detect_channel;
      const std::uint64_t id_hash = fnv1a(idstr.str());
      if (const auto* existing = store.find("detect", id_hash)) {
        store.verify(*existing);
        std::cout << "detect: up to date -> "
                  << store.file_path(*existing, "") << "\n";
        return 0;
      }
      const auto peaks =
          qrs::pan_tompkins(loaded.record.signal[detect_channel],
                            loaded.record.fs);
      const std::string dir = store.dir_for("detect", id_hash);
      std::ostringstream csv;
      csv << "sample_index,time_s,score\n";
      char buf[64];
      for (std::size_t i = 0; i < peaks.indices.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6g", peaks.indices[i],
                      static_cast<double>(peaks.indices[i]) / loaded.record.fs,
                      peaks.scores[i]);
        csv << buf << "\n";
      }
      write_file_text((fs::path(dir) / "peaks.csv").string(), csv.str());
      const auto& entry = store.record("detect", id_hash, id_hash,
                                       {"peaks.csv"}, {loaded.entry->key()});
      std::cout << "detect -> " << store.file_path(entry, "") << "\n"
                << peaks.indices.size() << " peaks\n";
      return 0;
    }

    if (*c_segment) {
      auto loaded = load_record_artifact(store, "segment");
      const auto& detect_entry = store.require_latest("detect", "segment");
      const auto peaks =
          load_peaks_csv(store.file_path(detect_entry, "peaks.csv"));
      std::ostringstream idstr;
      idstr << "segment|record=" << loaded.entry->content_hash
            << "|peaks=" << detect_entry.content_hash
            << "|L=" << opts.canonical_len;
      const std::uint64_t id_hash = fnv1a(idstr.str());
      if (const auto* existing = store.find("segment", id_hash)) {
        store.verify(*existing);
        std::cout << "segment: up to date -> "
                  << store.file_path(*existing, "") << "\n";
        return 0;
      }
      wave::WaveExtractConfig wc;
      wc.canonical_len = opts.canonical_len;
      const auto waves =
          wave::extract_waves(loaded.record.signal[0], loaded.record.fs,
                              peaks, wc);
      std::size_t n_rows = 0;
      for (const auto& w : waves)
        if (!w.missing) ++n_rows;
      Matrix canonical(n_rows, opts.canonical_len);
      std::ostringstream csv;
      csv << "canonical_row,beat,kind,start,end,missing,degenerate\n";
      std::size_t row = 0;
      for (const auto& w : waves) {
        const long long crow = w.missing ? -1 : static_cast<long long>(row);
        if (!w.missing) {
          std::copy(w.canonical.begin(), w.canonical.end(),
                    canonical.row(row).begin());
          ++row;
        }
        csv << crow << "," << w.beat_ordinal << ","
            << wave::wave_kind_name(w.kind) << "," << w.start << "," << w.end
            << "," << (w.missing ? 1 : 0) << "," << (w.degenerate ? 1 : 0)
            << "\n";
      }
      const std::string dir = store.dir_for("segment", id_hash);
      write_file_text((fs::path(dir) / "waves.csv").string(), csv.str());
      save_matrix((fs::path(dir) / "canonical").string(), canonical,
                  {{"kind", "canonical_waves"},
                   {"canonical_len", std::to_string(opts.canonical_len)}});
      const auto& entry = store.record(
          "segment", id_hash, id_hash,
          {"waves.csv", "canonical.json", "canonical.bin"},
          {loaded.entry->key(), detect_entry.key()});
      std::cout << "segment -> " << store.file_path(entry, "") << "\n"
                << waves.size() << " waves (" << n_rows << " canonical)\n";
      return 0;
    }

    if (*c_vocab) {
      const auto& seg_entry = store.require_latest("segment", "build-vocab");
      Matrix canonical;
      const auto waves = load_segment_waves(store, seg_entry, &canonical);
      std::ostringstream idstr;
      idstr << "vocab|segment=" << seg_entry.content_hash << "|k=" << opts.k
            << "|restarts=" << opts.restarts << "|seed=" << opts.seed
            << "|per_kind=" << opts.per_kind_vocab;
      const std::uint64_t id_hash = fnv1a(idstr.str());
      if (const auto* existing = store.find("build-vocab", id_hash)) {
        store.verify(*existing);
        std::cout << "build-vocab: up to date -> "
                  << store.file_path(*existing, "") << "\n";
        return 0;
      }
      cluster::KMeansConfig km;
      km.k = opts.k;
      km.restarts = opts.restarts;
      km.seed = opts.seed;
      vocab::WaveVocabulary vocabulary;
      if (opts.per_kind_vocab) {
        std::array<Matrix, wave::kNumWaveKinds> by_kind;
        for (std::size_t kind = 0; kind < wave::kNumWaveKinds; ++kind) {
          std::vector<const std::vector<double>*> members;
          for (const auto& w : waves)
            if (!w.missing && w.kind == static_cast<wave::WaveKind>(kind))
              members.push_back(&w.canonical);
          Matrix m(members.size(), opts.canonical_len);
          for (std::size_t r = 0; r < members.size(); ++r)
            std::copy(members[r]->begin(), members[r]->end(),
                      m.row(r).begin());
          by_kind[kind] = std::move(m);
        }
        vocabulary = vocab::build_vocabulary_per_kind(by_kind, km,
                                                      opts.canonical_len);
      } else {
        vocabulary =
            vocab::build_vocabulary(canonical, km, opts.canonical_len);
      }
      const std::string dir = store.dir_for("build-vocab", id_hash);
      vocab::save_vocabulary((fs::path(dir) / "vocab").string(), vocabulary);
      const auto& entry =
          store.record("build-vocab", id_hash, id_hash,
                       {"vocab.json", "vocab.bin"}, {seg_entry.key()});
      std::cout << "build-vocab -> " << store.file_path(entry, "") << "\n"
                << "k=" << vocabulary.k << " over " << canonical.rows
                << " waves\n";
      return 0;
    }

    if (*c_tokenize) {
      const auto& seg_entry = store.require_latest("segment", "tokenize");
      const auto& vocab_entry =
          store.require_latest("build-vocab", "tokenize");
      const auto waves = load_segment_waves(store, seg_entry);
      const auto vocabulary = vocab::load_vocabulary(
          store.file_path(vocab_entry, "vocab"));
      const std::size_t max_len = opts.max_len > 0 ? opts.max_len : 45;
      std::ostringstream idstr;
      idstr << "tokenize|segment=" << seg_entry.content_hash
            << "|vocab=" << vocab_entry.content_hash << "|max_len=" << max_len
            << "|beat_tokens=" << opts.beat_tokens;
      const std::uint64_t id_hash = fnv1a(idstr.str());
      if (const auto* existing = store.find("tokenize", id_hash)) {
        store.verify(*existing);
        std::cout << "tokenize: up to date -> "
                  << store.file_path(*existing, "") << "\n";
        return 0;
      }
      const auto seq =
          opts.beat_tokens
              ? vocab::tokenize_beats(waves, vocabulary, max_len, "record")
              : vocab::tokenize(waves, vocabulary, max_len, "record");
      json jt;
      jt["kind"] = "token_sequence";
      jt["example_id"] = seq.example_id;
      jt["original_len"] = seq.original_len;
      jt["tokens"] = seq.tokens;
      const std::string dir = store.dir_for("tokenize", id_hash);
      write_file_text((fs::path(dir) / "tokens.json").string(),
                      jt.dump(2) + "\n");
      const auto& entry =
          store.record("tokenize", id_hash, id_hash, {"tokens.json"},
                       {seg_entry.key(), vocab_entry.key()});
      std::cout << "tokenize -> " << store.file_path(entry, "") << "\n"
                << seq.original_len << " tokens (kept "
                << std::min(seq.original_len, max_len) << ", padded to "
                << max_len << ")\n";
      return 0;
    }

    if (*c_gallery) {
      const auto& seg_entry = store.require_latest("segment", "gallery");
      const auto& vocab_entry = store.require_latest("build-vocab", "gallery");
      Matrix canonical;
      load_segment_waves(store, seg_entry, &canonical);
      const auto vocabulary =
          vocab::load_vocabulary(store.file_path(vocab_entry, "vocab"));
      std::ostringstream idstr;
      idstr << "gallery|segment=" << seg_entry.content_hash
            << "|vocab=" << vocab_entry.content_hash
            << "|samples=" << gallery_samples;
      const std::uint64_t id_hash = fnv1a(idstr.str());
      if (const auto* existing = store.find("gallery", id_hash)) {
        store.verify(*existing);
        std::cout << "gallery: up to date -> "
                  << store.file_path(*existing, "") << "\n";
        return 0;
      }
      std::vector<std::size_t> assignment(canonical.rows);
      for (std::size_t r = 0; r < canonical.rows; ++r)
        assignment[r] = cluster::nearest_centroid(vocabulary.centroids,
                                                  canonical.row(r));
      const std::string dir = store.dir_for("gallery", id_hash);
      vocab::export_cluster_gallery(vocabulary, canonical, assignment,
                                    (fs::path(dir) / "gallery.svg").string(),
                                    gallery_samples);
      const auto& entry =
          store.record("gallery", id_hash, id_hash, {"gallery.svg"},
                       {seg_entry.key(), vocab_entry.key()});
      std::cout << "gallery -> " << store.file_path(entry, "gallery.svg")
                << "\n";
      return 0;
    }

    if (*c_train || *c_eval) {
      const auto task = tasks::task_from_name(opts.task);
      const auto cfg = make_experiment(opts, task);
      const auto examples = build_dataset(opts, task);

      if (*c_eval) {
        std::ostringstream idstr;
        idstr << "evaluate|task=" << opts.task
              << "|fp=" << hex64(cfg.fingerprint())
              << "|n=" << examples.size();
        const std::uint64_t id_hash = fnv1a(idstr.str());
        const auto report = eval::run_experiment(cfg, examples);
        const std::string dir = store.dir_for("evaluate", id_hash);
        write_file_text((fs::path(dir) / "report.json").string(),
                        eval::report_to_json(report));
        write_file_text((fs::path(dir) / "report.txt").string(),
                        eval::report_to_text(report));
        const auto& entry = store.record("evaluate", id_hash,
                                         cfg.fingerprint(),
                                         {"report.json", "report.txt"});
        std::cout << "evaluate -> " << store.file_path(entry, "") << "\n"
                  << eval::report_to_text(report);
        return report.any_failed ? 1 : 0;
      }

      // train: single model on the full dataset
      std::ostringstream idstr;
      idstr << "train|task=" << opts.task
            << "|fp=" << hex64(cfg.fingerprint()) << "|n=" << examples.size();
      const std::uint64_t id_hash = fnv1a(idstr.str());
      Matrix all_waves = [&] {
        std::vector<const std::vector<double>*> rows;
        for (const auto& ex : examples)
          for (const auto& w : ex.waves)
            if (!w.missing && !w.degenerate) rows.push_back(&w.canonical);
        Matrix m(rows.size(), cfg.canonical_len);
        for (std::size_t r = 0; r < rows.size(); ++r)
          std::copy(rows[r]->begin(), rows[r]->end(), m.row(r).begin());
        return m;
      }();
      cluster::KMeansConfig km = cfg.kmeans;
      km.seed = opts.seed;
      const auto vocabulary =
          vocab::build_vocabulary(all_waves, km, cfg.canonical_len);
      nn::Dataset dataset;
      for (const auto& ex : examples)
        dataset.push_back(cfg.beat_tokens
                              ? vocab::tokenize_beats(ex.waves, vocabulary,
                                                      cfg.max_len, ex.id,
                                                      ex.label)
                              : vocab::tokenize(ex.waves, vocabulary,
                                                cfg.max_len, ex.id,
                                                ex.label));
      embed::SkipgramConfig sg = cfg.skipgram;
      sg.seed = make_rng(opts.seed).child(2).next_u64();
      const auto embedding =
          embed::skipgram_train(dataset, vocabulary.n_ids(), sg);
      nn::ModelSpec spec = cfg.model;
      spec.n_classes = cfg.n_classes;
      spec.n_ids = vocabulary.n_ids();
      spec.max_len = cfg.max_len;
      spec.vocab_hash = vocabulary.training_hash;
      nn::TrainConfig tc = cfg.train;
      tc.seed = make_rng(opts.seed).child(3).next_u64();
      const auto trained =
          nn::train_model(spec, tc, dataset, &embedding.embedding.w_in);
      const std::string dir = store.dir_for("train", id_hash);
      nn::save_model((fs::path(dir) / "model").string(), trained.model);
      vocab::save_vocabulary((fs::path(dir) / "vocab").string(), vocabulary);
      embed::save_embedding((fs::path(dir) / "embedding").string(),
                            embedding.embedding);
      json hist = json::array();
      for (const auto& e : trained.history)
        hist.push_back({{"train_loss", e.train_loss},
                        {"train_acc", e.train_acc},
                        {"val_loss", e.val_loss},
                        {"val_acc", e.val_acc},
                        {"clipped", e.clipped}});
      json jh;
      jh["kind"] = "train_history";
      jh["best_epoch"] = trained.best_epoch;
      jh["best_val_acc"] = trained.best_val_acc;
      jh["epochs"] = std::move(hist);
      write_file_text((fs::path(dir) / "history.json").string(),
                      jh.dump(2) + "\n");
      const auto& entry = store.record(
          "train", id_hash, cfg.fingerprint(),
          {"model.json", "model.bin", "vocab.json", "vocab.bin",
           "embedding.json", "embedding.bin", "embedding.out.json",
           "embedding.out.bin", "history.json"});
      std::cout << "train -> " << store.file_path(entry, "") << "\n"
                << "best val acc "
                << eval::format_percent(100.0 * trained.best_val_acc)
                << " at epoch " << trained.best_epoch << "\n";
      return 0;
    }

    throw Error("no command given");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
