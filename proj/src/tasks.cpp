#include "elp/tasks.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "elp/common.hpp"
#include "elp/pan_tompkins.hpp"
#include "elp/wfdb.hpp"

namespace elp::tasks {

namespace fs = std::filesystem;

const char* task_name(TaskId task) {
  switch (task) {
    case TaskId::kMitbih: return "mitbih";
    case TaskId::kAfib5s: return "afib5s";
    case TaskId::kChallenge2017: return "challenge2017";
    case TaskId::kSynth: return "synth";
  }
  throw Error("task_name: unknown task");
}

TaskId task_from_name(const std::string& name) {
  if (name == "mitbih") return TaskId::kMitbih;
  if (name == "afib5s") return TaskId::kAfib5s;
  if (name == "challenge2017") return TaskId::kChallenge2017;
  if (name == "synth") return TaskId::kSynth;
  throw Error("unknown task '" + name +
              "' (expected mitbih, afib5s, challenge2017 or synth)");
}

std::vector<std::string> list_wfdb_records(const std::string& dir) {
  if (!fs::is_directory(dir))
    throw IoError("dataset directory not found: " + dir);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".hea")
      names.push_back(e.path().stem().string());
  std::sort(names.begin(), names.end());
  return names;
}

namespace {

std::vector<std::string> resolve_records(const TaskPaths& paths) {
  if (!paths.records.empty()) return paths.records;
  auto names = list_wfdb_records(paths.data_dir);
  if (names.empty())
    throw IoError("no .hea records under " + paths.data_dir);
  return names;
}

}  // namespace

std::vector<wave::WaveSegment> detect_and_extract(
    std::span<const double> signal, double fs, std::size_t canonical_len) {
  const auto peaks = qrs::pan_tompkins(signal, fs);
  if (peaks.indices.size() < 2) return {};
  wave::WaveExtractConfig wc;
  wc.canonical_len = canonical_len;
  return wave::extract_waves(signal, fs, peaks.indices, wc);
}

synth::BeatShape synth_class_shape(int cls) {
  synth::BeatShape shape;
  if (cls == 1) {
    shape.qrs.amplitude_mv = -1.0;  // inverted complex
    shape.t.amplitude_mv = 0.7;     // taller T
  }
  return shape;
}

synth::SynthSpec synth_record_spec(const SynthTaskConfig& cfg,
                                   std::size_t index) {
  synth::SynthSpec spec;
  spec.fs = cfg.fs;
  spec.duration_s = cfg.duration_s;
  spec.bpm = cfg.bpm + 5.0 * static_cast<double>(index % 5);
  spec.snr_db = cfg.snr_db;
  spec.seed = make_rng(cfg.seed).child(index + 1).next_u64();
  spec.classes = {synth_class_shape(static_cast<int>(index % 2))};
  spec.record_id = "synth-" + std::to_string(index);
  return spec;
}

std::vector<eval::WaveExample> build_synth_dataset(
    const SynthTaskConfig& cfg) {
  if (cfg.n_records < 4) throw Error("synth task: need at least 4 records");
  std::vector<eval::WaveExample> out;
  for (std::size_t i = 0; i < cfg.n_records; ++i) {
    const auto spec = synth_record_spec(cfg, i);
    const auto rec = synth::generate(spec);
    eval::WaveExample ex;
    ex.id = spec.record_id;
    ex.label = static_cast<int>(i % 2);
    ex.waves = detect_and_extract(rec.record.signal[0], rec.record.fs,
                                  cfg.canonical_len);
    if (ex.waves.empty()) continue;  // detector found < 2 beats
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw Error("synth task: no usable examples");
  return out;
}

std::vector<eval::WaveExample> build_mitbih_beat_dataset(
    const TaskPaths& paths, std::size_t canonical_len) {
  std::vector<eval::WaveExample> out;
  for (const auto& name : resolve_records(paths)) {
    const auto rec = ingest::read_wfdb_record(
        (fs::path(paths.data_dir) / name).string(), paths.ann_ext);
    std::vector<std::size_t> peaks;
    std::vector<int> beat_class;
    for (const auto& ann : rec.annotations) {
      const auto cls = labels::aami_class_of(ann.symbol);
      if (!cls.has_value()) continue;
      peaks.push_back(ann.sample_index);
      beat_class.push_back(static_cast<int>(*cls));
    }
    if (peaks.size() < 3) continue;
    wave::WaveExtractConfig wc;
    wc.canonical_len = canonical_len;
    const auto waves = wave::extract_waves(rec.signal[0], rec.fs, peaks, wc);
    // waves holds P/QRS/T per beat; take each beat with both neighbours.
    for (std::size_t b = 1; b + 1 < peaks.size(); ++b) {
      eval::WaveExample ex;
      ex.id = name + ":" + std::to_string(peaks[b]);
      ex.label = beat_class[b];
      ex.waves.assign(waves.begin() + static_cast<std::ptrdiff_t>(3 * (b - 1)),
                      waves.begin() + static_cast<std::ptrdiff_t>(3 * (b + 2)));
      out.push_back(std::move(ex));
    }
  }
  if (out.empty()) throw Error("mitbih task: no beats found");
  return out;
}

std::vector<eval::WaveExample> build_afib_segment_dataset(
    const TaskPaths& paths, const labels::SegmentLabelConfig& cfg,
    std::size_t canonical_len, std::uint64_t balance_seed) {
  std::vector<eval::WaveExample> all;
  std::vector<int> all_labels;
  for (const auto& name : resolve_records(paths)) {
    const auto rec = ingest::read_wfdb_record(
        (fs::path(paths.data_dir) / name).string(), paths.ann_ext);
    std::vector<std::size_t> beats;
    for (const auto& ann : rec.annotations)
      if (labels::is_beat_symbol(ann.symbol))
        beats.push_back(ann.sample_index);
    const auto intervals =
        labels::rhythm_intervals(rec.annotations, rec.n_samples());
    const auto segments = labels::cut_rhythm_segments(
        rec.fs, rec.n_samples(), beats, intervals, cfg);
    for (const auto& seg : segments) {
      std::vector<std::size_t> seg_peaks;
      for (std::size_t p : beats)
        if (p >= seg.start && p < seg.end) seg_peaks.push_back(p);
      if (seg_peaks.size() < 2) continue;
      wave::WaveExtractConfig wc;
      wc.canonical_len = canonical_len;
      eval::WaveExample ex;
      ex.id = name + ":" + std::to_string(seg.start);
      ex.label = seg.label;
      ex.waves = wave::extract_waves(rec.signal[0], rec.fs, seg_peaks, wc);
      if (ex.waves.empty()) continue;
      all.push_back(std::move(ex));
      all_labels.push_back(seg.label);
    }
  }
  if (all.empty()) throw Error("afib5s task: no segments found");
  const auto kept = labels::balance_undersample(all_labels, balance_seed);
  std::vector<eval::WaveExample> out;
  for (std::size_t i : kept) out.push_back(std::move(all[i]));
  return out;
}

std::vector<eval::WaveExample> build_challenge2017_dataset(
    const TaskPaths& paths, std::size_t canonical_len) {
  if (paths.reference_csv.empty())
    throw Error("challenge2017 task: reference_csv path required");
  const std::string ref = read_file_text(paths.reference_csv);
  std::vector<eval::WaveExample> out;
  std::istringstream lines(ref);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ParseError(paths.reference_csv + ":" + std::to_string(line_no) +
                       ": expected 'record,label'");
    const std::string name = line.substr(0, comma);
    const std::string cls = line.substr(comma + 1);
    int label;
    if (cls == "N") label = 0;
    else if (cls == "A") label = 1;
    else if (cls == "O") label = 2;
    else if (cls == "~") label = 3;
    else
      throw ParseError(paths.reference_csv + ":" + std::to_string(line_no) +
                       ": unknown class '" + cls + "'");
    const auto rec = ingest::read_wfdb_record(
        (fs::path(paths.data_dir) / name).string(), paths.ann_ext);
    eval::WaveExample ex;
    ex.id = name;
    ex.label = label;
    ex.waves = detect_and_extract(rec.signal[0], rec.fs, canonical_len);
    if (ex.waves.empty()) continue;
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw Error("challenge2017 task: no usable records");
  return out;
}

eval::ExperimentConfig default_experiment(TaskId task) {
  eval::ExperimentConfig cfg;
  cfg.model.head = nn::HeadKind::kCnn;
  switch (task) {
    case TaskId::kMitbih:
      cfg.n_classes = 5;
      cfg.class_names = {"N", "S", "V", "F", "Q"};
      cfg.folds = 10;
      cfg.max_len = 9;
      cfg.model.pools = {{3, 3}, {2, 2}};
      break;
    case TaskId::kAfib5s:
      cfg.n_classes = 2;
      cfg.class_names = {"non-AFIB", "AFIB"};
      cfg.folds = 10;
      cfg.max_len = 45;
      cfg.model.pools = {{3, 3}, {2, 2}};
      break;
    case TaskId::kChallenge2017:
      cfg.n_classes = 4;
      cfg.class_names = {"N", "A", "O", "~"};
      cfg.folds = 5;
      cfg.max_len = 330;
      cfg.model.pools = {{5, 5}, {5, 5}, {5, 5}};
      break;
    case TaskId::kSynth:
      cfg.n_classes = 2;
      cfg.class_names = {"plain", "inverted"};
      cfg.folds = 5;
      cfg.max_len = 45;
      cfg.model.pools = {{3, 3}, {2, 2}};
      break;
  }
  return cfg;
}

}  // namespace elp::tasks
