#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "elp/experiment.hpp"
#include "elp/labels.hpp"
#include "elp/record.hpp"
#include "elp/synth.hpp"

namespace elp::tasks {

enum class TaskId { kMitbih, kAfib5s, kChallenge2017, kSynth };

const char* task_name(TaskId task);
TaskId task_from_name(const std::string& name);

// Where a corpus lives. `records` empty means every .hea under data_dir.
struct TaskPaths {
  std::string data_dir;
  std::vector<std::string> records;
  std::string reference_csv;  // challenge2017 label file
  std::string ann_ext = "atr";
};

struct SynthTaskConfig {
  std::size_t n_records = 200;
  double duration_s = 10.0;
  double fs = 360.0;
  double bpm = 75.0;
  double snr_db = 20.0;
  std::uint64_t seed = 1;
  std::size_t canonical_len = 64;
};

// The two synthetic classes differ in QRS polarity and T amplitude.
synth::BeatShape synth_class_shape(int cls);
synth::SynthSpec synth_record_spec(const SynthTaskConfig& cfg,
                                   std::size_t index);

// Record-level binary task over generated records; peaks come from the
// detector, not the generator, so the full chain is exercised.
std::vector<eval::WaveExample> build_synth_dataset(const SynthTaskConfig& cfg);

// Heartbeat classification: one example per annotated beat with its two
// neighbours (9 waves), labeled by AAMI class. Edge beats are skipped.
std::vector<eval::WaveExample> build_mitbih_beat_dataset(
    const TaskPaths& paths, std::size_t canonical_len = 64);

// AFIB detection on 5 s segments cut from rhythm annotations, balanced by
// undersampling the majority class.
std::vector<eval::WaveExample> build_afib_segment_dataset(
    const TaskPaths& paths, const labels::SegmentLabelConfig& cfg = {},
    std::size_t canonical_len = 64, std::uint64_t balance_seed = 1);

// Record-level 4-class task (N, A, O, ~) labeled by the reference file;
// peaks from the detector.
std::vector<eval::WaveExample> build_challenge2017_dataset(
    const TaskPaths& paths, std::size_t canonical_len = 64);

// Detector -> wave extraction chain used by the record-level tasks.
std::vector<wave::WaveSegment> detect_and_extract(
    std::span<const double> signal, double fs, std::size_t canonical_len);

// Folds, class names, sequence length and model shape tuned per task.
eval::ExperimentConfig default_experiment(TaskId task);

// All record base names with a .hea file under dir, sorted.
std::vector<std::string> list_wfdb_records(const std::string& dir);

}  // namespace elp::tasks
