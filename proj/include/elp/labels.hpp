#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elp/record.hpp"

namespace elp::labels {

// The five AAMI heartbeat superclasses.
enum class AamiClass { kN = 0, kS = 1, kV = 2, kF = 3, kQ = 4 };

constexpr std::size_t kNumAamiClasses = 5;

const char* aami_class_name(AamiClass c);

// Maps MIT beat symbols onto AAMI classes:
//   N: N L R e j    S: A a J S    V: V E    F: F    Q: / f Q
// ('Q' covers the unclassifiable beat; the paced-fusion symbol 'f' and the
// paced beat '/' join it.)
bool is_beat_symbol(char symbol);
std::optional<AamiClass> aami_class_of(char symbol);

// Annotation-to-beat matching: each detected peak takes the nearest beat
// annotation within the tolerance; every annotation is used at most once.
// Unmatched peaks get nullopt.
std::vector<std::optional<char>> match_beat_labels(
    std::span<const std::size_t> peaks, std::span<const ingest::Annotation> anns,
    double fs, double tolerance_s = 0.150);

// ---- rhythm segmentation ---------------------------------------------------

// A half-open sample range carrying one rhythm label, taken from '+'
// annotations whose aux is "(LABEL". The interval runs to the next rhythm
// change or the end of the record.
struct RhythmInterval {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string label;
};

std::vector<RhythmInterval> rhythm_intervals(std::span<const ingest::Annotation> anns,
                                             std::size_t n_samples);

struct SegmentLabelConfig {
  double segment_seconds = 5.0;
  double positive_fraction = 0.5;  // threshold p on labeled-beat share
  std::string positive_label = "AFIB";
};

// One fixed-length window with a binary label (1 = positive rhythm).
struct LabeledSegment {
  std::size_t start = 0;  // sample range [start, end)
  std::size_t end = 0;
  int label = 0;
  std::size_t n_beats = 0;
  std::size_t n_positive_beats = 0;
};

struct SegmentCutStats {
  std::size_t n_kept = 0;
  std::size_t n_empty_discarded = 0;  // windows with no beats
  std::size_t n_trailing_dropped = 0;
};

// Cuts the record into non-overlapping windows of segment_seconds anchored
// at sample 0; the trailing partial window is dropped. A window is positive
// when at least positive_fraction of its beats fall inside a positive-label
// rhythm interval. Windows containing no beats are discarded (and counted).
std::vector<LabeledSegment> cut_rhythm_segments(
    double fs, std::size_t n_samples, std::span<const std::size_t> beats,
    std::span<const RhythmInterval> intervals, const SegmentLabelConfig& cfg,
    SegmentCutStats* stats = nullptr);

// ---- class balancing --------------------------------------------------------

// Random undersampling: every class is cut down to the size of the smallest
// one. Selection is seeded and the surviving examples keep their original
// relative order. Requires at least two classes.
std::vector<std::size_t> balance_undersample(std::span<const int> labels,
                                             std::uint64_t seed);

}  // namespace elp::labels
