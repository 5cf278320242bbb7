#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace elp::wave {

// A heartbeat window around a detected R-peak. Sample ranges are stored as
// boundary indices; slicing is half-open [start, end).
struct Beat {
  std::size_t r_index = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::optional<int> label;
};

struct BeatSegmentStats {
  std::size_t n_kept = 0;
  std::size_t n_dropped_clipped = 0;
};

// Fixed windows of pre_ms/post_ms around each peak, clipped to the record.
// A beat whose pre or post side loses more than half its samples to
// clipping is dropped and counted.
std::vector<Beat> segment_beats(std::size_t n_samples, double fs,
                                std::span<const std::size_t> peaks,
                                double pre_ms = 250.0, double post_ms = 400.0,
                                BeatSegmentStats* stats = nullptr);

enum class WaveKind { kP = 0, kQrs = 1, kT = 2 };

constexpr std::size_t kNumWaveKinds = 3;

const char* wave_kind_name(WaveKind k);

// One P, QRS or T wave of one beat. MISSING waves (window too short after
// clipping, or flat) carry no samples and no canonical form.
struct WaveSegment {
  WaveKind kind = WaveKind::kQrs;
  std::size_t beat_ordinal = 0;
  std::size_t start = 0;  // [start, end) in record samples
  std::size_t end = 0;
  bool missing = false;
  std::vector<double> raw;        // mV, empty when missing
  std::vector<double> canonical;  // length L, empty when missing
  bool degenerate = false;        // canonical form was flat
};

struct WaveExtractConfig {
  double qrs_half_ms = 60.0;
  double p_max_ms = 200.0;   // cap on the P search window
  double p_rr_fraction = 0.35;
  double t_max_ms = 450.0;   // cap on the T search window
  double t_rr_fraction = 0.6;
  double rr_cap_s = 1.2;     // local RR is clamped to this
  double min_wave_ms = 20.0; // anything shorter after clipping is MISSING
  std::size_t canonical_len = 64;
};

// Adaptive searching windows around each peak, scaled by the local RR
// (min of both neighbours, capped). Per beat: QRS = [R-60ms, R+60ms],
// P = [R-min(200ms, 0.35*RR), R-60ms], T = [R+60ms, R+min(450ms, 0.6*RR)].
// Waves come out in P, QRS, T order for each beat. Needs at least 2 peaks.
std::vector<WaveSegment> extract_waves(std::span<const double> signal,
                                       double fs,
                                       std::span<const std::size_t> peaks,
                                       const WaveExtractConfig& cfg = {});

// Linear resample to exactly L points, then z-normalize. Flat input gives a
// zero vector and sets *degenerate. Needs at least 2 samples.
std::vector<double> canonicalize(std::span<const double> raw, std::size_t L,
                                 bool* degenerate = nullptr);

}  // namespace elp::wave
