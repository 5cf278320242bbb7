#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace elp::qrs {

struct RPeakList {
  std::vector<std::size_t> indices;  // strictly ascending
  std::vector<double> scores;        // peak value / decision threshold
};

// Stage constants of the classic detector. All durations in milliseconds.
struct PanTompkinsConfig {
  double band_low_hz = 5.0;
  double band_high_hz = 15.0;
  int filter_order = 2;
  double integration_ms = 150.0;
  double refractory_ms = 200.0;
  double twave_window_ms = 360.0;
  double searchback_factor = 1.66;
  double update_weight = 0.125;            // running estimate gain
  double searchback_update_weight = 0.25;  // gain for search-back hits
  double threshold_fraction = 0.25;        // THR1 position between NPK and SPK
  double thr2_fraction = 0.5;              // THR2 = fraction * THR1
  double init_seconds = 2.0;               // threshold seeding window
  double refine_ms = 40.0;                 // raw-signal peak refinement
};

// Locates R-peaks: bandpass -> derivative -> squaring -> moving-window
// integration -> adaptive dual thresholds with refractory, T-wave rejection
// and search-back, then refinement to the raw local maximum. Thresholds are
// ratio-based, so output is invariant to positive amplitude scaling.
RPeakList pan_tompkins(std::span<const double> signal, double fs,
                       const PanTompkinsConfig& cfg = {});

struct MatchCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

// Greedy nearest one-to-one matching of detected against reference peaks
// within the tolerance.
MatchCounts match_peaks(std::span<const std::size_t> detected,
                        std::span<const std::size_t> reference,
                        double tolerance_ms, double fs);

}  // namespace elp::qrs
