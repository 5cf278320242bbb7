#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "elp/record.hpp"

namespace elp::synth {

// One Gaussian bump: amplitude_mv * exp(-0.5 * ((t - offset)/width)^2),
// offset relative to the beat center, offset/width in milliseconds.
struct WaveShape {
  double amplitude_mv = 0.0;
  double offset_ms = 0.0;
  double width_ms = 1.0;
};

struct BeatShape {
  WaveShape p{0.15, -160.0, 25.0};
  WaveShape qrs{1.0, 0.0, 10.0};
  WaveShape t{0.35, 280.0, 60.0};
  bool biphasic_qrs = false;  // adds an opposite lobe trailing the main QRS
};

struct SynthSpec {
  double fs = 360.0;
  double duration_s = 60.0;
  double bpm = 75.0;
  double rr_jitter = 0.05;  // RR deviation std as a fraction of the mean RR
  std::vector<BeatShape> classes{BeatShape{}};
  double snr_db = std::numeric_limits<double>::infinity();  // inf = clean
  std::uint64_t seed = 1;
  std::string record_id = "synth";

  void validate() const;
};

struct SynthRecord {
  ingest::EcgRecord record;
  std::vector<std::size_t> peaks;  // ground-truth R sample indices
  std::vector<int> beat_classes;   // class index per peak
};

// Deterministic per seed. Beats are scheduled at jittered RR intervals inside
// a 0.4 s margin on both ends; each beat picks a class (uniform when several
// are given) and sums its three bumps into the clean trace. White noise is
// added at snr_db relative to the clean RMS. Ground-truth peaks are the clean
// extrema within +-40 ms of each nominal beat center.
SynthRecord generate(const SynthSpec& spec);

}  // namespace elp::synth
