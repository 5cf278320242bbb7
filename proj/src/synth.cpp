#include "elp/synth.hpp"

#include <algorithm>
#include <cmath>

#include "elp/common.hpp"

namespace elp::synth {

namespace {

constexpr double kMarginS = 0.4;
constexpr double kPeakSearchS = 0.040;

// Symbols attached as beat annotations, by class index.
constexpr char kClassSymbols[] = {'N', 'V', 'A', 'F', 'Q',
                                  'L', 'R', 'E', 'J', 'S'};

void add_bump(std::vector<double>& x, double fs, double center_s,
              const WaveShape& w, double sign = 1.0) {
  if (w.amplitude_mv == 0.0) return;
  const double mu = center_s + w.offset_ms / 1000.0;
  const double sigma = w.width_ms / 1000.0;
  // 5 sigma covers the bump to ~1e-6 of its amplitude.
  const long long lo = std::max(
      0LL, static_cast<long long>(std::floor((mu - 5.0 * sigma) * fs)));
  const long long hi =
      std::min(static_cast<long long>(x.size()) - 1,
               static_cast<long long>(std::ceil((mu + 5.0 * sigma) * fs)));
  for (long long i = lo; i <= hi; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double z = (t - mu) / sigma;
    x[static_cast<std::size_t>(i)] +=
        sign * w.amplitude_mv * std::exp(-0.5 * z * z);
  }
}

}  // namespace

void SynthSpec::validate() const {
  if (!(fs > 0.0)) throw Error("synth: fs must be positive");
  if (!(duration_s >= 2.0)) throw Error("synth: duration must be >= 2 s");
  if (!(bpm >= 30.0 && bpm <= 240.0))
    throw Error("synth: bpm must be in [30, 240]");
  if (!(rr_jitter >= 0.0 && rr_jitter < 1.0))
    throw Error("synth: rr_jitter must be in [0, 1)");
  if (classes.empty()) throw Error("synth: need at least one beat class");
  if (std::isnan(snr_db)) throw Error("synth: snr_db must not be NaN");
  for (const auto& c : classes) {
    if (!(c.p.width_ms > 0.0 && c.qrs.width_ms > 0.0 && c.t.width_ms > 0.0))
      throw Error("synth: wave widths must be positive");
  }
}

SynthRecord generate(const SynthSpec& spec) {
  spec.validate();

  const std::size_t n =
      static_cast<std::size_t>(std::llround(spec.duration_s * spec.fs));
  std::vector<double> clean(n, 0.0);

  Rng base = make_rng(spec.seed);
  Rng schedule = base.child(1);
  Rng noise_rng = base.child(2);

  const double mean_rr = 60.0 / spec.bpm;
  std::vector<double> centers;
  std::vector<int> classes;
  double t = kMarginS;
  while (t <= spec.duration_s - kMarginS + 1e-12) {
    centers.push_back(t);
    classes.push_back(
        spec.classes.size() > 1
            ? static_cast<int>(schedule.uniform_int(spec.classes.size()))
            : 0);
    double factor = 1.0 + spec.rr_jitter * schedule.normal();
    factor = std::max(factor, 0.3);
    t += mean_rr * factor;
  }

  for (std::size_t b = 0; b < centers.size(); ++b) {
    const BeatShape& shape = spec.classes[static_cast<std::size_t>(classes[b])];
    add_bump(clean, spec.fs, centers[b], shape.p);
    add_bump(clean, spec.fs, centers[b], shape.qrs);
    if (shape.biphasic_qrs) {
      WaveShape lobe = shape.qrs;
      lobe.offset_ms += 1.8 * shape.qrs.width_ms;
      add_bump(clean, spec.fs, centers[b], lobe, -0.7);
    }
    add_bump(clean, spec.fs, centers[b], shape.t);
  }

  SynthRecord out;
  const long long search = std::llround(kPeakSearchS * spec.fs);
  for (std::size_t b = 0; b < centers.size(); ++b) {
    const BeatShape& shape = spec.classes[static_cast<std::size_t>(classes[b])];
    if (shape.qrs.amplitude_mv == 0.0) continue;
    const double sign = shape.qrs.amplitude_mv > 0.0 ? 1.0 : -1.0;
    const long long center = std::llround(centers[b] * spec.fs);
    const long long lo = std::max(0LL, center - search);
    const long long hi =
        std::min(static_cast<long long>(n) - 1, center + search);
    long long best = lo;
    for (long long i = lo + 1; i <= hi; ++i)
      if (sign * clean[static_cast<std::size_t>(i)] >
          sign * clean[static_cast<std::size_t>(best)])
        best = i;
    out.peaks.push_back(static_cast<std::size_t>(best));
    out.beat_classes.push_back(classes[b]);
  }

  std::vector<double> signal = clean;
  if (std::isfinite(spec.snr_db)) {
    double sq = 0.0;
    for (double v : clean) sq += v * v;
    const double rms = std::sqrt(sq / static_cast<double>(n));
    const double noise_std = rms / std::pow(10.0, spec.snr_db / 20.0);
    for (double& v : signal) v += noise_std * noise_rng.normal();
  }

  ingest::EcgRecord& rec = out.record;
  rec.record_id = spec.record_id;
  rec.fs = spec.fs;
  ingest::ChannelInfo ch;
  ch.name = "synth";
  rec.channels.push_back(ch);
  rec.signal.push_back(std::move(signal));
  for (std::size_t b = 0; b < out.peaks.size(); ++b) {
    ingest::Annotation ann;
    ann.sample_index = out.peaks[b];
    const int cls = out.beat_classes[b];
    ann.symbol = cls < static_cast<int>(sizeof(kClassSymbols))
                     ? kClassSymbols[cls]
                     : 'Q';
    rec.annotations.push_back(ann);
  }
  rec.validate();
  return out;
}

}  // namespace elp::synth
