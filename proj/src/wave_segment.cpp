#include "elp/wave_segment.hpp"

#include <algorithm>
#include <cmath>

#include "elp/common.hpp"
#include "elp/dsp.hpp"

namespace elp::wave {

namespace {

std::size_t ms_to_samples(double ms, double fs) {
  long long v = round_half_even_ll(ms * fs / 1000.0);
  return v < 0 ? 0 : static_cast<std::size_t>(v);
}

}  // namespace

const char* wave_kind_name(WaveKind k) {
  switch (k) {
    case WaveKind::kP: return "P";
    case WaveKind::kQrs: return "QRS";
    case WaveKind::kT: return "T";
  }
  return "?";
}

std::vector<Beat> segment_beats(std::size_t n_samples, double fs,
                                std::span<const std::size_t> peaks,
                                double pre_ms, double post_ms,
                                BeatSegmentStats* stats) {
  if (fs <= 0.0) throw Error("segment_beats: fs must be positive");
  const std::size_t pre = ms_to_samples(pre_ms, fs);
  const std::size_t post = ms_to_samples(post_ms, fs);

  BeatSegmentStats local;
  std::vector<Beat> out;
  for (std::size_t r : peaks) {
    if (r >= n_samples)
      throw Error("segment_beats: peak " + std::to_string(r) +
                  " outside record of " + std::to_string(n_samples) +
                  " samples");
    const std::size_t start = r >= pre ? r - pre : 0;
    const std::size_t end = std::min(n_samples, r + post);
    const std::size_t clipped_pre = pre - (r - start);
    const std::size_t clipped_post = post - (end - r);
    if (clipped_pre * 2 > pre || clipped_post * 2 > post) {
      ++local.n_dropped_clipped;
      continue;
    }
    Beat b;
    b.r_index = r;
    b.start = start;
    b.end = end;
    out.push_back(b);
    ++local.n_kept;
  }
  if (stats != nullptr) *stats = local;
  return out;
}

std::vector<double> canonicalize(std::span<const double> raw, std::size_t L,
                                 bool* degenerate) {
  if (raw.size() < 2)
    throw Error("canonicalize: need at least 2 samples, got " +
                std::to_string(raw.size()));
  if (L < 2) throw Error("canonicalize: L must be at least 2");
  std::vector<double> resampled = dsp::resample_to_length(raw, L);
  bool flat = dsp::is_flat(resampled);
  if (degenerate != nullptr) *degenerate = flat;
  return dsp::znorm(resampled);
}

std::vector<WaveSegment> extract_waves(std::span<const double> signal,
                                       double fs,
                                       std::span<const std::size_t> peaks,
                                       const WaveExtractConfig& cfg) {
  if (fs <= 0.0) throw Error("extract_waves: fs must be positive");
  if (peaks.size() < 2)
    throw Error("extract_waves: need at least 2 peaks for RR estimation");

  const std::size_t n = signal.size();
  const std::size_t qrs_half = ms_to_samples(cfg.qrs_half_ms, fs);
  const std::size_t min_len = ms_to_samples(cfg.min_wave_ms, fs);

  std::vector<WaveSegment> out;
  for (std::size_t bi = 0; bi < peaks.size(); ++bi) {
    const std::size_t r = peaks[bi];
    if (r >= n)
      throw Error("extract_waves: peak outside record");

    // Local RR in seconds: min of the adjacent intervals, capped. End beats
    // only have one neighbour.
    double rr = cfg.rr_cap_s;
    if (bi > 0)
      rr = std::min(rr, static_cast<double>(r - peaks[bi - 1]) / fs);
    if (bi + 1 < peaks.size())
      rr = std::min(rr, static_cast<double>(peaks[bi + 1] - r) / fs);

    const std::size_t p_reach =
        ms_to_samples(std::min(cfg.p_max_ms, cfg.p_rr_fraction * rr * 1000.0),
                      fs);
    const std::size_t t_reach =
        ms_to_samples(std::min(cfg.t_max_ms, cfg.t_rr_fraction * rr * 1000.0),
                      fs);

    // Boundary indices before clipping; slices are half-open.
    const std::size_t qrs_start = r >= qrs_half ? r - qrs_half : 0;
    const std::size_t qrs_end = std::min(n, r + qrs_half);
    const std::size_t p_start = r >= p_reach ? r - p_reach : 0;
    const std::size_t t_end = std::min(n, r + t_reach);

    struct Window {
      WaveKind kind;
      std::size_t start, end;
    };
    const Window windows[3] = {
        {WaveKind::kP, p_start, qrs_start},
        {WaveKind::kQrs, qrs_start, qrs_end},
        {WaveKind::kT, qrs_end, t_end},
    };

    for (const auto& w : windows) {
      WaveSegment seg;
      seg.kind = w.kind;
      seg.beat_ordinal = bi;
      seg.start = w.start;
      seg.end = std::max(w.start, w.end);
      const std::size_t len = seg.end - seg.start;
      if (len < std::max<std::size_t>(min_len, 2)) {
        seg.missing = true;
        out.push_back(std::move(seg));
        continue;
      }
      seg.raw.assign(signal.begin() + static_cast<std::ptrdiff_t>(seg.start),
                     signal.begin() + static_cast<std::ptrdiff_t>(seg.end));
      bool flat = false;
      auto canonical = canonicalize(seg.raw, cfg.canonical_len, &flat);
      if (flat) {
        // A flat window holds no wave.
        seg.missing = true;
        seg.raw.clear();
        out.push_back(std::move(seg));
        continue;
      }
      seg.canonical = std::move(canonical);
      out.push_back(std::move(seg));
    }
  }
  return out;
}

}  // namespace elp::wave
