#include "elp/pan_tompkins.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "elp/common.hpp"
#include "elp/dsp.hpp"

namespace elp::qrs {

namespace {

// Centered 5-point derivative, edges clamped.
std::vector<double> derivative(std::span<const double> x) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  auto at = [&](std::ptrdiff_t i) {
    return x[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, n - 1))];
  };
  std::vector<double> out(x.size());
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        (-at(i - 2) - 2.0 * at(i - 1) + 2.0 * at(i + 1) + at(i + 2)) / 8.0;
  return out;
}

// Centered moving average; partial edge windows average what is available.
std::vector<double> moving_average(std::span<const double> x,
                                   std::size_t half) {
  const std::size_t n = x.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t lo = i >= half ? i - half : 0;
    std::size_t hi = std::min(n - 1, i + half);
    out[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
  }
  return out;
}

struct Candidate {
  std::size_t index;
  double value;
};

// Local maxima; plateaus contribute their first sample.
std::vector<Candidate> local_maxima(std::span<const double> x, double floor) {
  std::vector<Candidate> out;
  for (std::size_t i = 1; i + 1 < x.size(); ++i)
    if (x[i] > x[i - 1] && x[i] >= x[i + 1] && x[i] > floor)
      out.push_back({i, x[i]});
  return out;
}

// Keeps a candidate only when it is the largest within +-radius (ties go to
// the earliest index). The integration stage rides each QRS on a plateau
// with micro-ripples; without suppression the plateau's left shoulder is
// accepted first and the refractory then blocks the true center.
std::vector<Candidate> suppress_within(const std::vector<Candidate>& cands,
                                       std::size_t radius) {
  auto better = [&](std::size_t a, std::size_t b) {
    if (cands[a].value != cands[b].value)
      return cands[a].value > cands[b].value;
    return cands[a].index < cands[b].index;
  };
  std::vector<Candidate> out;
  std::deque<std::size_t> window;  // ids of decreasing rank
  std::size_t next = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    while (next < cands.size() &&
           cands[next].index <= cands[i].index + radius) {
      while (!window.empty() && better(next, window.back()))
        window.pop_back();
      window.push_back(next);
      ++next;
    }
    while (cands[window.front()].index + radius < cands[i].index)
      window.pop_front();
    if (window.front() == i) out.push_back(cands[i]);
  }
  return out;
}

double max_abs_in(std::span<const double> x, std::size_t center,
                  std::size_t half) {
  std::size_t lo = center >= half ? center - half : 0;
  std::size_t hi = std::min(x.size() - 1, center + half);
  double m = 0.0;
  for (std::size_t i = lo; i <= hi; ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

}  // namespace

RPeakList pan_tompkins(std::span<const double> signal, double fs,
                       const PanTompkinsConfig& cfg) {
  if (fs < 100.0)
    throw Error("pan_tompkins: fs must be at least 100 Hz, got " +
                std::to_string(fs));
  const auto min_len = static_cast<std::size_t>(std::ceil(2.0 * fs));
  if (signal.size() < min_len)
    throw Error("pan_tompkins: signal shorter than 2 s (" +
                std::to_string(signal.size()) + " samples at " +
                std::to_string(fs) + " Hz)");

  auto ms_to_samples = [&](double ms) {
    return static_cast<std::size_t>(
        std::max(1ll, round_half_even_ll(ms * fs / 1000.0)));
  };

  // Stage chain. The bandpass runs zero-phase and derivative/integration are
  // centered, so the integrated peak stays aligned with the QRS.
  dsp::FilterSpec band;
  band.kind = dsp::FilterKind::kBandpass;
  band.low_hz = cfg.band_low_hz;
  band.high_hz = cfg.band_high_hz;
  band.order = cfg.filter_order;
  std::vector<double> filtered = dsp::bandpass(signal, fs, band);
  std::vector<double> deriv = derivative(filtered);
  std::vector<double> squared(deriv.size());
  for (std::size_t i = 0; i < deriv.size(); ++i)
    squared[i] = deriv[i] * deriv[i];
  const std::size_t mwi_win = ms_to_samples(cfg.integration_ms);
  std::vector<double> mwi = moving_average(squared, mwi_win / 2);

  double global_max = 0.0;
  for (double v : mwi) global_max = std::max(global_max, v);
  if (!(global_max > 0.0) || !std::isfinite(global_max)) return {};

  // Candidates below a tiny fraction of the strongest peak are numeric
  // residue (e.g. a constant input after filtering), not waves.
  auto candidates = local_maxima(mwi, 1e-9 * global_max);
  if (candidates.empty()) return {};

  const std::size_t refractory = ms_to_samples(cfg.refractory_ms);
  candidates = suppress_within(candidates, refractory);
  const std::size_t twave_win = ms_to_samples(cfg.twave_window_ms);
  const std::size_t slope_half = ms_to_samples(75.0);
  const std::size_t init_n =
      std::min(mwi.size(), static_cast<std::size_t>(
                               round_half_even_ll(cfg.init_seconds * fs)));

  double init_max = 0.0, init_sum = 0.0;
  for (std::size_t i = 0; i < init_n; ++i) {
    init_max = std::max(init_max, mwi[i]);
    init_sum += mwi[i];
  }
  double spk = 0.25 * init_max;
  double npk = 0.5 * (init_sum / static_cast<double>(init_n));
  if (npk >= spk) npk = 0.5 * spk;

  std::vector<std::size_t> accepted;
  std::vector<double> scores;
  std::vector<double> rr_history;
  std::vector<std::size_t> rejected_since_last;  // candidate ids for search-back

  auto rr_average = [&]() {
    if (rr_history.empty()) return 0.0;
    std::size_t n = std::min<std::size_t>(8, rr_history.size());
    double s = 0.0;
    for (std::size_t i = rr_history.size() - n; i < rr_history.size(); ++i)
      s += rr_history[i];
    return s / static_cast<double>(n);
  };

  auto accept = [&](std::size_t cand_id, double threshold, double weight) {
    const auto& c = candidates[cand_id];
    if (!accepted.empty())
      rr_history.push_back(static_cast<double>(c.index - accepted.back()));
    accepted.push_back(c.index);
    scores.push_back(threshold > 0.0 ? c.value / threshold : 0.0);
    spk = weight * c.value + (1.0 - weight) * spk;
    rejected_since_last.clear();
  };

  for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
    const auto& c = candidates[ci];
    const double thr1 = npk + cfg.threshold_fraction * (spk - npk);
    const double thr2 = cfg.thr2_fraction * thr1;

    // Search-back: a long gap without an accepted peak means the threshold
    // missed one; re-examine rejected candidates against THR2.
    const double rr_avg = rr_average();
    if (!accepted.empty() && rr_avg > 0.0 &&
        static_cast<double>(c.index - accepted.back()) >
            cfg.searchback_factor * rr_avg &&
        !rejected_since_last.empty()) {
      std::size_t best = SIZE_MAX;
      for (std::size_t id : rejected_since_last) {
        const auto& r = candidates[id];
        if (r.index - accepted.back() < refractory) continue;
        if (r.value < thr2) continue;
        if (best == SIZE_MAX || r.value > candidates[best].value) best = id;
      }
      if (best != SIZE_MAX)
        accept(best, thr2, cfg.searchback_update_weight);
    }

    if (!accepted.empty() && c.index - accepted.back() < refractory) continue;

    bool is_signal = c.value >= thr1;
    if (is_signal && !accepted.empty() &&
        c.index - accepted.back() < twave_win) {
      // Likely a T-wave if its maximal slope is under half the previous
      // QRS slope.
      double cand_slope = max_abs_in(deriv, c.index, slope_half);
      double prev_slope = max_abs_in(deriv, accepted.back(), slope_half);
      if (cand_slope < 0.5 * prev_slope) is_signal = false;
    }

    if (is_signal) {
      accept(ci, thr1, cfg.update_weight);
    } else {
      npk = cfg.update_weight * c.value + (1.0 - cfg.update_weight) * npk;
      rejected_since_last.push_back(ci);
    }
  }

  // Refine to the raw-signal maximum nearby, then re-impose the refractory
  // spacing (refinement can pull neighbours together).
  const std::size_t refine_half = ms_to_samples(cfg.refine_ms);
  RPeakList out;
  for (std::size_t k = 0; k < accepted.size(); ++k) {
    std::size_t p = accepted[k];
    std::size_t lo = p >= refine_half ? p - refine_half : 0;
    std::size_t hi = std::min(signal.size() - 1, p + refine_half);
    std::size_t best = lo;
    for (std::size_t i = lo + 1; i <= hi; ++i)
      if (signal[i] > signal[best]) best = i;

    if (!out.indices.empty() && best <= out.indices.back() + refractory - 1) {
      if (signal[best] > signal[out.indices.back()]) {
        out.indices.back() = best;
        out.scores.back() = scores[k];
      }
      continue;
    }
    out.indices.push_back(best);
    out.scores.push_back(scores[k]);
  }
  return out;
}

MatchCounts match_peaks(std::span<const std::size_t> detected,
                        std::span<const std::size_t> reference,
                        double tolerance_ms, double fs) {
  if (fs <= 0.0) throw Error("match_peaks: fs must be positive");
  const double tol = tolerance_ms * fs / 1000.0;

  struct Pair {
    double dist;
    std::size_t di, ri;
  };
  std::vector<Pair> pairs;
  std::size_t lo = 0;
  for (std::size_t di = 0; di < detected.size(); ++di) {
    const double d = static_cast<double>(detected[di]);
    while (lo < reference.size() &&
           static_cast<double>(reference[lo]) < d - tol)
      ++lo;
    for (std::size_t ri = lo; ri < reference.size(); ++ri) {
      const double r = static_cast<double>(reference[ri]);
      if (r > d + tol) break;
      pairs.push_back({std::abs(r - d), di, ri});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.di != b.di) return a.di < b.di;
    return a.ri < b.ri;
  });

  std::vector<bool> d_used(detected.size(), false);
  std::vector<bool> r_used(reference.size(), false);
  MatchCounts counts;
  for (const auto& p : pairs) {
    if (d_used[p.di] || r_used[p.ri]) continue;
    d_used[p.di] = true;
    r_used[p.ri] = true;
    ++counts.tp;
  }
  counts.fp = detected.size() - counts.tp;
  counts.fn = reference.size() - counts.tp;
  return counts;
}

}  // namespace elp::qrs
