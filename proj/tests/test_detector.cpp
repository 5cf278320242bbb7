// R-peak detector behavior on synthesized traces with known beat positions,
// plus the peak-matching helper used to score it.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "elp/common.hpp"
#include "elp/pan_tompkins.hpp"
#include "elp/synth.hpp"

using namespace elp;
using namespace elp::qrs;

namespace {

synth::SynthRecord make_clean(double fs, double seconds, double bpm,
                              std::uint64_t seed, double snr_db) {
  synth::SynthSpec spec;
  spec.fs = fs;
  spec.duration_s = seconds;
  spec.bpm = bpm;
  spec.seed = seed;
  spec.snr_db = snr_db;
  return synth::generate(spec);
}

double hit_rate(const MatchCounts& m, bool precision) {
  const double denom = precision ? double(m.tp + m.fp) : double(m.tp + m.fn);
  return denom == 0 ? 0.0 : double(m.tp) / denom;
}

}  // namespace

TEST_CASE("an all-zero signal yields no peaks") {
  std::vector<double> zeros(3600, 0.0);
  const auto peaks = pan_tompkins(zeros, 360.0);
  CHECK(peaks.indices.empty());
  CHECK(peaks.scores.empty());
}

TEST_CASE("signals shorter than two seconds are rejected") {
  std::vector<double> brief(700, 0.0);  // 1.94s at 360 Hz
  CHECK_THROWS_AS(pan_tompkins(brief, 360.0), Error);
  CHECK_THROWS_AS(pan_tompkins(brief, 0.0), Error);
}

TEST_CASE("detector finds nearly all beats on a clean synthetic trace") {
  const auto rec = make_clean(360.0, 60.0, 75.0,
                              7, std::numeric_limits<double>::infinity());
  const auto peaks = pan_tompkins(rec.record.signal[0], rec.record.fs);
  const auto m = match_peaks(peaks.indices, rec.peaks, 50.0, rec.record.fs);
  CHECK(hit_rate(m, false) >= 0.99);
  CHECK(hit_rate(m, true) >= 0.97);
}

TEST_CASE("detector tolerates 10 dB of additive noise") {
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    const auto rec = make_clean(360.0, 60.0, 80.0, seed, 10.0);
    const auto peaks = pan_tompkins(rec.record.signal[0], rec.record.fs);
    const auto m = match_peaks(peaks.indices, rec.peaks, 50.0, rec.record.fs);
    CHECK(hit_rate(m, false) >= 0.99);
    CHECK(hit_rate(m, true) >= 0.97);
  }
}

TEST_CASE("output is exactly invariant to positive amplitude scaling") {
  const auto rec = make_clean(250.0, 30.0, 70.0, 9, 20.0);
  const auto& x = rec.record.signal[0];
  const auto base = pan_tompkins(x, rec.record.fs);
  REQUIRE_FALSE(base.indices.empty());
  for (double c : {0.5, 2.0, 10.0}) {
    std::vector<double> scaled(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) scaled[i] = c * x[i];
    const auto got = pan_tompkins(scaled, rec.record.fs);
    CHECK(got.indices == base.indices);
  }
}

TEST_CASE("detected peaks are ascending and respect the refractory gap") {
  const auto rec = make_clean(360.0, 60.0, 120.0, 21, 15.0);
  const auto peaks = pan_tompkins(rec.record.signal[0], rec.record.fs);
  REQUIRE(peaks.indices.size() >= 2);
  CHECK(peaks.indices.size() == peaks.scores.size());
  const std::size_t min_gap =
      static_cast<std::size_t>(0.200 * rec.record.fs) - 1;
  for (std::size_t i = 1; i < peaks.indices.size(); ++i) {
    CHECK(peaks.indices[i] > peaks.indices[i - 1]);
    CHECK(peaks.indices[i] - peaks.indices[i - 1] >= min_gap);
  }
}

TEST_CASE("refined peaks sit on raw local maxima") {
  const auto rec = make_clean(360.0, 40.0, 75.0, 33,
                              std::numeric_limits<double>::infinity());
  const auto& x = rec.record.signal[0];
  const auto peaks = pan_tompkins(x, rec.record.fs);
  REQUIRE_FALSE(peaks.indices.empty());
  for (auto p : peaks.indices) {
    if (p == 0 || p + 1 >= x.size()) continue;
    CHECK(x[p] >= x[p - 1]);
    CHECK(x[p] >= x[p + 1]);
  }
}

TEST_CASE("match_peaks pairs identical lists perfectly") {
  std::vector<std::size_t> ref = {100, 300, 500};
  const auto m = match_peaks(ref, ref, 50.0, 250.0);
  CHECK(m.tp == 3);
  CHECK(m.fp == 0);
  CHECK(m.fn == 0);
}

TEST_CASE("match_peaks respects the tolerance window") {
  // 50 ms at 250 Hz is 12.5 samples
  std::vector<std::size_t> ref = {100, 300};
  std::vector<std::size_t> det = {110, 320};
  const auto m = match_peaks(det, ref, 50.0, 250.0);
  CHECK(m.tp == 1);  // 10 within, 20 outside
  CHECK(m.fp == 1);
  CHECK(m.fn == 1);
}

TEST_CASE("match_peaks is one-to-one") {
  std::vector<std::size_t> ref = {100};
  std::vector<std::size_t> det = {95, 104};
  const auto m = match_peaks(det, ref, 50.0, 250.0);
  CHECK(m.tp == 1);
  CHECK(m.fp == 1);
  CHECK(m.fn == 0);
}

TEST_CASE("match_peaks prefers the nearest candidate") {
  std::vector<std::size_t> ref = {100, 112};
  std::vector<std::size_t> det = {111};
  const auto m = match_peaks(det, ref, 50.0, 250.0);
  CHECK(m.tp == 1);
  CHECK(m.fn == 1);
  CHECK(m.fp == 0);
}

TEST_CASE("match_peaks with empty inputs") {
  std::vector<std::size_t> ref = {100, 200};
  const auto none = match_peaks({}, ref, 50.0, 250.0);
  CHECK(none.tp == 0);
  CHECK(none.fn == 2);
  const auto spurious = match_peaks(ref, {}, 50.0, 250.0);
  CHECK(spurious.fp == 2);
}
