// Beat-class mapping, annotation matching and rhythm windowing. The window
// labeling rule is checked exhaustively against a brute-force restatement.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "elp/common.hpp"
#include "elp/labels.hpp"
#include "elp/record.hpp"

using namespace elp;
using namespace elp::labels;
using elp::ingest::Annotation;

TEST_CASE("aami class map covers the MIT beat symbols") {
  const std::string n_group = "NLRej";
  const std::string s_group = "AaJS";
  const std::string v_group = "VE";
  const std::string q_group = "/fQ";
  for (char s : n_group) CHECK(aami_class_of(s) == AamiClass::kN);
  for (char s : s_group) CHECK(aami_class_of(s) == AamiClass::kS);
  for (char s : v_group) CHECK(aami_class_of(s) == AamiClass::kV);
  CHECK(aami_class_of('F') == AamiClass::kF);
  for (char s : q_group) CHECK(aami_class_of(s) == AamiClass::kQ);

  // non-beat annotations map to nothing
  for (char s : std::string("+~|\"x")) {
    CHECK_FALSE(aami_class_of(s).has_value());
    CHECK_FALSE(is_beat_symbol(s));
  }
  for (char s : n_group + s_group + v_group + "F" + q_group) {
    CHECK(is_beat_symbol(s));
  }
}

TEST_CASE("aami class names") {
  CHECK(std::string(aami_class_name(AamiClass::kN)) == "N");
  CHECK(std::string(aami_class_name(AamiClass::kS)) == "S");
  CHECK(std::string(aami_class_name(AamiClass::kV)) == "V");
  CHECK(std::string(aami_class_name(AamiClass::kF)) == "F");
  CHECK(std::string(aami_class_name(AamiClass::kQ)) == "Q");
}

TEST_CASE("match_beat_labels takes the nearest annotation within tolerance") {
  // fs = 100, tolerance 0.15s = 15 samples
  std::vector<Annotation> anns = {
      {100, 'N', ""}, {200, 'V', ""}, {205, '+', "(AFIB"}, {300, 'A', ""}};
  std::vector<std::size_t> peaks = {104, 212, 340, 500};
  const auto labels = match_beat_labels(peaks, anns, 100.0);
  REQUIRE(labels.size() == 4);
  CHECK(labels[0] == 'N');
  CHECK(labels[1] == 'V');   // the '+' at 205 is not a beat
  CHECK_FALSE(labels[2].has_value());  // 40 samples away, outside tolerance
  CHECK_FALSE(labels[3].has_value());
}

TEST_CASE("match_beat_labels uses each annotation at most once") {
  std::vector<Annotation> anns = {{100, 'N', ""}};
  std::vector<std::size_t> peaks = {98, 101};
  const auto labels = match_beat_labels(peaks, anns, 100.0);
  const int matched = int(labels[0].has_value()) + int(labels[1].has_value());
  CHECK(matched == 1);
  CHECK(labels[0] == 'N');  // peaks claim annotations in order
  CHECK_FALSE(labels[1].has_value());
}

TEST_CASE("rhythm intervals follow '+' aux strings to the record end") {
  std::vector<Annotation> anns = {
      {0, '+', "(N"}, {40, 'N', ""}, {100, '+', "(AFIB"}, {150, 'V', ""},
      {240, '+', "(N"}};
  const auto intervals = rhythm_intervals(anns, 400);
  REQUIRE(intervals.size() == 3);
  CHECK(intervals[0].start == 0);
  CHECK(intervals[0].end == 100);
  CHECK(intervals[0].label == "N");
  CHECK(intervals[1].start == 100);
  CHECK(intervals[1].end == 240);
  CHECK(intervals[1].label == "AFIB");
  CHECK(intervals[2].start == 240);
  CHECK(intervals[2].end == 400);
  CHECK(intervals[2].label == "N");
}

TEST_CASE("rhythm intervals before the first marker carry no label") {
  std::vector<Annotation> anns = {{100, '+', "(AFIB"}};
  const auto intervals = rhythm_intervals(anns, 200);
  REQUIRE(intervals.size() == 1);
  CHECK(intervals[0].start == 100);
  CHECK(intervals[0].end == 200);
  CHECK(rhythm_intervals({}, 200).empty());
}

namespace {

bool in_positive(const std::vector<RhythmInterval>& intervals,
                 std::size_t sample, const std::string& positive) {
  for (const auto& iv : intervals) {
    if (sample >= iv.start && sample < iv.end) return iv.label == positive;
  }
  return false;
}

}  // namespace

TEST_CASE("cut_rhythm_segments windows, labels and discards") {
  // fs = 10, 5s windows -> 50 samples each; 175 samples -> 3 windows + tail
  const double fs = 10.0;
  std::vector<RhythmInterval> intervals = {{0, 60, "N"}, {60, 175, "AFIB"}};
  std::vector<std::size_t> beats = {5, 20, 45,    // window 0: 0/3 positive
                                    55, 70, 95,   // window 1: 2/3 positive
                                    140, 149};    // window 2: 2/2 positive
  SegmentLabelConfig cfg;
  SegmentCutStats stats;
  const auto segs = cut_rhythm_segments(fs, 175, beats, intervals, cfg, &stats);
  REQUIRE(segs.size() == 3);
  CHECK(segs[0].start == 0);
  CHECK(segs[0].end == 50);
  CHECK(segs[0].label == 0);
  CHECK(segs[0].n_beats == 3);
  CHECK(segs[1].label == 1);  // 2/3 >= 0.5
  CHECK(segs[1].n_positive_beats == 2);
  CHECK(segs[2].label == 1);
  CHECK(stats.n_kept == 3);
  CHECK(stats.n_empty_discarded == 0);
  CHECK(stats.n_trailing_dropped == 1);
}

TEST_CASE("windows with no beats are discarded and counted") {
  const double fs = 10.0;
  std::vector<RhythmInterval> intervals = {{0, 200, "N"}};
  std::vector<std::size_t> beats = {5, 160};
  SegmentLabelConfig cfg;
  SegmentCutStats stats;
  const auto segs = cut_rhythm_segments(fs, 200, beats, intervals, cfg, &stats);
  REQUIRE(segs.size() == 2);  // windows 1 and 2 are empty
  CHECK(segs[0].start == 0);
  CHECK(segs[1].start == 150);
  CHECK(stats.n_kept == 2);
  CHECK(stats.n_empty_discarded == 2);
}

TEST_CASE("window label rule matches brute force over all small cases") {
  // Exhaustive: every beat count up to 10, every positive count up to that,
  // compared against the direct restatement  positive/total >= p.
  const double fs = 100.0;
  const std::size_t win = 500;  // 5s
  for (double p : {0.25, 0.5, 0.75, 1.0}) {
    SegmentLabelConfig cfg;
    cfg.positive_fraction = p;
    for (std::size_t total = 1; total <= 10; ++total) {
      for (std::size_t pos = 0; pos <= total; ++pos) {
        // lay out `total` beats inside one window, the first `pos` of them
        // inside an AFIB interval
        std::vector<std::size_t> beats;
        for (std::size_t b = 0; b < total; ++b) beats.push_back(10 + b * 20);
        const std::size_t split = pos == 0 ? 0 : beats[pos - 1] + 1;
        std::vector<RhythmInterval> intervals;
        if (split > 0) intervals.push_back({0, split, "AFIB"});
        intervals.push_back({split, win, "N"});

        const auto segs =
            cut_rhythm_segments(fs, win, beats, intervals, cfg, nullptr);
        REQUIRE(segs.size() == 1);
        CHECK(segs[0].n_beats == total);
        CHECK(segs[0].n_positive_beats == pos);

        std::size_t brute_pos = 0;
        for (auto b : beats) {
          if (in_positive(intervals, b, cfg.positive_label)) ++brute_pos;
        }
        REQUIRE(brute_pos == pos);
        const int expected =
            (double(brute_pos) / double(total) >= p) ? 1 : 0;
        CHECK(segs[0].label == expected);
      }
    }
  }
}

TEST_CASE("balance_undersample equalizes class counts deterministically") {
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) labels.push_back(0);
  for (int i = 0; i < 7; ++i) labels.push_back(1);
  for (int i = 0; i < 12; ++i) labels.push_back(2);

  const auto keep = balance_undersample(labels, 42);
  CHECK(keep.size() == 21);
  std::map<int, std::size_t> counts;
  for (auto i : keep) counts[labels[i]]++;
  CHECK(counts[0] == 7);
  CHECK(counts[1] == 7);
  CHECK(counts[2] == 7);
  CHECK(std::is_sorted(keep.begin(), keep.end()));

  const auto again = balance_undersample(labels, 42);
  CHECK(again == keep);
  const auto other = balance_undersample(labels, 43);
  CHECK(other != keep);  // 30-choose-7 leaves essentially no collision room
}

TEST_CASE("balance_undersample keeps already balanced data whole") {
  std::vector<int> labels = {0, 1, 0, 1, 0, 1};
  const auto keep = balance_undersample(labels, 1);
  CHECK(keep.size() == 6);
}

TEST_CASE("balance_undersample needs two classes") {
  std::vector<int> one = {0, 0, 0};
  CHECK_THROWS_AS(balance_undersample(one, 1), Error);
  CHECK_THROWS_AS(balance_undersample({}, 1), Error);
}
