#include "elp/labels.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "elp/common.hpp"

namespace elp::labels {

namespace {

constexpr const char* kClassNames[kNumAamiClasses] = {"N", "S", "V", "F", "Q"};

struct SymbolGroup {
  const char* symbols;
  AamiClass cls;
};

constexpr SymbolGroup kGroups[] = {
    {"NLRej", AamiClass::kN},
    {"AaJS", AamiClass::kS},
    {"VE", AamiClass::kV},
    {"F", AamiClass::kF},
    {"/fQ", AamiClass::kQ},
};

}  // namespace

const char* aami_class_name(AamiClass c) {
  return kClassNames[static_cast<std::size_t>(c)];
}

std::optional<AamiClass> aami_class_of(char symbol) {
  for (const auto& g : kGroups)
    for (const char* p = g.symbols; *p; ++p)
      if (*p == symbol) return g.cls;
  return std::nullopt;
}

bool is_beat_symbol(char symbol) { return aami_class_of(symbol).has_value(); }

std::vector<std::optional<char>> match_beat_labels(
    std::span<const std::size_t> peaks, std::span<const ingest::Annotation> anns,
    double fs, double tolerance_s) {
  if (fs <= 0.0) throw Error("match_beat_labels: fs must be positive");
  const double tol = tolerance_s * fs;

  // Beat annotations only, in sample order (annotations are already sorted).
  std::vector<const ingest::Annotation*> beats;
  for (const auto& a : anns)
    if (is_beat_symbol(a.symbol)) beats.push_back(&a);

  std::vector<std::optional<char>> out(peaks.size());
  std::vector<bool> used(beats.size(), false);
  std::size_t lo = 0;
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    const double p = static_cast<double>(peaks[i]);
    while (lo < beats.size() &&
           static_cast<double>(beats[lo]->sample_index) < p - tol)
      ++lo;
    std::size_t best = beats.size();
    double best_dist = tol;
    for (std::size_t j = lo; j < beats.size(); ++j) {
      const double d =
          std::abs(static_cast<double>(beats[j]->sample_index) - p);
      if (static_cast<double>(beats[j]->sample_index) > p + tol) break;
      if (!used[j] && d <= best_dist) {
        best_dist = d;
        best = j;
      }
    }
    if (best < beats.size()) {
      used[best] = true;
      out[i] = beats[best]->symbol;
    }
  }
  return out;
}

std::vector<RhythmInterval> rhythm_intervals(std::span<const ingest::Annotation> anns,
                                             std::size_t n_samples) {
  std::vector<RhythmInterval> out;
  for (const auto& a : anns) {
    if (a.symbol != '+') continue;
    std::string label = a.aux;
    if (!label.empty() && label[0] == '(') label.erase(0, 1);
    if (!out.empty()) out.back().end = a.sample_index;
    RhythmInterval iv;
    iv.start = a.sample_index;
    iv.end = n_samples;
    iv.label = label;
    out.push_back(std::move(iv));
  }
  return out;
}

std::vector<LabeledSegment> cut_rhythm_segments(
    double fs, std::size_t n_samples, std::span<const std::size_t> beats,
    std::span<const RhythmInterval> intervals, const SegmentLabelConfig& cfg,
    SegmentCutStats* stats) {
  if (fs <= 0.0) throw Error("cut_rhythm_segments: fs must be positive");
  if (cfg.segment_seconds <= 0.0)
    throw Error("cut_rhythm_segments: segment length must be positive");
  if (cfg.positive_fraction < 0.0 || cfg.positive_fraction > 1.0)
    throw Error("cut_rhythm_segments: positive fraction must be in [0, 1]");

  const auto seg_len =
      static_cast<std::size_t>(round_half_even_ll(cfg.segment_seconds * fs));
  if (seg_len == 0) throw Error("cut_rhythm_segments: segment too short");

  auto beat_positive = [&](std::size_t beat) {
    for (const auto& iv : intervals)
      if (beat >= iv.start && beat < iv.end) return iv.label == cfg.positive_label;
    return false;
  };

  SegmentCutStats local;
  const std::size_t n_windows = n_samples / seg_len;
  local.n_trailing_dropped = n_samples % seg_len != 0 ? 1 : 0;

  std::vector<LabeledSegment> out;
  std::size_t bi = 0;
  for (std::size_t w = 0; w < n_windows; ++w) {
    LabeledSegment seg;
    seg.start = w * seg_len;
    seg.end = seg.start + seg_len;
    while (bi < beats.size() && beats[bi] < seg.start) ++bi;
    for (std::size_t j = bi; j < beats.size() && beats[j] < seg.end; ++j) {
      ++seg.n_beats;
      if (beat_positive(beats[j])) ++seg.n_positive_beats;
    }
    if (seg.n_beats == 0) {
      ++local.n_empty_discarded;
      continue;
    }
    const double share = static_cast<double>(seg.n_positive_beats) /
                         static_cast<double>(seg.n_beats);
    seg.label = share >= cfg.positive_fraction ? 1 : 0;
    ++local.n_kept;
    out.push_back(seg);
  }
  if (stats != nullptr) *stats = local;
  return out;
}

std::vector<std::size_t> balance_undersample(std::span<const int> labels,
                                             std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[labels[i]].push_back(i);
  if (by_class.size() < 2)
    throw Error("balance_undersample: need at least two classes, got " +
                std::to_string(by_class.size()));

  std::size_t target = SIZE_MAX;
  for (const auto& [cls, idx] : by_class)
    target = std::min(target, idx.size());

  Rng rng = make_rng(seed);
  std::vector<std::size_t> keep;
  for (auto& [cls, idx] : by_class) {
    Rng class_rng = rng.child(static_cast<std::uint64_t>(cls) + 1);
    std::vector<std::size_t> pool = idx;
    class_rng.shuffle(pool);
    pool.resize(target);
    keep.insert(keep.end(), pool.begin(), pool.end());
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

}  // namespace elp::labels
