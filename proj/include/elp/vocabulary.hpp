#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "elp/kmeans.hpp"
#include "elp/matrix.hpp"
#include "elp/wave_segment.hpp"

namespace elp::vocab {

// Reserved token ids: PAD = 0, wave ids 1..k, UNK = k+1.
constexpr int kPadId = 0;

struct WaveVocabulary {
  std::size_t k = 0;  // total cluster count
  std::size_t canonical_len = 64;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  std::uint64_t training_hash = 0;
  Matrix centroids;  // k x canonical_len; row i holds id i+1
  bool per_kind = false;
  // When per_kind, clusters are stacked P, QRS, T; these give each kind's
  // first row and row count.
  std::array<std::size_t, wave::kNumWaveKinds> kind_offset{};
  std::array<std::size_t, wave::kNumWaveKinds> kind_count{};

  int unk_id() const { return static_cast<int>(k) + 1; }
  std::size_t n_ids() const { return k + 2; }
  void validate() const;
};

// Clusters canonical waves into a shared vocabulary of k entries.
WaveVocabulary build_vocabulary(const Matrix& waves,
                                const cluster::KMeansConfig& cfg,
                                std::size_t canonical_len);

// Per-kind variant: waves of each kind are clustered separately into
// k_per_kind entries each, with disjoint id ranges stacked P, QRS, T.
WaveVocabulary build_vocabulary_per_kind(
    const std::array<Matrix, wave::kNumWaveKinds>& waves_by_kind,
    const cluster::KMeansConfig& cfg, std::size_t canonical_len);

// Nearest-centroid token id (lowest id wins ties). Flat waves map to UNK.
// When the vocabulary is per-kind the search is restricted to that kind's
// id range, so the kind must be given.
int assign_wave(const WaveVocabulary& vocabulary,
                std::span<const double> canonical, wave::WaveKind kind);

struct TokenSequence {
  std::string example_id;
  std::vector<int> tokens;  // length = max_len after pad/truncate
  std::size_t original_len = 0;
  int label = -1;
};

// Maps waves (temporal order, P < QRS < T within each beat) to token ids.
// MISSING and degenerate waves become UNK. The sequence is truncated from
// the end or right-padded with PAD to exactly max_len.
TokenSequence tokenize(std::span<const wave::WaveSegment> waves,
                       const WaveVocabulary& vocabulary, std::size_t max_len,
                       const std::string& example_id = "", int label = -1);

// Beat-as-token mode: one token per beat, from the QRS wave only.
TokenSequence tokenize_beats(std::span<const wave::WaveSegment> waves,
                             const WaveVocabulary& vocabulary,
                             std::size_t max_len,
                             const std::string& example_id = "",
                             int label = -1);

// <base>.json + <base>.bin, reusing the shared matrix layout. Round-trips
// bit-exactly.
void save_vocabulary(const std::string& base_path,
                     const WaveVocabulary& vocabulary);
WaveVocabulary load_vocabulary(const std::string& base_path);

// SVG gallery: one row per cluster showing up to max_samples member waves
// (first by row order) under the centroid. Deterministic output.
std::string render_cluster_gallery(const WaveVocabulary& vocabulary,
                                   const Matrix& waves,
                                   std::span<const std::size_t> assignment,
                                   std::size_t max_samples = 10);
void export_cluster_gallery(const WaveVocabulary& vocabulary,
                            const Matrix& waves,
                            std::span<const std::size_t> assignment,
                            const std::string& path,
                            std::size_t max_samples = 10);

}  // namespace elp::vocab
