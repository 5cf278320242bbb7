#include "elp/vocabulary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "elp/dsp.hpp"

namespace elp::vocab {

namespace {

std::uint64_t hash_training(const Matrix& waves,
                            const cluster::KMeansConfig& cfg) {
  std::uint64_t h = fnv1a(waves.data.data(), waves.data.size() * sizeof(double));
  h = fnv1a(&cfg.k, sizeof(cfg.k), h);
  h = fnv1a(&cfg.seed, sizeof(cfg.seed), h);
  return h;
}

void check_waves(const Matrix& waves, std::size_t canonical_len) {
  if (waves.cols != canonical_len)
    throw Error("vocabulary: waves have " + std::to_string(waves.cols) +
                " columns, expected " + std::to_string(canonical_len));
}

// Nearest centroid within rows [offset, offset + count).
int nearest_in_range(const Matrix& centroids, std::span<const double> wave,
                     std::size_t offset, std::size_t count) {
  std::size_t best = offset;
  double best_d = cluster::squared_distance(centroids.row(offset), wave);
  for (std::size_t c = offset + 1; c < offset + count; ++c) {
    double d = cluster::squared_distance(centroids.row(c), wave);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return static_cast<int>(best) + 1;  // ids are row + 1
}

void append_fixed(std::string* out, const char* fmt, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), fmt, v);
  *out += buf;
}

}  // namespace

void WaveVocabulary::validate() const {
  if (k < 2) throw Error("vocabulary: k must be at least 2");
  if (centroids.rows != k || centroids.cols != canonical_len)
    throw Error("vocabulary: centroid matrix shape mismatch");
  for (double v : centroids.data)
    if (!std::isfinite(v)) throw Error("vocabulary: non-finite centroid");
  if (per_kind) {
    std::size_t total = 0;
    for (std::size_t i = 0; i < wave::kNumWaveKinds; ++i) {
      if (kind_offset[i] != total)
        throw Error("vocabulary: kind ranges must be contiguous");
      total += kind_count[i];
      if (kind_count[i] < 2)
        throw Error("vocabulary: each kind needs at least 2 clusters");
    }
    if (total != k) throw Error("vocabulary: kind counts do not sum to k");
  }
}

WaveVocabulary build_vocabulary(const Matrix& waves,
                                const cluster::KMeansConfig& cfg,
                                std::size_t canonical_len) {
  check_waves(waves, canonical_len);
  auto fit = cluster::kmeans_fit(waves, cfg);
  WaveVocabulary v;
  v.k = cfg.k;
  v.canonical_len = canonical_len;
  v.seed = cfg.seed;
  v.training_hash = hash_training(waves, cfg);
  v.centroids = std::move(fit.centroids);
  v.validate();
  return v;
}

WaveVocabulary build_vocabulary_per_kind(
    const std::array<Matrix, wave::kNumWaveKinds>& waves_by_kind,
    const cluster::KMeansConfig& cfg, std::size_t canonical_len) {
  WaveVocabulary v;
  v.canonical_len = canonical_len;
  v.seed = cfg.seed;
  v.per_kind = true;
  v.centroids = Matrix(cfg.k * wave::kNumWaveKinds, canonical_len);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t kind = 0; kind < wave::kNumWaveKinds; ++kind) {
    const Matrix& waves = waves_by_kind[kind];
    check_waves(waves, canonical_len);
    cluster::KMeansConfig kind_cfg = cfg;
    kind_cfg.seed = make_rng(cfg.seed).child(kind + 1).next_u64();
    auto fit = cluster::kmeans_fit(waves, kind_cfg);
    v.kind_offset[kind] = kind * cfg.k;
    v.kind_count[kind] = cfg.k;
    for (std::size_t r = 0; r < cfg.k; ++r)
      std::copy_n(fit.centroids.row(r).begin(), canonical_len,
                  v.centroids.row(v.kind_offset[kind] + r).begin());
    h = fnv1a(waves.data.data(), waves.data.size() * sizeof(double), h);
  }
  v.k = cfg.k * wave::kNumWaveKinds;
  v.training_hash = fnv1a(&cfg.k, sizeof(cfg.k), h);
  v.validate();
  return v;
}

int assign_wave(const WaveVocabulary& vocabulary,
                std::span<const double> canonical, wave::WaveKind kind) {
  if (canonical.size() != vocabulary.canonical_len)
    throw Error("assign_wave: wave length " +
                std::to_string(canonical.size()) + ", vocabulary expects " +
                std::to_string(vocabulary.canonical_len));
  if (dsp::is_flat(canonical, vocabulary.eps)) return vocabulary.unk_id();
  if (vocabulary.per_kind) {
    const auto ki = static_cast<std::size_t>(kind);
    return nearest_in_range(vocabulary.centroids, canonical,
                            vocabulary.kind_offset[ki],
                            vocabulary.kind_count[ki]);
  }
  return nearest_in_range(vocabulary.centroids, canonical, 0, vocabulary.k);
}

namespace {

TokenSequence finalize_tokens(std::vector<int> ids, std::size_t max_len,
                              const std::string& example_id, int label) {
  TokenSequence seq;
  seq.example_id = example_id;
  seq.label = label;
  seq.original_len = ids.size();
  if (ids.size() > max_len) ids.resize(max_len);  // truncate from the end
  ids.resize(max_len, kPadId);                    // right-pad
  seq.tokens = std::move(ids);
  return seq;
}

}  // namespace

TokenSequence tokenize(std::span<const wave::WaveSegment> waves,
                       const WaveVocabulary& vocabulary, std::size_t max_len,
                       const std::string& example_id, int label) {
  if (max_len == 0) throw Error("tokenize: max_len must be positive");
  std::vector<int> ids;
  ids.reserve(waves.size());
  for (const auto& w : waves) {
    if (w.missing || w.degenerate)
      ids.push_back(vocabulary.unk_id());
    else
      ids.push_back(assign_wave(vocabulary, w.canonical, w.kind));
  }
  return finalize_tokens(std::move(ids), max_len, example_id, label);
}

TokenSequence tokenize_beats(std::span<const wave::WaveSegment> waves,
                             const WaveVocabulary& vocabulary,
                             std::size_t max_len,
                             const std::string& example_id, int label) {
  if (max_len == 0) throw Error("tokenize: max_len must be positive");
  std::vector<int> ids;
  for (const auto& w : waves) {
    if (w.kind != wave::WaveKind::kQrs) continue;
    if (w.missing || w.degenerate)
      ids.push_back(vocabulary.unk_id());
    else
      ids.push_back(assign_wave(vocabulary, w.canonical, w.kind));
  }
  return finalize_tokens(std::move(ids), max_len, example_id, label);
}

void save_vocabulary(const std::string& base_path,
                     const WaveVocabulary& vocabulary) {
  vocabulary.validate();
  std::map<std::string, std::string> meta;
  meta["kind"] = "wave_vocabulary";
  meta["k"] = std::to_string(vocabulary.k);
  meta["canonical_len"] = std::to_string(vocabulary.canonical_len);
  char eps_buf[32];
  std::snprintf(eps_buf, sizeof(eps_buf), "%.17g", vocabulary.eps);
  meta["eps"] = eps_buf;
  meta["seed"] = std::to_string(vocabulary.seed);
  meta["training_hash"] = hex64(vocabulary.training_hash);
  meta["per_kind"] = vocabulary.per_kind ? "1" : "0";
  if (vocabulary.per_kind) {
    std::string offs, counts;
    for (std::size_t i = 0; i < wave::kNumWaveKinds; ++i) {
      offs += (i ? "," : "") + std::to_string(vocabulary.kind_offset[i]);
      counts += (i ? "," : "") + std::to_string(vocabulary.kind_count[i]);
    }
    meta["kind_offset"] = offs;
    meta["kind_count"] = counts;
  }
  save_matrix(base_path, vocabulary.centroids, meta);
}

namespace {

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    out.push_back(static_cast<std::size_t>(std::stoull(tok)));
  return out;
}

std::string require_meta(const std::map<std::string, std::string>& meta,
                         const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end())
    throw ParseError("vocabulary file missing meta key '" + key + "'");
  return it->second;
}

}  // namespace

WaveVocabulary load_vocabulary(const std::string& base_path) {
  std::map<std::string, std::string> meta;
  Matrix centroids = load_matrix(base_path, &meta);
  if (require_meta(meta, "kind") != "wave_vocabulary")
    throw ParseError("not a vocabulary artifact: " + base_path);
  WaveVocabulary v;
  v.k = std::stoull(require_meta(meta, "k"));
  v.canonical_len = std::stoull(require_meta(meta, "canonical_len"));
  v.eps = std::stod(require_meta(meta, "eps"));
  v.seed = std::stoull(require_meta(meta, "seed"));
  v.training_hash = std::stoull(require_meta(meta, "training_hash"), nullptr, 16);
  v.per_kind = require_meta(meta, "per_kind") == "1";
  v.centroids = std::move(centroids);
  if (v.per_kind) {
    auto offs = parse_size_list(require_meta(meta, "kind_offset"));
    auto counts = parse_size_list(require_meta(meta, "kind_count"));
    if (offs.size() != wave::kNumWaveKinds ||
        counts.size() != wave::kNumWaveKinds)
      throw ParseError("vocabulary kind ranges malformed");
    std::copy_n(offs.begin(), wave::kNumWaveKinds, v.kind_offset.begin());
    std::copy_n(counts.begin(), wave::kNumWaveKinds, v.kind_count.begin());
  }
  v.validate();
  return v;
}

std::string render_cluster_gallery(const WaveVocabulary& vocabulary,
                                   const Matrix& waves,
                                   std::span<const std::size_t> assignment,
                                   std::size_t max_samples) {
  vocabulary.validate();
  if (assignment.size() != waves.rows)
    throw Error("gallery: assignment size mismatch");

  const double plot_w = 220.0, plot_h = 54.0;
  const double margin = 8.0, label_w = 52.0;
  const double row_h = plot_h + margin;
  const double width = label_w + plot_w + 2 * margin;
  const double height = margin + row_h * static_cast<double>(vocabulary.k);

  // Member rows per cluster, first max_samples in row order.
  std::vector<std::vector<std::size_t>> members(vocabulary.k);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] >= vocabulary.k)
      throw Error("gallery: assignment id out of range");
    if (members[assignment[i]].size() < max_samples)
      members[assignment[i]].push_back(i);
  }

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"";
  append_fixed(&svg, "%.0f", width);
  svg += "\" height=\"";
  append_fixed(&svg, "%.0f", height);
  svg += "\" viewBox=\"0 0 ";
  append_fixed(&svg, "%.0f", width);
  svg += " ";
  append_fixed(&svg, "%.0f", height);
  svg += "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  auto polyline = [&](std::span<const double> y, double top,
                      const char* stroke, const char* stroke_width) {
    double lo = y[0], hi = y[0];
    for (double v : y) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double span = hi - lo < 1e-12 ? 1.0 : hi - lo;
    svg += "<polyline fill=\"none\" stroke=\"";
    svg += stroke;
    svg += "\" stroke-width=\"";
    svg += stroke_width;
    svg += "\" points=\"";
    for (std::size_t i = 0; i < y.size(); ++i) {
      double px = label_w + margin +
                  plot_w * static_cast<double>(i) /
                      static_cast<double>(y.size() - 1);
      double py = top + plot_h - plot_h * (y[i] - lo) / span;
      if (i) svg += " ";
      append_fixed(&svg, "%.2f", px);
      svg += ",";
      append_fixed(&svg, "%.2f", py);
    }
    svg += "\"/>\n";
  };

  for (std::size_t c = 0; c < vocabulary.k; ++c) {
    const double top = margin + row_h * static_cast<double>(c);
    svg += "<text x=\"";
    append_fixed(&svg, "%.0f", margin);
    svg += "\" y=\"";
    append_fixed(&svg, "%.2f", top + plot_h / 2);
    svg += "\" font-family=\"monospace\" font-size=\"12\">id ";
    svg += std::to_string(c + 1);
    svg += "</text>\n";
    for (std::size_t m : members[c])
      polyline(waves.row(m), top, "#b0c4de", "0.6");
    polyline(vocabulary.centroids.row(c), top, "#c0392b", "1.4");
  }
  svg += "</svg>\n";
  return svg;
}

void export_cluster_gallery(const WaveVocabulary& vocabulary,
                            const Matrix& waves,
                            std::span<const std::size_t> assignment,
                            const std::string& path,
                            std::size_t max_samples) {
  write_file_text(path,
                  render_cluster_gallery(vocabulary, waves, assignment,
                                         max_samples));
}

}  // namespace elp::vocab
