// Artifact store bookkeeping, the synthetic generator, and the task
// presets. Store behaviour is checked against the filesystem directly;
// generator ground truth is checked against the rendered trace.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "elp/common.hpp"
#include "elp/pipeline.hpp"
#include "elp/synth.hpp"
#include "elp/tasks.hpp"

using namespace elp;

namespace {

namespace fs = std::filesystem;

fs::path temp_root(const char* tag) {
  auto dir = fs::temp_directory_path() /
             (std::string("elp_store_") + tag + "_" +
              std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("store records an artifact and finds it again") {
  const auto root = temp_root("record");
  pipeline::ArtifactStore store(root.string());

  const auto dir = store.dir_for("detect", 0x1234);
  CHECK(fs::is_directory(dir));
  write_file(dir + "/peaks.json", "{\"peaks\":[1,2,3]}");

  const auto& entry =
      store.record("detect", 0x1234, 0xabcd, {"peaks.json"}, {"ingest/00"});
  CHECK(entry.stage == "detect");
  CHECK(entry.key() == "detect/" + entry.id_hash);
  CHECK(entry.files == std::vector<std::string>{"peaks.json"});
  CHECK(entry.inputs == std::vector<std::string>{"ingest/00"});
  CHECK(!entry.created_at.empty());

  const auto* found = store.find("detect", 0x1234);
  REQUIRE(found != nullptr);
  CHECK(found->content_hash == entry.content_hash);
  CHECK(store.find("detect", 0x9999) == nullptr);
  CHECK(store.find("segment", 0x1234) == nullptr);

  CHECK(store.file_path(entry, "peaks.json") == dir + "/peaks.json");
  CHECK(fs::exists(fs::path(root) / "manifest.json"));

  fs::remove_all(root);
}

TEST_CASE("manifest survives a reload through a fresh store") {
  const auto root = temp_root("reload");
  {
    pipeline::ArtifactStore store(root.string());
    const auto dir = store.dir_for("ingest", 7);
    write_file(dir + "/record.json", "{}");
    store.record("ingest", 7, 1, {"record.json"});
  }
  pipeline::ArtifactStore store(root.string());
  REQUIRE(store.entries().size() == 1);
  const auto& entry = store.require_latest("ingest", "detect");
  CHECK(entry.stage == "ingest");
  CHECK(entry.files == std::vector<std::string>{"record.json"});
  fs::remove_all(root);
}

TEST_CASE("require_latest names both stages when the input is missing") {
  const auto root = temp_root("missing");
  pipeline::ArtifactStore store(root.string());
  CHECK_THROWS_WITH_AS(
      store.require_latest("segment", "tokenize"),
      doctest::Contains("stage 'tokenize' requires a 'segment' artifact"),
      Error);
  CHECK_THROWS_WITH_AS(store.require_latest("segment", "tokenize"),
                       doctest::Contains("run 'segment' first"), Error);
  fs::remove_all(root);
}

TEST_CASE("require_latest returns the most recent entry of a stage") {
  const auto root = temp_root("latest");
  pipeline::ArtifactStore store(root.string());
  for (std::uint64_t id : {10u, 20u}) {
    const auto dir = store.dir_for("vocab", id);
    write_file(dir + "/vocab.json", "v" + std::to_string(id));
    store.record("vocab", id, id, {"vocab.json"});
  }
  const auto& latest = store.require_latest("vocab", "tokenize");
  CHECK(latest.id_hash == store.find("vocab", 20)->id_hash);
  fs::remove_all(root);
}

TEST_CASE("verify rejects tampered artifact bytes") {
  const auto root = temp_root("tamper");
  pipeline::ArtifactStore store(root.string());
  const auto dir = store.dir_for("tokens", 42);
  write_file(dir + "/tokens.json", "original");
  const auto& entry = store.record("tokens", 42, 0, {"tokens.json"});
  CHECK_NOTHROW(store.verify(entry));

  write_file(dir + "/tokens.json", "tampered");
  CHECK_THROWS_WITH_AS(store.verify(entry),
                       doctest::Contains("hash mismatch: manifest says"),
                       Error);
  CHECK_THROWS_WITH_AS(store.verify(entry), doctest::Contains(", found "),
                       Error);

  fs::remove(fs::path(dir) / "tokens.json");
  CHECK_THROWS_WITH_AS(store.verify(entry),
                       doctest::Contains("missing file tokens.json"), Error);
  fs::remove_all(root);
}

TEST_CASE("re-recording the same identity replaces the entry") {
  const auto root = temp_root("rerecord");
  pipeline::ArtifactStore store(root.string());
  const auto dir = store.dir_for("detect", 5);
  write_file(dir + "/peaks.json", "one");
  store.record("detect", 5, 1, {"peaks.json"});
  write_file(dir + "/peaks.json", "two");
  store.record("detect", 5, 1, {"peaks.json"});
  CHECK(store.entries().size() == 1);
  CHECK_NOTHROW(store.verify(*store.find("detect", 5)));
  fs::remove_all(root);
}

TEST_CASE("corrupt manifest is a parse error") {
  const auto root = temp_root("corrupt");
  pipeline::ArtifactStore store(root.string());
  write_file((root / "manifest.json").string(), "not json at all");
  CHECK_THROWS_AS(store.load(), ParseError);
  write_file((root / "manifest.json").string(), "{\"kind\":\"other\"}");
  CHECK_THROWS_WITH_AS(store.load(), doctest::Contains("not an elp manifest"),
                       ParseError);
  CHECK_THROWS_AS(pipeline::ArtifactStore(root.string()), ParseError);
  fs::remove_all(root);
}

TEST_CASE("hash_files depends on names, bytes and order") {
  const auto root = temp_root("hash");
  write_file((root / "a.txt").string(), "alpha");
  write_file((root / "b.txt").string(), "beta");
  const auto h1 = pipeline::hash_files(root.string(), {"a.txt", "b.txt"});
  const auto h2 = pipeline::hash_files(root.string(), {"b.txt", "a.txt"});
  CHECK(h1 != h2);
  write_file((root / "a.txt").string(), "alphb");
  CHECK(pipeline::hash_files(root.string(), {"a.txt", "b.txt"}) != h1);
  CHECK(pipeline::hash_file((root / "b.txt").string()) ==
        pipeline::hash_file((root / "b.txt").string()));
  fs::remove_all(root);
}

TEST_CASE("generator schedules the expected beat count") {
  synth::SynthSpec spec;
  spec.duration_s = 60.0;
  spec.bpm = 75.0;
  spec.rr_jitter = 0.0;
  const auto rec = synth::generate(spec);
  // 0.4 s margins leave 59.2 s for beats at 0.8 s spacing.
  CHECK(rec.peaks.size() == 75);
  CHECK(rec.beat_classes.size() == rec.peaks.size());
  CHECK(rec.record.annotations.size() == rec.peaks.size());
  CHECK(rec.record.fs == spec.fs);
  CHECK(rec.record.n_samples() ==
        static_cast<std::size_t>(std::llround(spec.fs * spec.duration_s)));
}

TEST_CASE("same seed reproduces the record exactly") {
  synth::SynthSpec spec;
  spec.duration_s = 10.0;
  spec.snr_db = 15.0;
  spec.seed = 77;
  const auto a = synth::generate(spec);
  const auto b = synth::generate(spec);
  CHECK(a.peaks == b.peaks);
  CHECK(a.record.signal[0] == b.record.signal[0]);
  spec.seed = 78;
  const auto c = synth::generate(spec);
  CHECK(a.record.signal[0] != c.record.signal[0]);
}

TEST_CASE("ground-truth peaks sit on clean local extrema") {
  synth::SynthSpec spec;
  spec.duration_s = 20.0;
  spec.rr_jitter = 0.03;
  spec.seed = 5;
  // Clean trace: peaks must be exact local maxima of the rendered signal.
  const auto rec = synth::generate(spec);
  REQUIRE(rec.peaks.size() > 10);
  const auto& x = rec.record.signal[0];
  for (std::size_t p : rec.peaks) {
    REQUIRE(p > 0);
    REQUIRE(p + 1 < x.size());
    CHECK(x[p] >= x[p - 1]);
    CHECK(x[p] >= x[p + 1]);
    CHECK(x[p] > 0.5);  // near the 1 mV QRS amplitude
  }
}

TEST_CASE("inverted beats get sign-aware ground truth") {
  synth::SynthSpec spec;
  spec.duration_s = 10.0;
  spec.classes = {tasks::synth_class_shape(1)};
  const auto rec = synth::generate(spec);
  const auto& x = rec.record.signal[0];
  for (std::size_t p : rec.peaks) {
    CHECK(x[p] <= x[p - 1]);
    CHECK(x[p] <= x[p + 1]);
    CHECK(x[p] < -0.5);
  }
}

TEST_CASE("noise hits the requested snr") {
  synth::SynthSpec spec;
  spec.duration_s = 60.0;
  spec.seed = 9;
  const auto clean = synth::generate(spec);
  spec.snr_db = 10.0;
  const auto noisy = synth::generate(spec);
  const auto& c = clean.record.signal[0];
  const auto& n = noisy.record.signal[0];
  REQUIRE(c.size() == n.size());
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    sig += c[i] * c[i];
    const double d = n[i] - c[i];
    err += d * d;
  }
  const double snr = 10.0 * std::log10(sig / err);
  CHECK(snr == doctest::Approx(10.0).epsilon(0.05));
  // Scheduling is independent of the noise stream.
  CHECK(clean.peaks == noisy.peaks);
}

TEST_CASE("spec validation rejects bad parameters") {
  synth::SynthSpec spec;
  CHECK_NOTHROW(spec.validate());  // defaults, snr = inf is allowed

  synth::SynthSpec bad = spec;
  bad.fs = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = spec;
  bad.duration_s = 1.5;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains(">= 2 s"), Error);
  bad = spec;
  bad.bpm = 20.0;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("[30, 240]"), Error);
  bad = spec;
  bad.bpm = 300.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = spec;
  bad.rr_jitter = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = spec;
  bad.classes.clear();
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = spec;
  bad.snr_db = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("NaN"), Error);
  bad = spec;
  bad.classes[0].qrs.width_ms = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("task names round trip and unknown names are rejected") {
  using tasks::TaskId;
  for (TaskId t : {TaskId::kMitbih, TaskId::kAfib5s, TaskId::kChallenge2017,
                   TaskId::kSynth}) {
    CHECK(tasks::task_from_name(tasks::task_name(t)) == t);
  }
  CHECK(std::string(tasks::task_name(TaskId::kAfib5s)) == "afib5s");
  CHECK_THROWS_WITH_AS(
      tasks::task_from_name("mitbih2"),
      doctest::Contains("expected mitbih, afib5s, challenge2017 or synth"),
      Error);
}

TEST_CASE("synthetic class shapes differ in polarity and t amplitude") {
  const auto plain = tasks::synth_class_shape(0);
  const auto inverted = tasks::synth_class_shape(1);
  CHECK(plain.qrs.amplitude_mv == 1.0);
  CHECK(inverted.qrs.amplitude_mv == -1.0);
  CHECK(inverted.t.amplitude_mv > plain.t.amplitude_mv);
}

TEST_CASE("synthetic dataset alternates labels and extracts waves") {
  tasks::SynthTaskConfig cfg;
  cfg.n_records = 8;
  cfg.duration_s = 6.0;
  cfg.snr_db = 25.0;
  cfg.canonical_len = 32;
  const auto examples = tasks::build_synth_dataset(cfg);
  REQUIRE(examples.size() == 8);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    CHECK(examples[i].label == static_cast<int>(i % 2));
    CHECK(examples[i].id == "synth-" + std::to_string(i));
    REQUIRE(!examples[i].waves.empty());
    for (const auto& w : examples[i].waves) {
      if (!w.missing) CHECK(w.canonical.size() == 32);
    }
  }
  // Deterministic end to end.
  const auto again = tasks::build_synth_dataset(cfg);
  REQUIRE(again.size() == examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    CHECK(again[i].waves.size() == examples[i].waves.size());
    CHECK(again[i].waves[0].canonical == examples[i].waves[0].canonical);
  }

  cfg.n_records = 3;
  CHECK_THROWS_WITH_AS(tasks::build_synth_dataset(cfg),
                       doctest::Contains("at least 4"), Error);
}

TEST_CASE("per-task experiment presets") {
  using tasks::TaskId;
  const auto mit = tasks::default_experiment(TaskId::kMitbih);
  CHECK(mit.n_classes == 5);
  CHECK(mit.folds == 10);
  CHECK(mit.max_len == 9);
  CHECK(mit.class_names ==
        std::vector<std::string>{"N", "S", "V", "F", "Q"});

  const auto afib = tasks::default_experiment(TaskId::kAfib5s);
  CHECK(afib.n_classes == 2);
  CHECK(afib.folds == 10);
  CHECK(afib.max_len == 45);

  const auto ch = tasks::default_experiment(TaskId::kChallenge2017);
  CHECK(ch.n_classes == 4);
  CHECK(ch.folds == 5);
  CHECK(ch.max_len == 330);
  CHECK(ch.model.pools.size() == 3);

  const auto syn = tasks::default_experiment(TaskId::kSynth);
  CHECK(syn.n_classes == 2);
  CHECK(syn.folds == 5);
  CHECK(syn.max_len == 45);
  for (TaskId t : {TaskId::kMitbih, TaskId::kAfib5s, TaskId::kChallenge2017,
                   TaskId::kSynth}) {
    const auto cfg = tasks::default_experiment(t);
    CHECK(cfg.class_names.size() == cfg.n_classes);
  }
}
