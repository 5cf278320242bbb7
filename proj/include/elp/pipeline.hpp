#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace elp::pipeline {

struct ManifestEntry {
  std::string stage;
  std::string id_hash;             // hex64 identity: config + input hashes
  std::string content_hash;        // hex64 over the artifact files
  std::string config_fingerprint;  // hex64
  std::vector<std::string> inputs;  // upstream "stage/id_hash" keys
  std::vector<std::string> files;   // file names inside the artifact dir
  std::string created_at;           // ISO 8601 UTC

  std::string key() const { return stage + "/" + id_hash; }
};

// Content-addressed artifact index under one output root. Layout:
// <root>/<stage>/<id_hash>/<files...> plus a single <root>/manifest.json.
// Re-running a stage with an identical identity hash is a no-op; artifacts
// whose bytes no longer match their recorded hash are rejected.
class ArtifactStore {
 public:
  explicit ArtifactStore(std::string root);

  const std::string& root() const { return root_; }
  const std::vector<ManifestEntry>& entries() const { return entries_; }

  // <root>/<stage>/<id_hash>, directories created.
  std::string dir_for(const std::string& stage, std::uint64_t id_hash) const;

  const ManifestEntry* find(const std::string& stage,
                            std::uint64_t id_hash) const;
  // Most recent entry of a stage, hash-verified. Errors name both stages
  // when the upstream artifact is missing.
  const ManifestEntry& require_latest(const std::string& stage,
                                      const std::string& needed_by) const;

  // Registers a finished artifact dir and persists the manifest.
  const ManifestEntry& record(const std::string& stage, std::uint64_t id_hash,
                              std::uint64_t config_fingerprint,
                              const std::vector<std::string>& files,
                              const std::vector<std::string>& inputs = {});

  // Recomputes the content hash; mismatch -> error.
  void verify(const ManifestEntry& entry) const;

  std::string file_path(const ManifestEntry& entry,
                        const std::string& file) const;

  void save() const;
  void load();  // missing manifest -> empty store

 private:
  std::string root_;
  std::vector<ManifestEntry> entries_;
};

std::uint64_t hash_file(const std::string& path);
// Chained hash over (name, bytes) in list order.
std::uint64_t hash_files(const std::string& dir,
                         const std::vector<std::string>& files);

}  // namespace elp::pipeline
