#include "elp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>

#include "json.hpp"

#include "elp/common.hpp"

namespace elp::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::uint64_t hash_file(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return fnv1a(bytes.data(), bytes.size());
}

std::uint64_t hash_files(const std::string& dir,
                         const std::vector<std::string>& files) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& name : files) {
    h = fnv1a(name, h);
    const auto bytes = read_file_bytes((fs::path(dir) / name).string());
    h = fnv1a(bytes.data(), bytes.size(), h);
  }
  return h;
}

ArtifactStore::ArtifactStore(std::string root) : root_(std::move(root)) {
  fs::create_directories(root_);
  load();
}

std::string ArtifactStore::dir_for(const std::string& stage,
                                   std::uint64_t id_hash) const {
  const fs::path dir = fs::path(root_) / stage / hex64(id_hash);
  fs::create_directories(dir);
  return dir.string();
}

const ManifestEntry* ArtifactStore::find(const std::string& stage,
                                         std::uint64_t id_hash) const {
  const std::string id = hex64(id_hash);
  for (const auto& e : entries_)
    if (e.stage == stage && e.id_hash == id) return &e;
  return nullptr;
}

const ManifestEntry& ArtifactStore::require_latest(
    const std::string& stage, const std::string& needed_by) const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->stage == stage) {
      verify(*it);
      return *it;
    }
  }
  throw Error("stage '" + needed_by + "' requires a '" + stage +
              "' artifact in " + root_ + "; run '" + stage + "' first");
}

const ManifestEntry& ArtifactStore::record(
    const std::string& stage, std::uint64_t id_hash,
    std::uint64_t config_fingerprint, const std::vector<std::string>& files,
    const std::vector<std::string>& inputs) {
  ManifestEntry entry;
  entry.stage = stage;
  entry.id_hash = hex64(id_hash);
  entry.content_hash =
      hex64(hash_files(dir_for(stage, id_hash), files));
  entry.config_fingerprint = hex64(config_fingerprint);
  entry.inputs = inputs;
  entry.files = files;
  entry.created_at = utc_now();

  entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                [&](const ManifestEntry& e) {
                                  return e.key() == entry.key();
                                }),
                 entries_.end());
  entries_.push_back(std::move(entry));
  save();
  return entries_.back();
}

void ArtifactStore::verify(const ManifestEntry& entry) const {
  const fs::path dir = fs::path(root_) / entry.stage / entry.id_hash;
  for (const auto& name : entry.files)
    if (!fs::exists(dir / name))
      throw Error("artifact " + entry.key() + " is missing file " + name);
  const std::uint64_t found = hash_files(dir.string(), entry.files);
  if (hex64(found) != entry.content_hash)
    throw Error("artifact " + entry.key() + " hash mismatch: manifest says " +
                entry.content_hash + ", found " + hex64(found));
}

std::string ArtifactStore::file_path(const ManifestEntry& entry,
                                     const std::string& file) const {
  return (fs::path(root_) / entry.stage / entry.id_hash / file).string();
}

void ArtifactStore::save() const {
  json j;
  j["kind"] = "elp_manifest";
  json list = json::array();
  for (const auto& e : entries_) {
    json je;
    je["stage"] = e.stage;
    je["id_hash"] = e.id_hash;
    je["content_hash"] = e.content_hash;
    je["config_fingerprint"] = e.config_fingerprint;
    je["inputs"] = e.inputs;
    je["files"] = e.files;
    je["created_at"] = e.created_at;
    list.push_back(std::move(je));
  }
  j["entries"] = std::move(list);
  write_file_text((fs::path(root_) / "manifest.json").string(),
                  j.dump(2) + "\n");
}

void ArtifactStore::load() {
  const fs::path path = fs::path(root_) / "manifest.json";
  entries_.clear();
  if (!fs::exists(path)) return;
  json j;
  try {
    j = json::parse(read_file_text(path.string()));
    if (j.value("kind", "") != "elp_manifest")
      throw ParseError("manifest.json: not an elp manifest");
    for (const auto& je : j.at("entries")) {
      ManifestEntry e;
      e.stage = je.at("stage").get<std::string>();
      e.id_hash = je.at("id_hash").get<std::string>();
      e.content_hash = je.at("content_hash").get<std::string>();
      e.config_fingerprint = je.at("config_fingerprint").get<std::string>();
      e.inputs = je.at("inputs").get<std::vector<std::string>>();
      e.files = je.at("files").get<std::vector<std::string>>();
      e.created_at = je.at("created_at").get<std::string>();
      entries_.push_back(std::move(e));
    }
  } catch (const json::exception& err) {
    throw ParseError(std::string("manifest.json: ") + err.what());
  }
}

}  // namespace elp::pipeline
