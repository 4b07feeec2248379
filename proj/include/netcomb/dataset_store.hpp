#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace netcomb {

/// Bumped whenever a stored payload's meaning changes; part of every key.
inline constexpr int kStoreSchemaVersion = 1;

std::string sha256_hex(std::string_view bytes);

/// Sorted-key, whitespace-free dump. Non-finite numbers are rejected since
/// they have no JSON form.
std::string canonical_json(const nlohmann::json& params);

/// SHA-256 over "netcomb-store/v<schema>\n" + canonical_json(params).
std::string canonical_key(const nlohmann::json& params);

struct StoredDataset {
  std::string key;
  nlohmann::json metadata;  // params, created_at, generator_version, checksum, payload_size, ...
  std::string payload;
};

struct PutReceipt {
  std::string key;
  std::string checksum;
  bool created = false;  // false when an identical entry already existed
};

/// Directory-backed store. Layout: <root>/<key[0:2]>/<key>/{meta.json,payload}.
/// The payload checksum is SHA-256, hex encoded, recorded in meta.json and
/// verified on every read. Entries appear atomically by directory rename.
class DatasetStore {
public:
  explicit DatasetStore(std::filesystem::path root);

  /// `metadata["params"]` must hash to `key`. Re-putting the same payload is
  /// a no-op; a different payload under an existing key is a ConflictError.
  PutReceipt put(const std::string& key, const nlohmann::json& metadata, std::string_view payload);
  /// NotFoundError on miss, ChecksumError on corruption.
  StoredDataset get(const std::string& key) const;
  nlohmann::json metadata(const std::string& key) const;
  bool contains(const std::string& key) const;
  /// Keys whose metadata contains every (possibly nested) field of `filter`.
  std::vector<std::string> list(const nlohmann::json& filter = nlohmann::json::object()) const;
  bool remove(const std::string& key);
  void purge();

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path entry_dir(const std::string& key) const;

private:
  std::mutex& key_mutex(const std::string& key);

  std::filesystem::path root_;
  std::mutex table_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> key_mutexes_;
};

/// True when every field of `filter` is present in `doc` with an equal value;
/// objects are matched recursively.
bool json_contains(const nlohmann::json& doc, const nlohmann::json& filter);

}  // namespace netcomb
