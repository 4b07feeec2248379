#include "netcomb/dataset_store.hpp"

#include <openssl/evp.h>

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <optional>
#include <fstream>
#include <sstream>

#include "netcomb/combined.hpp"
#include "netcomb/error.hpp"

namespace fs = std::filesystem;

namespace netcomb {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("internal", "sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out(2 * len, '0');
  for (unsigned int i = 0; i < len; ++i) {
    out[2 * i] = hex[digest[i] >> 4];
    out[2 * i + 1] = hex[digest[i] & 0xf];
  }
  return out;
}

namespace {

void reject_non_finite(const nlohmann::json& j, const std::string& path) {
  if (j.is_number_float() && !std::isfinite(j.get<double>())) {
    throw ValidationError(path.empty() ? "params" : path, "non-finite number cannot be serialized");
  }
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) reject_non_finite(v, path.empty() ? k : path + "." + k);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) reject_non_finite(j[i], path + "[" + std::to_string(i) + "]");
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, std::string_view data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw IoError("short write to " + p.string());
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool valid_key(const std::string& key) {
  if (key.size() != 64) return false;
  for (char c : key) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

void require_key(const std::string& key) {
  if (!valid_key(key)) throw ValidationError("key", "expected 64 lowercase hex characters");
}

}  // namespace

std::string canonical_json(const nlohmann::json& params) {
  reject_non_finite(params, "");
  // nlohmann's default object type is an ordered std::map, so dump() already
  // emits keys sorted; no indent means no whitespace.
  return params.dump();
}

std::string canonical_key(const nlohmann::json& params) {
  return sha256_hex("netcomb-store/v" + std::to_string(kStoreSchemaVersion) + "\n" + canonical_json(params));
}

bool json_contains(const nlohmann::json& doc, const nlohmann::json& filter) {
  if (filter.is_object()) {
    if (!doc.is_object()) return false;
    for (const auto& [k, v] : filter.items()) {
      const auto it = doc.find(k);
      if (it == doc.end() || !json_contains(*it, v)) return false;
    }
    return true;
  }
  return doc == filter;
}

DatasetStore::DatasetStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw IoError("cannot create store root " + root_.string() + ": " + ec.message());
}

fs::path DatasetStore::entry_dir(const std::string& key) const { return root_ / key.substr(0, 2) / key; }

std::mutex& DatasetStore::key_mutex(const std::string& key) {
  std::lock_guard lock(table_mutex_);
  auto& m = key_mutexes_[key];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

PutReceipt DatasetStore::put(const std::string& key, const nlohmann::json& metadata, std::string_view payload) {
  require_key(key);
  if (!metadata.is_object() || !metadata.contains("params")) {
    throw ValidationError("metadata.params", "metadata must carry the generating params");
  }
  if (canonical_key(metadata["params"]) != key) {
    throw ValidationError("key", "key does not match metadata params");
  }
  const std::string checksum = sha256_hex(payload);
  std::lock_guard lock(key_mutex(key));

  auto existing = [&]() -> std::optional<PutReceipt> {
    if (!contains(key)) return std::nullopt;
    const auto meta = this->metadata(key);
    if (meta.value("checksum", std::string()) != checksum) {
      throw ConflictError("key " + key + " already holds a different payload");
    }
    return PutReceipt{key, checksum, false};
  };
  if (auto r = existing()) return *r;

  nlohmann::json meta = metadata;
  meta["key"] = key;
  meta["checksum"] = checksum;
  meta["checksum_algorithm"] = "sha256";
  meta["payload_size"] = payload.size();
  meta["schema_version"] = kStoreSchemaVersion;
  if (!meta.contains("created_at")) meta["created_at"] = utc_now();
  if (!meta.contains("generator_version")) meta["generator_version"] = kVersion;

  static std::atomic<unsigned> counter{0};
  const fs::path shard = root_ / key.substr(0, 2);
  const fs::path tmp = shard / (".tmp-" + key + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::error_code ec;
  fs::create_directories(tmp, ec);
  if (ec) throw IoError("cannot create " + tmp.string() + ": " + ec.message());
  try {
    write_file(tmp / "payload", payload);
    write_file(tmp / "meta.json", meta.dump(2));
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
  fs::rename(tmp, entry_dir(key), ec);
  if (ec) {
    fs::remove_all(tmp, ec);
    // Another process won the rename; accept it only if it stored the same bytes.
    if (auto r = existing()) return *r;
    throw IoError("cannot publish entry " + key);
  }
  return {key, checksum, true};
}

bool DatasetStore::contains(const std::string& key) const {
  if (!valid_key(key)) return false;
  std::error_code ec;
  return fs::exists(entry_dir(key) / "meta.json", ec);
}

nlohmann::json DatasetStore::metadata(const std::string& key) const {
  require_key(key);
  if (!contains(key)) throw NotFoundError("no dataset with key " + key);
  try {
    return nlohmann::json::parse(read_file(entry_dir(key) / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ChecksumError("metadata for " + key + " is unreadable: " + e.what());
  }
}

StoredDataset DatasetStore::get(const std::string& key) const {
  StoredDataset d;
  d.key = key;
  d.metadata = metadata(key);
  d.payload = read_file(entry_dir(key) / "payload");
  if (sha256_hex(d.payload) != d.metadata.value("checksum", std::string())) {
    throw ChecksumError("payload for " + key + " does not match its checksum");
  }
  return d;
}

std::vector<std::string> DatasetStore::list(const nlohmann::json& filter) const {
  std::vector<std::string> keys;
  std::error_code ec;
  for (const auto& shard : fs::directory_iterator(root_, ec)) {
    if (!shard.is_directory()) continue;
    for (const auto& entry : fs::directory_iterator(shard.path(), ec)) {
      const std::string key = entry.path().filename().string();
      if (!valid_key(key) || !contains(key)) continue;
      try {
        if (json_contains(metadata(key), filter)) keys.push_back(key);
      } catch (const ChecksumError&) {
        // Unreadable entries are skipped by listing; get() reports them.
      }
    }
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

bool DatasetStore::remove(const std::string& key) {
  if (!valid_key(key)) return false;
  std::lock_guard lock(key_mutex(key));
  std::error_code ec;
  return fs::remove_all(entry_dir(key), ec) > 0;
}

void DatasetStore::purge() {
  std::error_code ec;
  for (const auto& shard : fs::directory_iterator(root_, ec)) fs::remove_all(shard.path(), ec);
}

}  // namespace netcomb
