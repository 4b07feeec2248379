#pragma once

// Path-aware accessors for parsing JSON documents. `path` is the dotted
// prefix (ending in '.') that names the enclosing object in errors.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "netcomb/error.hpp"

namespace netcomb {

using nlohmann::json;

inline double number_at(const json& j, const char* key, const std::string& path, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ValidationError(path + key, "expected a number");
  return v.get<double>();
}

inline double required_number(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) throw ValidationError(path + key, "missing required field");
  return number_at(j, key, path, 0.0);
}

inline int integer_at(const json& j, const char* key, const std::string& path, int fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ValidationError(path + key, "expected an integer");
  return v.get<int>();
}

inline bool bool_at(const json& j, const char* key, const std::string& path, bool fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_boolean()) throw ValidationError(path + key, "expected a boolean");
  return v.get<bool>();
}

inline const json& object_at(const json& j, const char* key, const std::string& path) {
  const auto& v = j.at(key);
  if (!v.is_object()) throw ValidationError(path + key, "expected an object");
  return v;
}

inline const json& array_at(const json& j, const char* key, const std::string& path) {
  const auto& v = j.at(key);
  if (!v.is_array()) throw ValidationError(path + key, "expected an array");
  return v;
}

inline std::vector<double> number_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(path + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(j[i].get<double>());
  }
  return out;
}

inline std::uint64_t uint64_at(const json& j, const char* key, const std::string& path, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ValidationError(path + key, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline std::size_t count_at(const json& j, const char* key, const std::string& path, std::size_t fallback) {
  return static_cast<std::size_t>(uint64_at(j, key, path, fallback));
}

inline std::string string_at(const json& j, const char* key, const std::string& path, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_string()) throw ValidationError(path + key, "expected a string");
  return v.get<std::string>();
}

inline std::vector<int> int_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError(path, "expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer()) throw ValidationError(path + "[" + std::to_string(i) + "]", "expected an integer");
    out.push_back(j[i].get<int>());
  }
  return out;
}

inline void require_object(const json& j, const std::string& name) {
  if (!j.is_object()) throw ValidationError(name, "expected an object");
}

}  // namespace netcomb
