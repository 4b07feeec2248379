#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace netcomb {

/// Base for every error raised by the platform. `code()` is the
/// machine-readable tag carried over the wire by the service layer.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

private:
  std::string code_;
};

class ParseError : public Error {
public:
  explicit ParseError(const std::string& what) : Error("parse_error", what) {}
};

/// Invariant violation. `field()` is a dotted path such as
/// "sites[0].cells[1].antenna.h_beamwidth".
class ValidationError : public Error {
public:
  ValidationError(std::string field, std::string detail)
      : Error("validation_error", field + ": " + detail), field_(std::move(field)), detail_(std::move(detail)) {}
  const std::string& field() const noexcept { return field_; }
  const std::string& detail() const noexcept { return detail_; }
  /// Same error with `prefix` prepended to the field path.
  ValidationError nested(const std::string& prefix) const {
    return ValidationError(field_.empty() ? prefix : prefix + "." + field_, detail_);
  }

private:
  std::string field_;
  std::string detail_;
};

class ResourceGuardError : public Error {
public:
  ResourceGuardError(const std::string& what, double requested, double cap)
      : Error("resource_guard", what), requested_(requested), cap_(cap) {}
  double requested() const noexcept { return requested_; }
  double cap() const noexcept { return cap_; }

private:
  double requested_;
  double cap_;
};

class NotFoundError : public Error {
public:
  explicit NotFoundError(const std::string& what) : Error("not_found", what) {}
};

class ConflictError : public Error {
public:
  explicit ConflictError(const std::string& what) : Error("conflict", what) {}
};

class IndexMismatchError : public Error {
public:
  explicit IndexMismatchError(const std::string& what) : Error("index_mismatch", what) {}
};

class StateError : public Error {
public:
  explicit StateError(const std::string& what) : Error("invalid_state", what) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error("io_error", what) {}
};

/// Stored bytes no longer match their recorded digest.
class ChecksumError : public Error {
public:
  explicit ChecksumError(const std::string& what) : Error("checksum_mismatch", what) {}
};

}  // namespace netcomb
