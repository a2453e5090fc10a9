#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace capfuse {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownLabel : public Error {
 public:
  UnknownLabel(std::string kind, std::string name)
      : Error("unknown " + kind + " label '" + name + "'"),
        kind_(std::move(kind)),
        name_(std::move(name)) {}
  const std::string& kind() const { return kind_; }
  const std::string& name() const { return name_; }

 private:
  std::string kind_;
  std::string name_;
};

class NotATag : public Error {
 public:
  explicit NotATag(const std::string& text) : Error("not a bracketed tag: '" + text + "'") {}
};

class UnknownSurface : public Error {
 public:
  explicit UnknownSurface(const std::string& text) : Error("unknown tag surface: '" + text + "'") {}
};

/// Failure to turn one NDJSON line into an ingest event.
class DecodeError : public Error {
 public:
  enum class Kind { malformed_json, unsupported_version, schema_violation, unknown_label };

  DecodeError(Kind kind, std::string field, const std::string& message)
      : Error(message), kind_(kind), field_(std::move(field)) {}

  Kind kind() const { return kind_; }
  /// Offending field for schema violations, empty otherwise.
  const std::string& field() const { return field_; }

 private:
  Kind kind_;
  std::string field_;
};

const char* to_string(DecodeError::Kind kind);

class FileUnreadable : public Error {
 public:
  explicit FileUnreadable(const std::string& path) : Error("cannot read '" + path + "'"), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// A session file line failed to decode; replay aborts.
class ReplayError : public Error {
 public:
  ReplayError(std::size_t line, const DecodeError& cause)
      : Error("line " + std::to_string(line) + ": " + cause.what()), line_(line), cause_kind_(cause.kind()) {}
  std::size_t line() const { return line_; }
  DecodeError::Kind cause_kind() const { return cause_kind_; }

 private:
  std::size_t line_;
  DecodeError::Kind cause_kind_;
};

class InvalidPreference : public Error {
 public:
  InvalidPreference(std::string field, const std::string& reason)
      : Error("invalid preference '" + field + "': " + reason), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class StorageFailure : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace capfuse
