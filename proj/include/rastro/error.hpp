// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rastro {

/// Base of every error raised by the library.
///
/// The hierarchy splits into user errors (bad input, validation, unknown
/// codes) and environment errors (I/O, corruption, locking). The CLI maps
/// the first group to exit code 1 and the second to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UserError : public Error {
 public:
  using Error::Error;
};

class EnvironmentError : public Error {
 public:
  using Error::Error;
};

/// A single violated invariant, addressed by its dotted field path.
struct Violation {
  std::string path;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

using ValidationReport = std::vector<Violation>;

inline std::string describe(const ValidationReport& report) {
  std::string out;
  for (const auto& v : report) {
    if (!out.empty()) out += "; ";
    out += v.path + ": " + v.message;
  }
  return out;
}

class ValidationError : public UserError {
 public:
  explicit ValidationError(ValidationReport report)
      : UserError("validation failed: " + describe(report)), report_(std::move(report)) {}

  const ValidationReport& report() const noexcept { return report_; }

 private:
  ValidationReport report_;
};

class InvalidArgument : public UserError {
 public:
  using UserError::UserError;
};

class NotFound : public UserError {
 public:
  using UserError::UserError;
};

/// Misuse of a run context (logging after close, double commit).
class StateError : public UserError {
 public:
  using UserError::UserError;
};

class QuerySyntaxError : public UserError {
 public:
  QuerySyntaxError(const std::string& what, std::size_t position)
      : UserError(what + " (at offset " + std::to_string(position) + ")"), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class IoError : public EnvironmentError {
 public:
  using EnvironmentError::EnvironmentError;
};

class LockTimeout : public EnvironmentError {
 public:
  using EnvironmentError::EnvironmentError;
};

class SchemaVersionError : public EnvironmentError {
 public:
  using EnvironmentError::EnvironmentError;
};

/// A committed line that cannot be parsed. Carries file and 1-based line.
class CorruptionError : public EnvironmentError {
 public:
  CorruptionError(std::string file, std::size_t line, const std::string& detail)
      : EnvironmentError(file + ":" + std::to_string(line) + ": " + detail),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace rastro
