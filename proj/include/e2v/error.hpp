#pragma once

#include <stdexcept>
#include <string>

namespace e2v {

/// Base of every error raised by the library. The exit code is what the CLI
/// returns when the error escapes a subcommand.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, int exit_code = 1)
      : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

/// Malformed input data: corpus files, manifests, property tables.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what, 2) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, 2) {}
};

/// A stage was asked to run before the stage that produces its inputs.
class PrerequisiteError : public Error {
 public:
  explicit PrerequisiteError(const std::string& what) : Error(what, 3) {}
};

/// Transport or protocol failure talking to a remote service.
class RemoteError : public Error {
 public:
  RemoteError(const std::string& what, int status, bool retriable)
      : Error(what, 4), status_(status), retriable_(retriable) {}
  int status() const noexcept { return status_; }
  bool retriable() const noexcept { return retriable_; }

 private:
  int status_;
  bool retriable_;
};

/// Non-finite values or a failed numerical precondition.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(what, 5) {}
};

}  // namespace e2v
