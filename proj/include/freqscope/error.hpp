#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace freqscope {

// Process exit codes used by the CLI. Each error class below maps to one.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitParse = 3,
  kExitSource = 4,
  kExitAccessRestricted = 5,
  kExitIo = 6,
  kExitHook = 7,
  kExitLocked = 8,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return kExitFailure; }
};

// Violated precondition on a domain value (bad profile, bad params, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return kExitConfig; }
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return kExitIo; }
};

enum class ParseErrorKind {
  kMalformedHeader,
  kNonNumericSample,
  kBadIndex,
  kEmptyBody,
  kBadModel,
};

class ParseError : public Error {
 public:
  // line 0: the error is not tied to a line (model files).
  ParseError(ParseErrorKind kind, std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        kind_(kind),
        line_(line),
        detail_(what) {}

  ParseErrorKind kind() const noexcept { return kind_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }
  int exit_code() const noexcept override { return kExitParse; }

 private:
  ParseErrorKind kind_;
  std::size_t line_;
  std::string detail_;
};

// The frequency interface is masked (access-restriction countermeasure).
class AccessDenied : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return kExitAccessRestricted; }
};

// Read failure on a live source, or a replay that ran out of samples.
class SourceError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return kExitSource; }
};

class HookError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return kExitHook; }
};

class LockError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return kExitLocked; }
};

}  // namespace freqscope
