#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pathagg {

enum class ErrorKind {
  kInvalidConfiguration,
  kInvalidInput,
  kDecodeFailure,
  kParse,
  kIncompatibleVersion,
  kCapacity,
  kGeneration,
  kTraining,
};

std::string_view to_string(ErrorKind kind);

// Base class for every error raised by the library. The kind is stable and
// is what the CLI reports in its machine-readable error line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidConfiguration : public Error {
 public:
  explicit InvalidConfiguration(const std::string& message)
      : Error(ErrorKind::kInvalidConfiguration, message) {}
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& message) : Error(ErrorKind::kInvalidInput, message) {}
};

class DecodeFailure : public Error {
 public:
  explicit DecodeFailure(const std::string& message) : Error(ErrorKind::kDecodeFailure, message) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorKind::kParse, "line " + std::to_string(line) + ": " + message), line_(line) {}

  // 1-based; 0 when the error is not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IncompatibleVersion : public Error {
 public:
  explicit IncompatibleVersion(const std::string& message)
      : Error(ErrorKind::kIncompatibleVersion, message) {}
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& message) : Error(ErrorKind::kCapacity, message) {}
};

class GenerationError : public Error {
 public:
  explicit GenerationError(const std::string& message) : Error(ErrorKind::kGeneration, message) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& message) : Error(ErrorKind::kTraining, message) {}
};

// Rethrows `error` as the same concrete type with `context` prepended to
// its message.
[[noreturn]] void rethrow_with_context(const Error& error, const std::string& context);

}  // namespace pathagg
