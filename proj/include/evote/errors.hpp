#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace evote {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad hex, empty document, invalid template, unknown candidate.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Strict-grammar failure; `token()` is the first offending token.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& message, std::string token)
      : ValidationError(message), token_(std::move(token)) {}
  const std::string& token() const noexcept { return token_; }

 private:
  std::string token_;
};

/// A chain or persisted state violates its hash/link invariants.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class AuthorizationError : public Error {
 public:
  using Error::Error;
};

class DuplicateVoteError : public Error {
 public:
  using Error::Error;
};

class AlreadyRegisteredError : public Error {
 public:
  using Error::Error;
};

/// Quorum did not reach the commit threshold.
class RejectedError : public Error {
 public:
  RejectedError(const std::string& message, std::vector<std::string> reasons)
      : Error(message), reasons_(std::move(reasons)) {}
  const std::vector<std::string>& reasons() const noexcept { return reasons_; }

 private:
  std::vector<std::string> reasons_;
};

class StorageError : public Error {
 public:
  using Error::Error;
};

/// Load-time corruption, carrying the offending file and 1-based line (0 if n/a).
class LoadError : public IntegrityError {
 public:
  LoadError(const std::string& file, std::size_t line, const std::string& what)
      : IntegrityError(file + (line ? ":" + std::to_string(line) : std::string{}) + ": " + what),
        file_(file),
        line_(line) {}
  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace evote
