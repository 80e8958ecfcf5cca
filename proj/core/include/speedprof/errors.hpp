#pragma once

#include <stdexcept>
#include <string>

namespace speedprof {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the documented domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid input data (unsorted times, mismatched lengths, duplicate rows...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A linear system or optimizer could not produce a solution.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), detail_(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }
  /// Message without the line suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::size_t line_;
};

/// Wraps a failure raised inside a named pipeline stage. `line()` carries a
/// ParseError's line through the wrapping.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what, std::size_t line = 0)
      : Error(stage + ": " + what), stage_(std::move(stage)), detail_(what), line_(line) {}
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string stage_;
  std::string detail_;
  std::size_t line_;
};

}  // namespace speedprof
