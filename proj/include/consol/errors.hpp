#pragma once

#include <stdexcept>
#include <string>

namespace consol {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or violated preconditions (CLI exit code 2).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Solver or training failures: singular pivots, step underflow, divergence (exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Filesystem and file-format failures (exit code 4).
class IoError : public Error {
 public:
  using Error::Error;
};

/// A file-format failure attributable to one named field of a container.
class FormatError : public IoError {
 public:
  FormatError(std::string field, const std::string& what)
      : IoError(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace consol
