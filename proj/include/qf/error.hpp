#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qf {

/// Base of every exception thrown by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CSV rows, duplicate keys, axes).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters passed to an operation (violated preconditions).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: non-finite loss, overflow, undefined objective.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Factor expression syntax/semantic error carrying the byte offset.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t offset)
      : Error(msg + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace qf
