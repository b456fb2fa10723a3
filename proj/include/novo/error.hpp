#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace novo {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments (CLI exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Inputs that violate a data contract (CLI exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed capture file. `line` is 1-based, `byte_offset` points at the
// start of the offending line.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, std::size_t byte_offset, const std::string& what)
      : DataError("line " + std::to_string(line) + " (byte " + std::to_string(byte_offset) +
                  "): " + what),
        line_(line),
        byte_offset_(byte_offset) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t line_;
  std::size_t byte_offset_;
};

}  // namespace novo
