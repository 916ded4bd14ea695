#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tod {

// Malformed configuration: bad dims, inconsistent detector ids, non-positive
// latency or fps, missing cost entries.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed MOT text input. Line and column are 1-based; column 0 means the
// row as a whole.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error("line " + std::to_string(line) +
                           (column ? ", column " + std::to_string(column) : std::string{}) +
                           ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace tod
