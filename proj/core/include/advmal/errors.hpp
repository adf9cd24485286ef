#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace advmal {

/// Operand dimensions disagree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input text; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A configuration or argument combination that cannot be honored.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Checkpoint or dataset written by an incompatible format version, or a
/// checkpoint that does not match the dataset it is applied to.
class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace advmal
