// Shared error types for the milmine library.
#pragma once

#include <stdexcept>
#include <string>

namespace milmine {

// Raised when a corpus file cannot be parsed; carries the offending line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Raised when a parsed corpus violates a semantic invariant
// (e.g. sentence label inconsistent with its word labels).
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& what, int line = -1)
      : std::runtime_error(line >= 0
                               ? "line " + std::to_string(line) + ": " + what
                               : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MiningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace milmine
