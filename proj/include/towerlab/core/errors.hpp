#pragma once

#include <stdexcept>
#include <string>

namespace towerlab {

// Invalid configuration: bad shapes, unsatisfiable layer chains, malformed
// config files. The CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse: backward before forward, stepping a finished episode,
// non-normalized probability vectors.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Numerical failure during optimization (NaN/Inf in losses or gradients).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed binary or text input. Carries the byte offset where parsing
// stopped when it is known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long long offset = -1)
      : std::runtime_error(offset >= 0 ? what + " (at byte offset " + std::to_string(offset) + ")" : what),
        offset_(offset) {}
  long long offset() const noexcept { return offset_; }

 private:
  long long offset_;
};

// File system failures (cannot open, short write). Exit code 1.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InternalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace towerlab
