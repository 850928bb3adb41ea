#pragma once

#include <stdexcept>
#include <string>

namespace kdqa {

// Bad argument to an operation (shape mismatch, out-of-range index, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation called in a state that cannot satisfy it (e.g. optimizer step
// without gradients).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed input file or record.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent run configuration, detected before any work starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(const std::string& what, double best_wer)
      : std::runtime_error(what), best_wer_(best_wer) {}
  double best_wer() const noexcept { return best_wer_; }

 private:
  double best_wer_;
};

}  // namespace kdqa
