#pragma once

#include <stdexcept>
#include <string>

namespace psr {

/// Shape or size contract violated by an operation's inputs.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent model or generator configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed labels or samples (empty masks, out-of-range ranks).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-aligned inputs (masks vs. partition rows) disagree in length.
class AlignmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scene placement failed; the message carries the seed.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset or checkpoint could not be read back.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reverse-mode gradient produced a non-finite value.
class GradCheckError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace psr
