#pragma once

#include <stdexcept>
#include <string>

namespace bevfuse {

/// Malformed input file (schema violation, bad field). Message carries the
/// offending path/line where available.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Semantically invalid data or configuration (bad preset name, non-monotone
/// timestamps, unknown method).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerically degenerate filter step (non-PSD innovation covariance).
class FilterDegenerateError : public std::runtime_error {
 public:
  explicit FilterDegenerateError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bevfuse
