#pragma once

#include <stdexcept>
#include <string>

namespace qcs {

/// Malformed data handed to an operation (dimension mismatch, non-finite
/// entries, inverted bounds).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration value outside its admissible range (delta <= 0, B < 1...).
class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative method failed: divergence, root-finding cap hit, etc.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidInput(what);
}

inline void require_config(bool cond, const std::string& what) {
  if (!cond) throw InvalidConfig(what);
}

}  // namespace detail
}  // namespace qcs
