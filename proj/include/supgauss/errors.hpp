#pragma once

#include <stdexcept>
#include <string>

namespace supgauss {

/// Raised when an argument violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a numerical procedure cannot produce a trustworthy result
/// (for example, a covariance that stays indefinite after the largest ridge).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace supgauss
