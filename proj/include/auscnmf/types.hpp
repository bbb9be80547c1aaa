#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace auscnmf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Entry floor applied to every factor after initialization and after each update.
inline constexpr double kFloor = 1e-12;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed data that violates an operation's precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A configuration object failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared during an iterative computation.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, int iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

/// Unsupported or malformed file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written, or ended early.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace auscnmf
