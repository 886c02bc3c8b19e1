#ifndef QDBLINK_ERROR_HPP
#define QDBLINK_ERROR_HPP

#include <stdexcept>
#include <string>

namespace qdb {

// Exit codes used by the command-line front end.
enum class ExitCode : int {
  kSuccess = 0,
  kValidation = 2,
  kNumerical = 3,
  kIo = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept = 0;
};

/// Bad input: violated preconditions, malformed configuration, unknown keys.
class ValidationError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kValidation; }
};

/// A computation could not produce a meaningful answer (degenerate data,
/// non-convergence, singular systems).
class NumericalError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumerical; }
};

class IoError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kIo; }
};

}  // namespace qdb

#endif  // QDBLINK_ERROR_HPP
