#pragma once

#include <stdexcept>
#include <string>

namespace sstempo {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kSuccess = 0,
  kConfiguration = 2,
  kData = 3,
  kNumerical = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept = 0;
};

/// Invalid parameters, inconsistent configuration, unsupported options.
class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kConfiguration; }
};

/// Caller violated an API precondition (shape mismatch, empty batch, ...).
class ContractError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kConfiguration; }
};

/// Input data is empty, too short, non-finite or otherwise unusable.
class DataError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

/// Unreadable or unsupported file format.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite loss, degenerate fits.
class NumericalError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumerical; }
};

class CalibrationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

[[noreturn]] void throw_io_error(const std::string& what, const std::string& path);

}  // namespace sstempo
