#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cycpl {

enum class ErrorCode {
  // configuration / usage
  Config,
  InvalidAttribute,
  // data and file errors
  BadMagic,
  TruncatedFile,
  NonFinite,
  Io,
  ParseError,
  MissingField,
  DuplicateName,
  UnknownManufacturer,
  EmptyManufacturer,
  EmptyRoi,
  UnpairedSubjects,
  OutOfRange,
  RangeEmpty,
  ShapeMismatch,
  WindowTooLarge,
  // numerical failures
  NonScalarLoss,
  NonFiniteLoss,
  DegenerateRange,
  DegenerateSample,
  AllZeroDifferences,
};

std::string_view to_string(ErrorCode code);

/// Broad class of an error, used to pick a process exit code.
enum class ErrorClass { Config, Data, Numerical };

ErrorClass classify(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace cycpl
