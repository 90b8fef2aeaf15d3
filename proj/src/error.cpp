#include "cycpl/error.hpp"

namespace cycpl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config: return "ConfigError";
    case ErrorCode::InvalidAttribute: return "InvalidAttribute";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::UnknownManufacturer: return "UnknownManufacturer";
    case ErrorCode::EmptyManufacturer: return "EmptyManufacturer";
    case ErrorCode::EmptyRoi: return "EmptyRoi";
    case ErrorCode::UnpairedSubjects: return "UnpairedSubjects";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::RangeEmpty: return "RangeEmpty";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::NonScalarLoss: return "NonScalarLoss";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::AllZeroDifferences: return "AllZeroDifferences";
  }
  return "Unknown";
}

ErrorClass classify(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config:
    case ErrorCode::InvalidAttribute:
      return ErrorClass::Config;
    case ErrorCode::NonScalarLoss:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::DegenerateRange:
    case ErrorCode::DegenerateSample:
    case ErrorCode::AllZeroDifferences:
      return ErrorClass::Numerical;
    default:
      return ErrorClass::Data;
  }
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace cycpl
