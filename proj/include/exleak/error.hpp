#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace exleak {

enum class ErrorCode {
  MissingFile,
  MalformedManifest,
  PayloadSizeMismatch,
  NonFiniteValue,
  IoError,
  ConfigInvalid,
  UnknownPreset,
  UnbalancedInput,
  CompositionMismatch,
  UnmappedExemplar,
  InvalidK,
  TooFewExemplars,
  IndexOutOfRange,
  SingleClassInput,
  ShapeMismatch,
  NonFiniteLoss,
  LengthMismatch,
  EmptyInput,
  DegenerateSample,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so
// callers (the CLI in particular) can map them onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::PayloadSizeMismatch: return "PayloadSizeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
    case ErrorCode::UnbalancedInput: return "UnbalancedInput";
    case ErrorCode::CompositionMismatch: return "CompositionMismatch";
    case ErrorCode::UnmappedExemplar: return "UnmappedExemplar";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::TooFewExemplars: return "TooFewExemplars";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::SingleClassInput: return "SingleClassInput";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
  }
  return "Unknown";
}

}  // namespace exleak
