#pragma once

#include <stdexcept>
#include <string>

namespace latlex {

enum class ErrorKind {
  DimensionMismatch,
  NotPositiveDefinite,
  DegenerateInput,
  ConvergenceFailure,
  InvalidConfig,
  UnknownLayer,
  NonFinite,
  EmptyResult,
  InsufficientReferences,
  UnresolvedDirection,
  EmptyVocabulary,
  UnknownToken,
  VocabularyTooSmall,
  Io,
  Parse,
};

const char* to_string(ErrorKind kind);

/// Every recoverable failure in the library is an Error carrying a kind, so
/// callers (the CLI in particular) can map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::UnknownLayer: return "UnknownLayer";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::EmptyResult: return "EmptyResult";
    case ErrorKind::InsufficientReferences: return "InsufficientReferences";
    case ErrorKind::UnresolvedDirection: return "UnresolvedDirection";
    case ErrorKind::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorKind::UnknownToken: return "UnknownToken";
    case ErrorKind::VocabularyTooSmall: return "VocabularyTooSmall";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Parse: return "Parse";
  }
  return "Unknown";
}

}  // namespace latlex
