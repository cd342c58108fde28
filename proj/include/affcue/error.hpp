#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace affcue {

enum class ErrorKind {
  InvalidArgument,
  EmptyAffordance,
  GenerationExhausted,
  NotAffordable,
  Unreachable,
  DemoFailed,
  FormatError,
  IOError,
  NoInteraction,
  InsufficientData,
  ShapeError,
  ConfigError,
  CheckpointError,
  UnknownVariant,
  NumericError,
};

std::string_view to_string(ErrorKind kind);

/// Every recoverable failure in the library is reported as an Error carrying
/// a kind, so callers (CLI, tests) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptyAffordance: return "EmptyAffordance";
    case ErrorKind::GenerationExhausted: return "GenerationExhausted";
    case ErrorKind::NotAffordable: return "NotAffordable";
    case ErrorKind::Unreachable: return "Unreachable";
    case ErrorKind::DemoFailed: return "DemoFailed";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::IOError: return "IOError";
    case ErrorKind::NoInteraction: return "NoInteraction";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::CheckpointError: return "CheckpointError";
    case ErrorKind::UnknownVariant: return "UnknownVariant";
    case ErrorKind::NumericError: return "NumericError";
  }
  return "Unknown";
}

}  // namespace affcue
