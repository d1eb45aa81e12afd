#include "rasterfit/error.hpp"

namespace rasterfit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidScale: return "InvalidScale";
    case ErrorCode::BadTemplateRef: return "BadTemplateRef";
    case ErrorCode::NonPermutationZ: return "NonPermutationZ";
    case ErrorCode::BadChannelRange: return "BadChannelRange";
    case ErrorCode::EmptyScene: return "EmptyScene";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::StaleSavedState: return "StaleSavedState";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::InfeasibleDensity: return "InfeasibleDensity";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MissingAlphaTarget: return "MissingAlphaTarget";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptScene: return "CorruptScene";
    case ErrorCode::DegenerateBBox: return "DegenerateBBox";
  }
  return "Unknown";
}

namespace {

std::string decorate(ErrorCode code, const std::string& message,
                     std::optional<std::size_t> index) {
  std::string out(to_string(code));
  if (index) out += " at index " + std::to_string(*index);
  if (!message.empty()) out += ": " + message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> index)
    : std::runtime_error(decorate(code, message, index)),
      code_(code),
      index_(index) {}

}  // namespace rasterfit
