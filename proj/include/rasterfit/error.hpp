#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rasterfit {

enum class ErrorCode {
  InvalidScale,
  BadTemplateRef,
  NonPermutationZ,
  BadChannelRange,
  EmptyScene,
  InvalidConfig,
  UnknownKey,
  StaleSavedState,
  LengthMismatch,
  LayoutMismatch,
  InfeasibleDensity,
  ShapeMismatch,
  MissingAlphaTarget,
  IoError,
  DecodeError,
  UnsupportedFormat,
  VersionMismatch,
  CorruptScene,
  DegenerateBBox,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable error kind and, where relevant,
/// the index of the offending primitive.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> index = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
};

}  // namespace rasterfit
