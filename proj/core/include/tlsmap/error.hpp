#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tlsmap {

enum class ErrorCode {
  kUnknownLabel,
  kIo,
  kFormat,
  kEmptyFingerprint,
  kMalformedSegment,
  kEmptyCapture,
  kEmptyDataset,
  kUnknownToken,
  kLengthMismatch,
  kEmptyIndex,
  kIndexNotBuilt,
  kUnknownId,
  kAlignment,
  kEmptySelection,
  kUnknownDomain,
  kConfig,
  kStage,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a code so callers (and tests)
// can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by parse_raw; index is the zero-based segment position.
class MalformedSegmentError : public Error {
 public:
  MalformedSegmentError(std::size_t index, const std::string& message)
      : Error(ErrorCode::kMalformedSegment, message), index_(index) {}

  std::size_t segment_index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// Wraps an error raised inside a pipeline stage with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, ErrorCode inner, const std::string& message)
      : Error(ErrorCode::kStage, stage + ": " + message),
        stage_(std::move(stage)),
        inner_(inner) {}

  const std::string& stage() const noexcept { return stage_; }
  ErrorCode inner_code() const noexcept { return inner_; }

 private:
  std::string stage_;
  ErrorCode inner_;
};

}  // namespace tlsmap
