#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dpool {

enum class ErrorKind {
  MissingPath,
  CorruptFrame,
  EmptySequence,
  NonFiniteField,
  IoFailure,
  FrameOutOfRange,
  NoTrainingData,
  DimensionMismatch,
  NonFiniteFeature,
  NoForeground,
  TooFewFrames,
  ZeroVector,
  LengthMismatch,
  EmptyInput,
  MissingClassExamples,
  MissingScores,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/// Every failure the library reports. The kind is stable and is what the CLI
/// and the encode manifest record; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace dpool
