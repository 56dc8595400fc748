#include "dpool/error.hpp"

namespace dpool {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingPath: return "MissingPath";
    case ErrorKind::CorruptFrame: return "CorruptFrame";
    case ErrorKind::EmptySequence: return "EmptySequence";
    case ErrorKind::NonFiniteField: return "NonFiniteField";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::FrameOutOfRange: return "FrameOutOfRange";
    case ErrorKind::NoTrainingData: return "NoTrainingData";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFiniteFeature: return "NonFiniteFeature";
    case ErrorKind::NoForeground: return "NoForeground";
    case ErrorKind::TooFewFrames: return "TooFewFrames";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::MissingClassExamples: return "MissingClassExamples";
    case ErrorKind::MissingScores: return "MissingScores";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace dpool
