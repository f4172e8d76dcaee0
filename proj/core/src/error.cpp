#include "tlsmap/error.hpp"

namespace tlsmap {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kFormat: return "Format";
    case ErrorCode::kEmptyFingerprint: return "EmptyFingerprint";
    case ErrorCode::kMalformedSegment: return "MalformedSegment";
    case ErrorCode::kEmptyCapture: return "EmptyCapture";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kUnknownToken: return "UnknownToken";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyIndex: return "EmptyIndex";
    case ErrorCode::kIndexNotBuilt: return "IndexNotBuilt";
    case ErrorCode::kUnknownId: return "UnknownId";
    case ErrorCode::kAlignment: return "Alignment";
    case ErrorCode::kEmptySelection: return "EmptySelection";
    case ErrorCode::kUnknownDomain: return "UnknownDomain";
    case ErrorCode::kConfig: return "Config";
    case ErrorCode::kStage: return "Stage";
  }
  return "Unknown";
}

}  // namespace tlsmap
