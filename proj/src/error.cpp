#include "covmeas/error.hpp"

namespace covmeas {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateRegion: return "DegenerateRegion";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::LayerNotSpacelike: return "LayerNotSpacelike";
    case ErrorCode::MasslessZeroMode: return "MasslessZeroMode";
    case ErrorCode::SupportOutsideLattice: return "SupportOutsideLattice";
    case ErrorCode::DimensionCap: return "DimensionCap";
    case ErrorCode::UnknownMode: return "UnknownMode";
    case ErrorCode::ModeLeakage: return "ModeLeakage";
    case ErrorCode::IncompleteFamily: return "IncompleteFamily";
    case ErrorCode::CausticSingularity: return "CausticSingularity";
    case ErrorCode::NotAProjector: return "NotAProjector";
    case ErrorCode::TieGroupNotCommuting: return "TieGroupNotCommuting";
    case ErrorCode::LayerCommutationViolation: return "LayerCommutationViolation";
    case ErrorCode::CompositionBinMismatch: return "CompositionBinMismatch";
    case ErrorCode::NotSpacelike: return "NotSpacelike";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

}  // namespace covmeas
