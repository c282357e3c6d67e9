#include "ecgdg/errors.hpp"

namespace ecgdg {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "malformed_header";
    case ErrorCode::UnsupportedLeadCount: return "unsupported_lead_count";
    case ErrorCode::SizeMismatch: return "size_mismatch";
    case ErrorCode::IoFailure: return "io_failure";
    case ErrorCode::EmptyDataset: return "empty_dataset";
    case ErrorCode::InvalidCutoff: return "invalid_cutoff";
    case ErrorCode::InvalidRate: return "invalid_rate";
    case ErrorCode::NonFiniteInput: return "non_finite_input";
    case ErrorCode::ShapeMismatch: return "shape_mismatch";
    case ErrorCode::EmptyTarget: return "empty_target";
    case ErrorCode::NotScalar: return "not_scalar";
    case ErrorCode::DetachedLoss: return "detached_loss";
    case ErrorCode::NoGradients: return "no_gradients";
    case ErrorCode::InvalidConfig: return "invalid_config";
    case ErrorCode::OutOfRange: return "out_of_range";
    case ErrorCode::EmptySplit: return "empty_split";
    case ErrorCode::DivergedLoss: return "diverged_loss";
    case ErrorCode::CheckpointMismatch: return "checkpoint_mismatch";
    case ErrorCode::EmptySource: return "empty_source";
    case ErrorCode::LabelMapMismatch: return "label_map_mismatch";
    case ErrorCode::UnknownClass: return "unknown_class";
    case ErrorCode::UnknownKey: return "unknown_key";
    case ErrorCode::UsageError: return "usage_error";
  }
  return "unknown_error";
}

}  // namespace ecgdg
