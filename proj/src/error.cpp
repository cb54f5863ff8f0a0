#include "stresskit/error.hpp"

namespace stresskit {

ErrorCategory category_of(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidSpec:
        case ErrorCode::InvalidParam:
        case ErrorCode::UnsupportedModel:
        case ErrorCode::InvalidConfig:
            return ErrorCategory::Config;
        case ErrorCode::MissingLabelColumn:
        case ErrorCode::NonFiniteValue:
        case ErrorCode::EmptyDataset:
        case ErrorCode::DuplicateFeatureName:
        case ErrorCode::MalformedCsv:
        case ErrorCode::InvalidDataset:
        case ErrorCode::SeriesTooShort:
        case ErrorCode::MismatchedDuration:
        case ErrorCode::Io:
            return ErrorCategory::Data;
        default:
            return ErrorCategory::Stage;
    }
}

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MissingLabelColumn: return "MissingLabelColumn";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::DuplicateFeatureName: return "DuplicateFeatureName";
        case ErrorCode::MalformedCsv: return "MalformedCsv";
        case ErrorCode::ClassTooSmall: return "ClassTooSmall";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::InvalidDataset: return "InvalidDataset";
        case ErrorCode::SeriesTooShort: return "SeriesTooShort";
        case ErrorCode::ConstantSignal: return "ConstantSignal";
        case ErrorCode::WindowTooSmall: return "WindowTooSmall";
        case ErrorCode::NonPositiveInput: return "NonPositiveInput";
        case ErrorCode::MismatchedDuration: return "MismatchedDuration";
        case ErrorCode::ClassTooSmallForK: return "ClassTooSmallForK";
        case ErrorCode::UnknownClass: return "UnknownClass";
        case ErrorCode::TooFewRows: return "TooFewRows";
        case ErrorCode::AllFeaturesFiltered: return "AllFeaturesFiltered";
        case ErrorCode::SingleClassTraining: return "SingleClassTraining";
        case ErrorCode::UnsupportedModel: return "UnsupportedModel";
        case ErrorCode::WidthMismatch: return "WidthMismatch";
        case ErrorCode::InvalidParam: return "InvalidParam";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
        case ErrorCode::EmptyMatrix: return "EmptyMatrix";
        case ErrorCode::ClassSmallerThanK: return "ClassSmallerThanK";
        case ErrorCode::AllCandidatesFailed: return "AllCandidatesFailed";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::SubjectTooSmall: return "SubjectTooSmall";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace stresskit
