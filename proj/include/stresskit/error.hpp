#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stresskit {

enum class ErrorCode {
    // datamodel
    MissingLabelColumn,
    NonFiniteValue,
    EmptyDataset,
    DuplicateFeatureName,
    MalformedCsv,
    ClassTooSmall,
    InvalidSpec,
    InvalidDataset,
    // signal_features
    SeriesTooShort,
    ConstantSignal,
    WindowTooSmall,
    NonPositiveInput,
    MismatchedDuration,
    // resampling
    ClassTooSmallForK,
    UnknownClass,
    // feature_selection
    TooFewRows,
    AllFeaturesFiltered,
    // models
    SingleClassTraining,
    UnsupportedModel,
    WidthMismatch,
    InvalidParam,
    // evaluation
    LengthMismatch,
    LabelOutOfRange,
    EmptyMatrix,
    ClassSmallerThanK,
    AllCandidatesFailed,
    // pipeline
    InvalidConfig,
    SubjectTooSmall,
    SchemaViolation,
    Io,
};

/// Coarse grouping used by the CLI to choose an exit status.
enum class ErrorCategory { Config, Data, Stage };

ErrorCategory category_of(ErrorCode code) noexcept;
std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    [[nodiscard]] ErrorCategory category() const noexcept { return category_of(code_); }
    /// The message without the code prefix.
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace stresskit
