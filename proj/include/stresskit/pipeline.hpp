#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stresskit/dataset.hpp"
#include "stresskit/evaluation.hpp"
#include "stresskit/models.hpp"
#include "stresskit/selection.hpp"

namespace stresskit::pipeline {

struct SmoteSettings {
    bool enabled = true;
    std::size_t k = 5;
    bool before_split = false;  // balance the whole dataset before splitting (leaks into test)
    bool standardize = false;
};

struct SelectionSettings {
    selection::Method method = selection::Method::coc_rfe;
    std::size_t n_target = 40;
    double correlation_threshold = 0.1;
    selection::FilterMode filter = selection::FilterMode::relevance;
    std::size_t step = 1;
    std::size_t mi_bins = 10;
};

struct ModelSettings {
    models::ModelKind kind = models::ModelKind::gb;
    bool tune = true;
    std::optional<evaluation::HyperParamGrid> grid;  // unset: built-in grid_set
    std::string grid_set = "table1";
    models::ParamMap params;  // fixed parameters, overridden by tuned ones
    std::size_t folds = 10;
};

struct PipelineConfig {
    std::optional<std::filesystem::path> input;  // unset: synthetic data from `synth`
    SynthSpec synth;
    std::string label_column = "label";
    std::string subject_column = "subject_id";
    std::uint64_t seed = 0;
    double train_fraction = 0.7;
    SmoteSettings smote;
    SelectionSettings selection;
    ModelSettings model;
    evaluation::Averaging averaging = evaluation::Averaging::macro;
    std::vector<std::size_t> sweep_counts{10, 20, 30, 40, 50};
    bool per_subject = true;  // only when the data carries subject ids
    bool loso = false;
    std::filesystem::path out_dir;  // empty: nothing written
};

/// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig config_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const PipelineConfig& cfg);
void validate(const PipelineConfig& cfg);

/// Reads the input CSV, or generates the synthetic set.
Dataset load_input(const PipelineConfig& cfg);

/// Grid for the configured model: the explicit one, else the named built-in set.
evaluation::HyperParamGrid resolve_grid(const PipelineConfig& cfg);

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct SubjectResult {
    std::string subject_id;
    std::size_t rows = 0;
    evaluation::EvaluationReport report;
};

struct SubjectReport {
    std::string protocol;  // "within_subject" or "loso"
    std::vector<SubjectResult> subjects;
    double mean_accuracy = 0.0;
};

struct PipelineReport {
    PipelineConfig config;
    std::string source;
    std::size_t rows = 0;
    std::size_t features = 0;
    std::size_t n_classes = 0;
    std::map<Label, std::size_t> histogram;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    std::map<Label, std::size_t> train_histogram;
    std::map<Label, std::size_t> test_histogram;
    std::map<Label, std::size_t> smote_before;
    std::map<Label, std::size_t> smote_after;
    std::optional<evaluation::GridSearchResult> grid;
    models::ParamMap params;
    evaluation::EvaluationReport baseline;  // tuned model on every feature
    selection::SelectionResult selection;
    std::vector<selection::SweepRow> sweep;
    evaluation::EvaluationReport final_report;
    std::optional<SubjectReport> per_subject;
    std::vector<StageTiming> timing;
};

/// Condition label for the plot files: imbalanced, balanced, tuned-imbalanced, tuned-balanced.
std::string condition_name(bool balanced, bool tuned);

/// The report document. Timing sits under its own key and is left out when
/// include_timing is false, which is the form compared for determinism.
nlohmann::ordered_json to_json(const PipelineReport& r, bool include_timing = true);

/// STEP I load, II split, III SMOTE, IV tune, V tuned baseline, VI select + sweep,
/// VII final fit and evaluation; then per-subject reports. Writes report.json,
/// metrics.csv and sweep.csv when out_dir is set. A failing stage aborts with its
/// name, and files already written by this run are removed.
PipelineReport run_pipeline(const PipelineConfig& cfg);

/// One stratified train/test evaluation per subject (or leave-one-subject-out),
/// using the configured model with `params` and the configured SMOTE setting.
SubjectReport per_subject_report(const PipelineConfig& cfg, const Dataset& ds, const models::ParamMap& params);

struct CompareCell {
    models::ModelKind kind = models::ModelKind::gb;
    std::string condition;  // imbalanced, balanced, tuned-balanced
    evaluation::EvaluationReport report;
    std::optional<evaluation::GridSearchResult> grid;
};

struct ComparisonTable {
    std::vector<CompareCell> cells;  // model-major, conditions in the order above
    std::size_t minority_class = 0;
};

/// For each kind: default parameters on the imbalanced training split, default
/// parameters on the SMOTE-balanced split, and grid-tuned parameters on the
/// balanced split, all scored on the same untouched test split.
ComparisonTable compare_models(const PipelineConfig& cfg, const Dataset& ds, const std::vector<models::ModelKind>& kinds);

nlohmann::ordered_json to_json(const ComparisonTable& t);

/// model,condition,stage,accuracy,precision,recall,f1 rows.
std::string metrics_csv(const PipelineReport& r);
std::string comparison_csv(const ComparisonTable& t);
/// method,count,accuracy,target_exceeds_survivors rows.
std::string sweep_csv(const std::string& method, const std::vector<selection::SweepRow>& rows);

/// Validates against the shipped report schema; throws SchemaViolation.
void validate_report(const nlohmann::ordered_json& report);

/// Writes text to path through a temporary file renamed into place.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace stresskit::pipeline
