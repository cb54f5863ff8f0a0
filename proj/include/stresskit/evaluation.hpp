#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stresskit/dataset.hpp"
#include "stresskit/models.hpp"

namespace stresskit::evaluation {

/// counts[true][pred], row-major C x C.
struct ConfusionMatrix {
    std::size_t n_classes = 0;
    std::vector<std::size_t> counts;

    [[nodiscard]] std::size_t at(std::size_t truth, std::size_t pred) const { return counts[truth * n_classes + pred]; }
    [[nodiscard]] std::size_t total() const;
    [[nodiscard]] std::size_t trace() const;
};

ConfusionMatrix confusion(std::span<const Label> y_true, std::span<const Label> y_pred, std::size_t n_classes);

enum class Averaging { macro, weighted };
Averaging parse_averaging(const std::string& name);
std::string to_string(Averaging a);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
    bool precision_undefined = false;  // no predictions of this class
    bool recall_undefined = false;     // no true samples of this class
};

struct AveragedMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvaluationReport {
    double accuracy = 0.0;
    Averaging averaging = Averaging::macro;
    AveragedMetrics headline;  // the averaging selected above
    AveragedMetrics macro;
    AveragedMetrics weighted;
    std::vector<ClassMetrics> per_class;
    ConfusionMatrix matrix;
};

/// Accuracy, per-class precision/recall/F1 and both averages. Classes with a zero
/// denominator score 0 and are flagged.
EvaluationReport metrics(const ConfusionMatrix& cm, Averaging averaging = Averaging::macro);

nlohmann::ordered_json to_json(const EvaluationReport& r);

double accuracy(std::span<const Label> y_true, std::span<const Label> y_pred);

/// k stratified folds (sorted index lists). Samples of each class are shuffled and
/// dealt round-robin, continuing the deal across classes, so every class count and
/// every fold size differ by at most one between folds.
std::vector<std::vector<std::size_t>> kfold_indices(std::span<const Label> labels, std::size_t k, std::uint64_t seed);

/// Complement of fold `f` in [0, n).
std::vector<std::size_t> fold_complement(const std::vector<std::vector<std::size_t>>& folds, std::size_t f);

/// Mean k-fold accuracy of `cfg` on `data`, with the per-fold values.
std::pair<double, std::vector<double>> cross_val_accuracy(const models::ModelConfig& cfg, const Dataset& data,
                                                          const std::vector<std::vector<std::size_t>>& folds);

/// Named candidate lists, iterated in the order given.
struct HyperParamGrid {
    std::vector<std::pair<std::string, std::vector<models::ParamValue>>> axes;

    [[nodiscard]] std::size_t size() const;
    /// Cartesian product; the first axis varies slowest.
    [[nodiscard]] std::vector<models::ParamMap> candidates() const;
};

HyperParamGrid grid_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const HyperParamGrid& g);

/// Checks axis names and every candidate against the kind's parameter domains.
void validate_grid(models::ModelKind kind, const HyperParamGrid& grid);

/// Built-in grids: set "table1" holds the published axes, "desk" a small variant.
HyperParamGrid builtin_grid(models::ModelKind kind, const std::string& set = "table1");

struct GridCandidate {
    models::ParamMap params;
    std::vector<double> fold_accuracies;
    double mean = 0.0;
    bool failed = false;
    std::string error;
};

struct GridSearchResult {
    models::ModelKind kind = models::ModelKind::gb;
    models::ParamMap best_params;
    double best_cv_accuracy = 0.0;
    std::size_t best_index = 0;
    std::vector<GridCandidate> table;
    std::size_t folds = 0;
};

nlohmann::ordered_json to_json(const GridSearchResult& r);

/// Exhaustive search scored by mean stratified k-fold accuracy on `train`.
/// Failed candidates are recorded and skipped; ties keep the earliest candidate.
GridSearchResult grid_search(models::ModelKind kind, const HyperParamGrid& grid, const Dataset& train, std::size_t k,
                             std::uint64_t seed, const models::ParamMap& fixed = {});

}  // namespace stresskit::evaluation
