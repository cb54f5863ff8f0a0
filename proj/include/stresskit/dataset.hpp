#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stresskit {

using Label = int;

/// Column naming for a feature matrix. Order of feature_names is the column order.
struct FeatureSchema {
    std::vector<std::string> feature_names;
    std::string label_name = "label";
    std::optional<std::string> subject_column;

    [[nodiscard]] std::size_t width() const noexcept { return feature_names.size(); }
    [[nodiscard]] std::optional<std::size_t> index_of(const std::string& name) const;

    /// Throws DuplicateFeatureName / InvalidDataset when the invariants do not hold.
    void validate() const;

    bool operator==(const FeatureSchema&) const = default;
};

/// Dense row-major feature matrix with integer class labels in [0, n_classes).
/// Immutable after construction; every transformation returns a new Dataset.
class Dataset {
public:
    Dataset(FeatureSchema schema, std::vector<double> values, std::vector<Label> labels,
            std::optional<std::vector<std::string>> subject_ids = std::nullopt,
            std::size_t n_classes = 0);

    [[nodiscard]] const FeatureSchema& schema() const noexcept { return schema_; }
    [[nodiscard]] std::size_t rows() const noexcept { return labels_.size(); }
    [[nodiscard]] std::size_t cols() const noexcept { return schema_.width(); }
    [[nodiscard]] std::size_t n_classes() const noexcept { return n_classes_; }

    [[nodiscard]] std::span<const double> row(std::size_t i) const {
        return {values_.data() + i * cols(), cols()};
    }
    [[nodiscard]] double at(std::size_t i, std::size_t j) const { return values_[i * cols() + j]; }
    [[nodiscard]] std::vector<double> column(std::size_t j) const;

    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
    [[nodiscard]] const std::vector<Label>& labels() const noexcept { return labels_; }
    [[nodiscard]] Label label(std::size_t i) const { return labels_[i]; }
    [[nodiscard]] const std::optional<std::vector<std::string>>& subject_ids() const noexcept {
        return subject_ids_;
    }
    [[nodiscard]] bool has_subjects() const noexcept { return subject_ids_.has_value(); }

    /// Rows in the given order; the class count is preserved even when a class vanishes.
    [[nodiscard]] Dataset subset_rows(std::span<const std::size_t> indices) const;
    [[nodiscard]] Dataset subset_columns(std::span<const std::size_t> columns) const;
    /// Keeps the named features, in schema order.
    [[nodiscard]] Dataset select_features(const std::vector<std::string>& names) const;
    /// Appends rows with the same schema; subject ids for new rows use `subject_fill`.
    [[nodiscard]] Dataset append_rows(std::span<const double> values, std::span<const Label> labels,
                                      const std::string& subject_fill = "synthetic") const;

    bool operator==(const Dataset&) const = default;

private:
    FeatureSchema schema_;
    std::vector<double> values_;
    std::vector<Label> labels_;
    std::optional<std::vector<std::string>> subject_ids_;
    std::size_t n_classes_ = 0;
};

struct SplitPair {
    Dataset train;
    Dataset test;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
    double ratio = 0.7;
    std::uint64_t seed = 0;
};

struct SynthSpec {
    std::size_t n_classes = 3;
    std::vector<std::size_t> class_counts{200, 200, 200};
    std::size_t n_informative = 10;
    std::size_t n_redundant = 0;
    std::size_t n_noise = 40;
    double class_separation = 3.0;
    std::uint64_t seed = 0;
    std::size_t n_subjects = 0;  // > 0 adds a subject_id column, rows dealt round-robin
};

/// Reads the canonical CSV. The label column may sit anywhere (by convention it is
/// last); a column named `subject_column` is read as string subject ids.
Dataset load_dataset(const std::filesystem::path& path, const std::string& label_column = "label",
                     const std::string& subject_column = "subject_id");

/// Writes subject id first (when present), then features, then the label.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

SplitPair stratified_split(const Dataset& ds, double train_fraction, std::uint64_t seed);

/// Count for every class id in [0, n_classes), including empty ones.
std::map<Label, std::size_t> class_histogram(const Dataset& ds);

Dataset generate_synthetic(const SynthSpec& spec);

}  // namespace stresskit
