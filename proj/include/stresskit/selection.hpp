#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stresskit/dataset.hpp"
#include "stresskit/models.hpp"

namespace stresskit::selection {

enum class Method { anova_f, mutual_info, rfe, correlation, feature_importance, coc_rfe };

Method parse_method(const std::string& name);  // accepts "coc-rfe" and "coc_rfe" spellings
std::string to_string(Method m);

/// How the correlation stage of CoC-RFE reads its threshold.
enum class FilterMode {
    relevance,   // drop features whose |corr(feature, label)| < threshold
    redundancy,  // drop the weaker feature of every pair with |corr| > threshold
};

FilterMode parse_filter(const std::string& name);
std::string to_string(FilterMode m);

struct SelectionConfig {
    std::size_t n_target = 40;
    double correlation_threshold = 0.1;
    models::ModelConfig estimator = models::default_ranking_estimator();
    std::size_t step = 1;
    std::uint64_t seed = 0;
    FilterMode filter = FilterMode::relevance;
    std::size_t mi_bins = 10;
};

struct DroppedFeature {
    std::string name;
    double score = 0.0;  // C_f at the time of filtering
};

struct SelectionResult {
    Method method = Method::coc_rfe;
    std::vector<std::string> selected;           // schema order
    std::vector<std::string> ranking;            // best first, over every feature considered
    std::vector<std::string> elimination_order;  // first removed first
    std::vector<DroppedFeature> filter_dropped;
    /// Set when fewer features survived the filter than requested.
    bool target_exceeds_survivors = false;

    bool operator==(const SelectionResult&) const;
};

nlohmann::ordered_json to_json(const SelectionResult& r);

/// Pearson correlation matrix of the feature columns, row-major cols x cols.
/// Zero-variance columns correlate 0 with everything else and 1 with themselves.
std::vector<double> correlation_matrix(const Dataset& ds);

/// |Pearson(feature, integer label)| per feature.
std::vector<double> feature_target_scores(const Dataset& ds);

/// One-way ANOVA F per feature; +infinity when within-class variance is zero but
/// class means differ, 0 when both are zero.
std::vector<double> anova_f_scores(const Dataset& ds);

/// Mutual information (nats) between each quantile-binned feature and the label.
std::vector<double> mutual_info_scores(const Dataset& ds, std::size_t n_bins = 10);

/// Recursive elimination driven by the estimator's importance scores.
SelectionResult rfe(const Dataset& ds, const models::ModelConfig& estimator, std::size_t n_target,
                    std::size_t step = 1, std::uint64_t seed = 0);

/// Correlation filter followed by recursive elimination.
SelectionResult coc_rfe(const Dataset& ds, const SelectionConfig& cfg);

/// Dispatches on method; score-based methods keep the top n_target by score.
SelectionResult select_features(const Dataset& ds, Method method, const SelectionConfig& cfg);

struct EvalProtocol {
    enum class Kind { holdout, cv } kind = Kind::holdout;
    double train_fraction = 0.7;
    std::size_t folds = 10;
    std::uint64_t seed = 0;
    bool smote_train = false;  // balance the training part before selection and fitting
    std::size_t smote_k = 5;
};

struct SweepRow {
    std::size_t count = 0;
    double accuracy = 0.0;
    std::vector<std::string> selected;
    bool target_exceeds_survivors = false;
};

/// For each count: select on the training part, fit `estimator` on the selected
/// columns, and score accuracy on the held-out part. Rows follow `counts` order.
std::vector<SweepRow> sweep(const Dataset& ds, Method method, const std::vector<std::size_t>& counts,
                            const models::ModelConfig& estimator, const EvalProtocol& protocol,
                            const SelectionConfig& base = {});

/// Same as sweep but on a caller-provided train/test pair.
std::vector<SweepRow> sweep_holdout(const Dataset& train, const Dataset& test, Method method,
                                    const std::vector<std::size_t>& counts, const models::ModelConfig& estimator,
                                    const SelectionConfig& base = {});

}  // namespace stresskit::selection
