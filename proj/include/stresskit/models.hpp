#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "stresskit/dataset.hpp"
#include "stresskit/tree.hpp"

namespace stresskit::models {

enum class ModelKind { gb, rf, knn, lr, lda, svc };

ModelKind parse_kind(const std::string& name);
std::string to_string(ModelKind kind);
[[nodiscard]] bool is_tree_ensemble(ModelKind kind) noexcept;

using ParamValue = std::variant<double, std::string>;
using ParamMap = std::map<std::string, ParamValue>;

std::string to_string(const ParamValue& v);
nlohmann::ordered_json param_to_json(const ParamValue& v);
ParamValue param_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json params_to_json(const ParamMap& params);

struct ModelConfig {
    ModelKind kind = ModelKind::gb;
    ParamMap params;
    std::uint64_t seed = 0;

    [[nodiscard]] double number(const std::string& name) const;
    [[nodiscard]] std::size_t integer(const std::string& name) const;
    [[nodiscard]] const std::string& text(const std::string& name) const;
};

/// Defaults for every parameter a kind understands.
ParamMap default_params(ModelKind kind);

/// Rejects unknown names and out-of-domain values (InvalidParam).
void validate_params(ModelKind kind, const ParamMap& params);

/// Defaults overlaid with `overrides`, validated. Accepts a few spelling aliases
/// (rf n_estimators -> estimators, lr c / C -> c_value).
ModelConfig make_config(ModelKind kind, const ParamMap& overrides = {}, std::uint64_t seed = 0);

/// Desk-scale gradient boosting used for feature ranking: 100 trees, depth 3.
ModelConfig default_ranking_estimator(std::uint64_t seed = 0);

struct GbState {
    std::vector<double> init_scores;  // log class priors
    double learning_rate = 0.1;
    std::size_t iterations = 0;
    std::vector<Tree> trees;  // iteration-major, one tree per class per iteration
    std::vector<double> train_deviance;  // mean deviance before each iteration and after the last
};

struct RfState {
    std::vector<Tree> trees;  // leaf payload: class distribution
};

struct KnnState {
    std::vector<double> x;
    std::vector<Label> y;  // internal class index
    std::size_t k = 5;
    bool distance_weighted = false;
    double p = 2.0;  // 1 = manhattan, 2 = euclidean
};

struct LrState {
    std::vector<double> weights;  // classes x features
    std::vector<double> bias;
    std::size_t iterations = 0;
    double gradient_norm = 0.0;
    std::string solver_alias;
};

struct LdaState {
    std::vector<double> coef;  // classes x features, covariance pseudo-inverse times mean
    std::vector<double> intercept;
    std::string solver_alias;
};

using ModelState = std::variant<GbState, RfState, KnnState, LrState, LdaState>;

/// Fitted classifier. Internally trained on the classes present in the training data
/// (`classes`, ascending); probabilities are reported over all `n_classes` ids.
struct TrainedModel {
    ModelConfig config;
    std::size_t n_classes = 0;
    std::vector<Label> classes;
    std::vector<std::string> feature_names;
    std::string fingerprint;
    ModelState state;

    [[nodiscard]] std::size_t width() const noexcept { return feature_names.size(); }
};

std::string schema_fingerprint(const std::vector<std::string>& feature_names);

TrainedModel fit(const ModelConfig& cfg, const Dataset& train);

/// Row-stochastic matrix, rows x n_classes, row-major.
std::vector<double> predict_proba(const TrainedModel& model, std::span<const double> x, std::size_t rows);
std::vector<double> predict_proba(const TrainedModel& model, const Dataset& ds);

/// argmax of predict_proba; ties go to the smallest class id.
std::vector<Label> predict(const TrainedModel& model, std::span<const double> x, std::size_t rows);
std::vector<Label> predict(const TrainedModel& model, const Dataset& ds);

/// Total impurity decrease per feature over all trees, normalized to sum to 1
/// (all zeros when no split was made). UnsupportedModel for non-tree models.
std::vector<double> importance_scores(const TrainedModel& model);

nlohmann::ordered_json to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::ordered_json& j);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

// ---- losses shared by gradient boosting and logistic regression -------------------

/// Row-wise softmax of an n x k score matrix.
std::vector<double> softmax_rows(std::span<const double> scores, std::size_t k);

/// Mean multinomial deviance  -(1/n) sum_i log softmax(F_i)[y_i].
double multinomial_deviance(std::span<const double> scores, std::span<const Label> y, std::size_t k);

/// Gradient of multinomial_deviance with respect to the scores: (p - onehot(y)) / n.
std::vector<double> deviance_gradient(std::span<const double> scores, std::span<const Label> y, std::size_t k);

/// L2-penalized logistic objective mean CE + |W|^2 / (2 C n); bias unpenalized.
/// params = [W (k x d) row-major, b (k)]. Labels are internal class indices.
struct LogisticObjective {
    std::span<const double> x;
    std::span<const Label> y;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t classes = 0;
    double c_value = 1.0;

    double value(std::span<const double> params) const;
    double value_and_gradient(std::span<const double> params, std::vector<double>& grad) const;
};

}  // namespace stresskit::models
