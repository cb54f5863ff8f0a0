#include "stresskit/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include "stresskit/error.hpp"
#include "stresskit/parallel.hpp"
#include "stresskit/random.hpp"
#include "stresskit/resources.hpp"

namespace stresskit::evaluation {

using nlohmann::ordered_json;

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::trace() const {
    std::size_t t = 0;
    for (std::size_t c = 0; c < n_classes; ++c) t += at(c, c);
    return t;
}

ConfusionMatrix confusion(std::span<const Label> y_true, std::span<const Label> y_pred, std::size_t n_classes) {
    if (y_true.size() != y_pred.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(y_true.size()) + " true labels vs " +
                                                   std::to_string(y_pred.size()) + " predictions");
    }
    ConfusionMatrix cm{n_classes, std::vector<std::size_t>(n_classes * n_classes, 0)};
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const Label t = y_true[i];
        const Label p = y_pred[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes || static_cast<std::size_t>(p) >= n_classes) {
            throw Error(ErrorCode::LabelOutOfRange, "label outside [0, " + std::to_string(n_classes) + ") at position " +
                                                        std::to_string(i));
        }
        ++cm.counts[static_cast<std::size_t>(t) * n_classes + static_cast<std::size_t>(p)];
    }
    return cm;
}

Averaging parse_averaging(const std::string& name) {
    if (name == "macro") return Averaging::macro;
    if (name == "weighted") return Averaging::weighted;
    throw Error(ErrorCode::InvalidConfig, "averaging must be 'macro' or 'weighted', got '" + name + "'");
}

std::string to_string(Averaging a) { return a == Averaging::macro ? "macro" : "weighted"; }

EvaluationReport metrics(const ConfusionMatrix& cm, Averaging averaging) {
    const std::size_t total = cm.total();
    if (total == 0) throw Error(ErrorCode::EmptyMatrix, "confusion matrix holds no samples");
    const std::size_t c_count = cm.n_classes;
    EvaluationReport r;
    r.averaging = averaging;
    r.matrix = cm;
    r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
    r.per_class.resize(c_count);
    for (std::size_t c = 0; c < c_count; ++c) {
        std::size_t row = 0;
        std::size_t col = 0;
        for (std::size_t o = 0; o < c_count; ++o) {
            row += cm.at(c, o);
            col += cm.at(o, c);
        }
        auto& m = r.per_class[c];
        const auto tp = static_cast<double>(cm.at(c, c));
        m.support = row;
        m.precision_undefined = col == 0;
        m.recall_undefined = row == 0;
        m.precision = col == 0 ? 0.0 : tp / static_cast<double>(col);
        m.recall = row == 0 ? 0.0 : tp / static_cast<double>(row);
        m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    }
    for (const auto& m : r.per_class) {
        const double w = static_cast<double>(m.support) / static_cast<double>(total);
        r.macro.precision += m.precision / static_cast<double>(c_count);
        r.macro.recall += m.recall / static_cast<double>(c_count);
        r.macro.f1 += m.f1 / static_cast<double>(c_count);
        r.weighted.precision += w * m.precision;
        r.weighted.recall += w * m.recall;
        r.weighted.f1 += w * m.f1;
    }
    r.headline = averaging == Averaging::macro ? r.macro : r.weighted;
    return r;
}

ordered_json to_json(const EvaluationReport& r) {
    auto avg = [](const AveragedMetrics& a) {
        return ordered_json{{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}};
    };
    ordered_json per_class = ordered_json::array();
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& m = r.per_class[c];
        per_class.push_back({{"class", c},
                             {"precision", m.precision},
                             {"recall", m.recall},
                             {"f1", m.f1},
                             {"support", m.support},
                             {"precision_undefined", m.precision_undefined},
                             {"recall_undefined", m.recall_undefined}});
    }
    ordered_json matrix = ordered_json::array();
    for (std::size_t t = 0; t < r.matrix.n_classes; ++t) {
        ordered_json row = ordered_json::array();
        for (std::size_t p = 0; p < r.matrix.n_classes; ++p) row.push_back(r.matrix.at(t, p));
        matrix.push_back(std::move(row));
    }
    return {{"accuracy", r.accuracy},
            {"averaging", to_string(r.averaging)},
            {"precision", r.headline.precision},
            {"recall", r.headline.recall},
            {"f1", r.headline.f1},
            {"macro", avg(r.macro)},
            {"weighted", avg(r.weighted)},
            {"per_class", per_class},
            {"confusion_matrix", matrix}};
}

double accuracy(std::span<const Label> y_true, std::span<const Label> y_pred) {
    if (y_true.size() != y_pred.size()) throw Error(ErrorCode::LengthMismatch, "label vectors differ in length");
    if (y_true.empty()) throw Error(ErrorCode::EmptyMatrix, "no samples to score");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) hit += y_true[i] == y_pred[i];
    return static_cast<double>(hit) / static_cast<double>(y_true.size());
}

std::vector<std::vector<std::size_t>> kfold_indices(std::span<const Label> labels, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorCode::InvalidConfig, "k must be at least 2");
    Label max_label = -1;
    for (Label y : labels) max_label = std::max(max_label, y);
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label + 1));
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);

    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t next = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& members = by_class[c];
        if (members.empty()) continue;
        if (members.size() < k) {
            throw Error(ErrorCode::ClassSmallerThanK, "class " + std::to_string(c) + " has " +
                                                          std::to_string(members.size()) + " samples for " +
                                                          std::to_string(k) + " folds");
        }
        Rng rng(derive_seed(seed, c));
        rng.shuffle(members);
        for (std::size_t i : members) {
            folds[next].push_back(i);
            next = (next + 1) % k;
        }
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

std::vector<std::size_t> fold_complement(const std::vector<std::vector<std::size_t>>& folds, std::size_t f) {
    std::vector<std::size_t> out;
    for (std::size_t g = 0; g < folds.size(); ++g) {
        if (g != f) out.insert(out.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::pair<double, std::vector<double>> cross_val_accuracy(const models::ModelConfig& cfg, const Dataset& data,
                                                          const std::vector<std::vector<std::size_t>>& folds) {
    std::vector<double> acc(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto train_idx = fold_complement(folds, f);
        const auto model = models::fit(cfg, data.subset_rows(train_idx));
        const auto held = data.subset_rows(folds[f]);
        acc[f] = accuracy(held.labels(), models::predict(model, held));
    }
    double mean = 0.0;
    for (double a : acc) mean += a;
    return {mean / static_cast<double>(acc.size()), acc};
}

// ---------------------------------------------------------------------------------------
// grids

std::size_t HyperParamGrid::size() const {
    std::size_t n = axes.empty() ? 0 : 1;
    for (const auto& [name, values] : axes) n *= values.size();
    return n;
}

std::vector<models::ParamMap> HyperParamGrid::candidates() const {
    std::vector<models::ParamMap> out;
    const std::size_t total = size();
    out.reserve(total);
    for (std::size_t idx = 0; idx < total; ++idx) {
        models::ParamMap p;
        std::size_t rest = idx;
        for (std::size_t a = axes.size(); a-- > 0;) {
            const auto& [name, values] = axes[a];
            p[name] = values[rest % values.size()];
            rest /= values.size();
        }
        out.push_back(std::move(p));
    }
    return out;
}

HyperParamGrid grid_from_json(const ordered_json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "grid must be a JSON object of axis -> list");
    HyperParamGrid g;
    for (const auto& [name, values] : j.items()) {
        if (!values.is_array() || values.empty()) {
            throw Error(ErrorCode::InvalidConfig, "grid axis '" + name + "' must be a non-empty list");
        }
        std::vector<models::ParamValue> vs;
        for (const auto& v : values) vs.push_back(models::param_from_json(v));
        g.axes.emplace_back(name, std::move(vs));
    }
    if (g.axes.empty()) throw Error(ErrorCode::InvalidConfig, "grid has no axes");
    return g;
}

ordered_json to_json(const HyperParamGrid& g) {
    ordered_json j = ordered_json::object();
    for (const auto& [name, values] : g.axes) {
        ordered_json arr = ordered_json::array();
        for (const auto& v : values) arr.push_back(models::param_to_json(v));
        j[name] = std::move(arr);
    }
    return j;
}

void validate_grid(models::ModelKind kind, const HyperParamGrid& grid) {
    if (grid.axes.empty()) throw Error(ErrorCode::InvalidConfig, "grid has no axes");
    for (const auto& [name, values] : grid.axes) {
        if (values.empty()) throw Error(ErrorCode::InvalidConfig, "grid axis '" + name + "' is empty");
        for (const auto& v : values) models::make_config(kind, {{name, v}});
    }
}

HyperParamGrid builtin_grid(models::ModelKind kind, const std::string& set) {
    static const ordered_json all = ordered_json::parse(resources::default_grids());
    const auto& sets = all.at("sets");
    if (!sets.contains(set)) throw Error(ErrorCode::InvalidConfig, "no built-in grid set '" + set + "'");
    return grid_from_json(sets.at(set).at(models::to_string(kind)));
}

ordered_json to_json(const GridSearchResult& r) {
    ordered_json table = ordered_json::array();
    for (const auto& c : r.table) {
        ordered_json row{{"params", models::params_to_json(c.params)},
                         {"fold_accuracies", c.fold_accuracies},
                         {"cv_mean", c.mean},
                         {"failed", c.failed}};
        if (c.failed) row["error"] = c.error;
        table.push_back(std::move(row));
    }
    return {{"model", models::to_string(r.kind)},
            {"folds", r.folds},
            {"candidates", r.table.size()},
            {"best_index", r.best_index},
            {"best_params", models::params_to_json(r.best_params)},
            {"best_cv_accuracy", r.best_cv_accuracy},
            {"provenance", "cv_mean"},
            {"table", table}};
}

GridSearchResult grid_search(models::ModelKind kind, const HyperParamGrid& grid, const Dataset& train, std::size_t k,
                             std::uint64_t seed, const models::ParamMap& fixed) {
    if (grid.axes.empty()) throw Error(ErrorCode::InvalidConfig, "grid has no axes");
    const auto folds = kfold_indices(train.labels(), k, seed);
    const auto params = grid.candidates();

    GridSearchResult result;
    result.kind = kind;
    result.folds = k;
    result.table.resize(params.size());
    for (std::size_t c = 0; c < params.size(); ++c) {
        result.table[c].params = params[c];
        result.table[c].fold_accuracies.assign(k, 0.0);
    }
    std::vector<std::string> errors(params.size() * k);
    std::vector<char> failed(params.size() * k, 0);

    std::vector<Dataset> fold_train;
    std::vector<Dataset> fold_test;
    for (std::size_t f = 0; f < k; ++f) {
        fold_train.push_back(train.subset_rows(fold_complement(folds, f)));
        fold_test.push_back(train.subset_rows(folds[f]));
    }
    parallel_for(params.size() * k, [&](std::size_t task) {
        const std::size_t c = task / k;
        const std::size_t f = task % k;
        try {
            models::ParamMap p = fixed;
            for (const auto& [name, v] : params[c]) p[name] = v;
            const auto cfg = models::make_config(kind, p, seed);
            const auto model = models::fit(cfg, fold_train[f]);
            result.table[c].fold_accuracies[f] = accuracy(fold_test[f].labels(), models::predict(model, fold_test[f]));
        } catch (const std::exception& e) {
            failed[task] = 1;
            errors[task] = e.what();
        }
    });

    bool any = false;
    for (std::size_t c = 0; c < params.size(); ++c) {
        auto& row = result.table[c];
        for (std::size_t f = 0; f < k; ++f) {
            if (failed[c * k + f] && !row.failed) {
                row.failed = true;
                row.error = errors[c * k + f];
            }
        }
        if (row.failed) {
            row.fold_accuracies.clear();
            continue;
        }
        double sum = 0.0;
        for (double a : row.fold_accuracies) sum += a;
        row.mean = sum / static_cast<double>(k);
        if (!any || row.mean > result.best_cv_accuracy) {
            any = true;
            result.best_cv_accuracy = row.mean;
            result.best_index = c;
        }
    }
    if (!any) {
        throw Error(ErrorCode::AllCandidatesFailed, "every " + models::to_string(kind) + " candidate failed; first error: " +
                                                        (result.table.empty() ? std::string() : result.table.front().error));
    }
    result.best_params = result.table[result.best_index].params;
    return result;
}

}  // namespace stresskit::evaluation
