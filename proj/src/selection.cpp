#include "stresskit/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>

#include "stresskit/error.hpp"
#include "stresskit/evaluation.hpp"
#include "stresskit/smote.hpp"

namespace stresskit::selection {

using nlohmann::ordered_json;

Method parse_method(const std::string& name) {
    std::string s = name;
    std::replace(s.begin(), s.end(), '-', '_');
    if (s == "anova_f" || s == "anova") return Method::anova_f;
    if (s == "mutual_info" || s == "mi") return Method::mutual_info;
    if (s == "rfe") return Method::rfe;
    if (s == "correlation") return Method::correlation;
    if (s == "feature_importance" || s == "importance") return Method::feature_importance;
    if (s == "coc_rfe") return Method::coc_rfe;
    throw Error(ErrorCode::InvalidConfig, "unknown selection method '" + name + "'");
}

std::string to_string(Method m) {
    switch (m) {
        case Method::anova_f: return "anova_f";
        case Method::mutual_info: return "mutual_info";
        case Method::rfe: return "rfe";
        case Method::correlation: return "correlation";
        case Method::feature_importance: return "feature_importance";
        case Method::coc_rfe: return "coc_rfe";
    }
    return "coc_rfe";
}

FilterMode parse_filter(const std::string& name) {
    if (name == "relevance") return FilterMode::relevance;
    if (name == "redundancy") return FilterMode::redundancy;
    throw Error(ErrorCode::InvalidConfig, "filter must be 'relevance' or 'redundancy', got '" + name + "'");
}

std::string to_string(FilterMode m) { return m == FilterMode::relevance ? "relevance" : "redundancy"; }

// The producing method is a label, not part of the outcome.
bool SelectionResult::operator==(const SelectionResult& o) const {
    auto same_dropped = [](const std::vector<DroppedFeature>& a, const std::vector<DroppedFeature>& b) {
        return std::equal(a.begin(), a.end(), b.begin(), b.end(),
                          [](const auto& x, const auto& y) { return x.name == y.name && x.score == y.score; });
    };
    return selected == o.selected && ranking == o.ranking && elimination_order == o.elimination_order &&
           same_dropped(filter_dropped, o.filter_dropped) && target_exceeds_survivors == o.target_exceeds_survivors;
}

ordered_json to_json(const SelectionResult& r) {
    ordered_json dropped = ordered_json::array();
    for (const auto& d : r.filter_dropped) dropped.push_back({{"name", d.name}, {"score", d.score}});
    return {{"method", to_string(r.method)},
            {"selected", r.selected},
            {"ranking", r.ranking},
            {"elimination_order", r.elimination_order},
            {"filter_dropped", dropped},
            {"target_exceeds_survivors", r.target_exceeds_survivors}};
}

namespace {

struct ColumnMoments {
    std::vector<double> centered;  // column-major
    std::vector<double> sum_sq;
};

ColumnMoments center_columns(const Dataset& ds) {
    const std::size_t n = ds.rows();
    const std::size_t d = ds.cols();
    ColumnMoments m{std::vector<double>(n * d), std::vector<double>(d, 0.0)};
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += ds.at(i, j);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double c = ds.at(i, j) - mean;
            m.centered[j * n + i] = c;
            m.sum_sq[j] += c * c;
        }
    }
    return m;
}

double pearson(const double* a, double ssa, const double* b, double ssb, std::size_t n) {
    if (ssa <= 0.0 || ssb <= 0.0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return std::clamp(s / std::sqrt(ssa * ssb), -1.0, 1.0);
}

/// Indices ordered by descending score; ties keep the lower index first.
std::vector<std::size_t> order_by_score(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

SelectionResult top_n(const Dataset& ds, Method method, const std::vector<double>& scores, std::size_t n_target) {
    if (n_target == 0) throw Error(ErrorCode::InvalidConfig, "n_target must be >= 1");
    const auto& names = ds.schema().feature_names;
    const auto order = order_by_score(scores);
    const std::size_t keep = std::min(n_target, order.size());
    SelectionResult r;
    r.method = method;
    r.target_exceeds_survivors = n_target > order.size();
    std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(chosen.begin(), chosen.end());
    for (std::size_t j : chosen) r.selected.push_back(names[j]);
    for (std::size_t j : order) r.ranking.push_back(names[j]);
    for (std::size_t q = order.size(); q-- > keep;) r.elimination_order.push_back(names[order[q]]);
    return r;
}

}  // namespace

std::vector<double> correlation_matrix(const Dataset& ds) {
    if (ds.rows() < 2) throw Error(ErrorCode::TooFewRows, "correlation needs at least 2 rows");
    const std::size_t n = ds.rows();
    const std::size_t d = ds.cols();
    const auto m = center_columns(ds);
    std::vector<double> r(d * d, 0.0);
    for (std::size_t a = 0; a < d; ++a) {
        r[a * d + a] = 1.0;
        for (std::size_t b = a + 1; b < d; ++b) {
            const double v = pearson(&m.centered[a * n], m.sum_sq[a], &m.centered[b * n], m.sum_sq[b], n);
            r[a * d + b] = v;
            r[b * d + a] = v;
        }
    }
    return r;
}

std::vector<double> feature_target_scores(const Dataset& ds) {
    if (ds.rows() < 2) throw Error(ErrorCode::TooFewRows, "correlation needs at least 2 rows");
    const std::size_t n = ds.rows();
    const auto m = center_columns(ds);
    double label_mean = 0.0;
    for (Label y : ds.labels()) label_mean += y;
    label_mean /= static_cast<double>(n);
    std::vector<double> yc(n);
    double ssy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        yc[i] = ds.label(i) - label_mean;
        ssy += yc[i] * yc[i];
    }
    std::vector<double> out(ds.cols());
    for (std::size_t j = 0; j < ds.cols(); ++j) {
        out[j] = std::abs(pearson(&m.centered[j * n], m.sum_sq[j], yc.data(), ssy, n));
    }
    return out;
}

std::vector<double> anova_f_scores(const Dataset& ds) {
    const std::size_t n = ds.rows();
    const std::size_t k = ds.n_classes();
    std::vector<double> count(k, 0.0);
    for (Label y : ds.labels()) count[static_cast<std::size_t>(y)] += 1.0;
    std::size_t groups = 0;
    for (std::size_t c = 0; c < k; ++c) {
        if (count[c] == 0.0) continue;
        if (count[c] < 2.0) throw Error(ErrorCode::ClassTooSmall, "class " + std::to_string(c) + " has fewer than 2 samples");
        ++groups;
    }
    if (groups < 2) throw Error(ErrorCode::ClassTooSmall, "ANOVA needs at least two populated classes");

    std::vector<double> out(ds.cols());
    std::vector<double> group_sum(k);
    for (std::size_t j = 0; j < ds.cols(); ++j) {
        std::fill(group_sum.begin(), group_sum.end(), 0.0);
        double grand = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            group_sum[static_cast<std::size_t>(ds.label(i))] += ds.at(i, j);
            grand += ds.at(i, j);
        }
        grand /= static_cast<double>(n);
        double between = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] == 0.0) continue;
            const double mc = group_sum[c] / count[c];
            between += count[c] * (mc - grand) * (mc - grand);
        }
        double within = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(ds.label(i));
            const double dlt = ds.at(i, j) - group_sum[c] / count[c];
            within += dlt * dlt;
        }
        const double msb = between / static_cast<double>(groups - 1);
        const double msw = within / static_cast<double>(n - groups);
        if (msw == 0.0) {
            out[j] = msb > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        } else {
            out[j] = msb / msw;
        }
    }
    return out;
}

std::vector<double> mutual_info_scores(const Dataset& ds, std::size_t n_bins) {
    if (n_bins < 2) throw Error(ErrorCode::InvalidConfig, "n_bins must be >= 2");
    const std::size_t n = ds.rows();
    const std::size_t k = ds.n_classes();
    std::vector<double> class_p(k, 0.0);
    for (Label y : ds.labels()) class_p[static_cast<std::size_t>(y)] += 1.0 / static_cast<double>(n);

    std::vector<double> out(ds.cols(), 0.0);
    std::vector<std::size_t> order(n);
    std::vector<std::size_t> bin(n);
    std::vector<double> joint(n_bins * k);
    std::vector<double> bin_p(n_bins);
    for (std::size_t j = 0; j < ds.cols(); ++j) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ds.at(a, j) < ds.at(b, j); });
        // Equal values share the bin of their first rank.
        std::size_t first_rank = 0;
        for (std::size_t r = 0; r < n; ++r) {
            if (r > 0 && ds.at(order[r], j) != ds.at(order[r - 1], j)) first_rank = r;
            bin[order[r]] = std::min(n_bins - 1, first_rank * n_bins / n);
        }
        std::fill(joint.begin(), joint.end(), 0.0);
        std::fill(bin_p.begin(), bin_p.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            joint[bin[i] * k + static_cast<std::size_t>(ds.label(i))] += 1.0 / static_cast<double>(n);
            bin_p[bin[i]] += 1.0 / static_cast<double>(n);
        }
        double mi = 0.0;
        for (std::size_t b = 0; b < n_bins; ++b) {
            for (std::size_t c = 0; c < k; ++c) {
                const double p = joint[b * k + c];
                if (p > 0.0) mi += p * std::log(p / (bin_p[b] * class_p[c]));
            }
        }
        out[j] = std::max(0.0, mi);
    }
    return out;
}

SelectionResult rfe(const Dataset& ds, const models::ModelConfig& estimator, std::size_t n_target, std::size_t step,
                    std::uint64_t seed) {
    if (n_target == 0) throw Error(ErrorCode::InvalidConfig, "n_target must be >= 1");
    if (step == 0) throw Error(ErrorCode::InvalidConfig, "step must be >= 1");
    const auto& names = ds.schema().feature_names;
    SelectionResult r;
    r.method = Method::rfe;
    r.target_exceeds_survivors = n_target > ds.cols();

    std::vector<std::size_t> current(ds.cols());
    std::iota(current.begin(), current.end(), 0);
    models::ModelConfig cfg = estimator;
    cfg.seed = seed;
    while (current.size() > n_target) {
        const auto model = models::fit(cfg, ds.subset_columns(current));
        const auto imp = models::importance_scores(model);
        // Least important first; among equal scores the later column goes first.
        std::vector<std::size_t> pos(current.size());
        std::iota(pos.begin(), pos.end(), 0);
        std::sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) {
            return imp[a] != imp[b] ? imp[a] < imp[b] : a > b;
        });
        const std::size_t remove = std::min(step, current.size() - n_target);
        std::vector<char> gone(current.size(), 0);
        for (std::size_t q = 0; q < remove; ++q) {
            gone[pos[q]] = 1;
            r.elimination_order.push_back(names[current[pos[q]]]);
        }
        std::vector<std::size_t> next;
        for (std::size_t p = 0; p < current.size(); ++p) {
            if (!gone[p]) next.push_back(current[p]);
        }
        current = std::move(next);
    }
    for (std::size_t j : current) r.selected.push_back(names[j]);
    r.ranking = r.selected;
    r.ranking.insert(r.ranking.end(), r.elimination_order.rbegin(), r.elimination_order.rend());
    return r;
}

SelectionResult coc_rfe(const Dataset& ds, const SelectionConfig& cfg) {
    if (cfg.n_target == 0) throw Error(ErrorCode::InvalidConfig, "n_target must be >= 1");
    if (!(cfg.correlation_threshold >= 0.0 && cfg.correlation_threshold <= 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "correlation threshold must lie in [0, 1]");
    }
    const auto& names = ds.schema().feature_names;
    const auto scores = feature_target_scores(ds);

    std::vector<std::size_t> survivors;
    std::vector<std::size_t> dropped;
    if (cfg.filter == FilterMode::relevance) {
        for (std::size_t j = 0; j < ds.cols(); ++j) {
            (scores[j] < cfg.correlation_threshold ? dropped : survivors).push_back(j);
        }
    } else {
        const auto corr = correlation_matrix(ds);
        std::vector<std::size_t> kept;
        for (std::size_t j : order_by_score(scores)) {
            const bool redundant = std::any_of(kept.begin(), kept.end(), [&](std::size_t q) {
                return std::abs(corr[j * ds.cols() + q]) > cfg.correlation_threshold;
            });
            (redundant ? dropped : kept).push_back(j);
        }
        std::sort(kept.begin(), kept.end());
        survivors = std::move(kept);
    }
    if (survivors.empty()) {
        throw Error(ErrorCode::AllFeaturesFiltered, "no feature passes correlation threshold " +
                                                        format_double(cfg.correlation_threshold));
    }

    SelectionResult r;
    if (survivors.size() <= cfg.n_target) {
        r.target_exceeds_survivors = survivors.size() < cfg.n_target;
        for (std::size_t j : survivors) r.selected.push_back(names[j]);
        std::vector<double> surv_scores;
        for (std::size_t j : survivors) surv_scores.push_back(scores[j]);
        for (std::size_t q : order_by_score(surv_scores)) r.ranking.push_back(names[survivors[q]]);
    } else {
        r = rfe(ds.subset_columns(survivors), cfg.estimator, cfg.n_target, cfg.step, cfg.seed);
    }
    r.method = Method::coc_rfe;
    std::stable_sort(dropped.begin(), dropped.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    for (std::size_t j : dropped) {
        r.filter_dropped.push_back({names[j], scores[j]});
        r.ranking.push_back(names[j]);
    }
    return r;
}

SelectionResult select_features(const Dataset& ds, Method method, const SelectionConfig& cfg) {
    switch (method) {
        case Method::anova_f: return top_n(ds, method, anova_f_scores(ds), cfg.n_target);
        case Method::mutual_info: return top_n(ds, method, mutual_info_scores(ds, cfg.mi_bins), cfg.n_target);
        case Method::correlation: return top_n(ds, method, feature_target_scores(ds), cfg.n_target);
        case Method::feature_importance: {
            models::ModelConfig est = cfg.estimator;
            est.seed = cfg.seed;
            return top_n(ds, method, models::importance_scores(models::fit(est, ds)), cfg.n_target);
        }
        case Method::rfe: return rfe(ds, cfg.estimator, cfg.n_target, cfg.step, cfg.seed);
        case Method::coc_rfe: return coc_rfe(ds, cfg);
    }
    throw Error(ErrorCode::InvalidConfig, "unknown selection method");
}

namespace {

// With step 1 the elimination path does not depend on the target, so one run to the
// smallest count yields the selection for every larger count.
std::vector<std::string> cut_path(const Dataset& ds, const SelectionResult& path, std::size_t count, bool& exceeds) {
    std::set<std::string> alive(path.selected.begin(), path.selected.end());
    alive.insert(path.elimination_order.begin(), path.elimination_order.end());
    exceeds = count > alive.size();
    if (count < alive.size()) {
        const std::size_t drop = alive.size() - count;
        for (std::size_t q = 0; q < drop; ++q) alive.erase(path.elimination_order[q]);
    }
    std::vector<std::string> out;
    for (const auto& name : ds.schema().feature_names) {
        if (alive.count(name)) out.push_back(name);
    }
    return out;
}

}  // namespace

std::vector<SweepRow> sweep_holdout(const Dataset& train, const Dataset& test, Method method,
                                    const std::vector<std::size_t>& counts, const models::ModelConfig& estimator,
                                    const SelectionConfig& base) {
    for (std::size_t count : counts) {
        if (count == 0 || count > train.cols()) {
            throw Error(ErrorCode::InvalidConfig, "sweep count " + std::to_string(count) + " outside [1, " +
                                                      std::to_string(train.cols()) + "]");
        }
    }
    std::optional<SelectionResult> path;
    if ((method == Method::rfe || method == Method::coc_rfe) && base.step == 1 && !counts.empty()) {
        SelectionConfig cfg = base;
        cfg.n_target = *std::min_element(counts.begin(), counts.end());
        path = select_features(train, method, cfg);
    }
    std::vector<SweepRow> rows;
    for (std::size_t count : counts) {
        SweepRow row;
        row.count = count;
        if (path) {
            row.selected = cut_path(train, *path, count, row.target_exceeds_survivors);
        } else {
            SelectionConfig cfg = base;
            cfg.n_target = count;
            const auto sel = select_features(train, method, cfg);
            row.selected = sel.selected;
            row.target_exceeds_survivors = sel.target_exceeds_survivors;
        }
        const auto model = models::fit(estimator, train.select_features(row.selected));
        const auto held = test.select_features(row.selected);
        row.accuracy = evaluation::accuracy(held.labels(), models::predict(model, held));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<SweepRow> sweep(const Dataset& ds, Method method, const std::vector<std::size_t>& counts,
                            const models::ModelConfig& estimator, const EvalProtocol& protocol,
                            const SelectionConfig& base) {
    auto prepare = [&](const Dataset& train) {
        return protocol.smote_train ? resampling::balance_all(train, protocol.smote_k, protocol.seed) : train;
    };
    if (protocol.kind == EvalProtocol::Kind::holdout) {
        const auto split = stratified_split(ds, protocol.train_fraction, protocol.seed);
        return sweep_holdout(prepare(split.train), split.test, method, counts, estimator, base);
    }
    const auto folds = evaluation::kfold_indices(ds.labels(), protocol.folds, protocol.seed);
    std::vector<SweepRow> mean_rows;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto rows = sweep_holdout(prepare(ds.subset_rows(evaluation::fold_complement(folds, f))),
                                        ds.subset_rows(folds[f]), method, counts, estimator, base);
        if (mean_rows.empty()) {
            mean_rows = rows;
            for (auto& r : mean_rows) r.accuracy = 0.0;
        }
        for (std::size_t q = 0; q < rows.size(); ++q) {
            mean_rows[q].accuracy += rows[q].accuracy / static_cast<double>(folds.size());
            mean_rows[q].target_exceeds_survivors = mean_rows[q].target_exceeds_survivors || rows[q].target_exceeds_survivors;
        }
    }
    return mean_rows;
}

}  // namespace stresskit::selection
