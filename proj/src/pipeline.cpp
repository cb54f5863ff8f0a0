#include "stresskit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "stresskit/error.hpp"
#include "stresskit/json_schema.hpp"
#include "stresskit/random.hpp"
#include "stresskit/resources.hpp"
#include "stresskit/smote.hpp"

namespace stresskit::pipeline {

using nlohmann::ordered_json;

namespace {

void reject_unknown(const ordered_json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void read(const ordered_json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("key '") + key + "': " + e.what());
    }
}

ordered_json histogram_json(const std::map<Label, std::size_t>& h) {
    ordered_json j = ordered_json::object();
    for (const auto& [c, n] : h) j[std::to_string(c)] = n;
    return j;
}

evaluation::EvaluationReport score(const models::TrainedModel& model, const Dataset& test, evaluation::Averaging avg) {
    const auto cm = evaluation::confusion(test.labels(), models::predict(model, test), test.n_classes());
    return evaluation::metrics(cm, avg);
}

std::string step_name(std::size_t i) {
    static const char* steps[] = {"I", "II", "III", "IV", "V", "VI", "VII"};
    return steps[i];
}

std::string csv_row(std::initializer_list<std::string> cells) {
    std::string line;
    for (const auto& c : cells) {
        if (!line.empty()) line += ',';
        line += c;
    }
    return line + '\n';
}

}  // namespace

PipelineConfig config_from_json(const ordered_json& j) {
    reject_unknown(j,
                   {"input", "synth", "label_column", "subject_column", "seed", "train_fraction", "smote", "selection",
                    "model", "averaging", "sweep_counts", "per_subject", "loso", "out_dir"},
                   "config");
    PipelineConfig cfg;
    read(j, "seed", cfg.seed);
    cfg.synth.seed = cfg.seed;
    if (j.contains("input") && !j["input"].is_null()) cfg.input = j["input"].get<std::string>();
    if (j.contains("synth")) {
        const auto& s = j["synth"];
        reject_unknown(s,
                       {"n_classes", "class_counts", "n_informative", "n_redundant", "n_noise", "class_separation",
                        "seed", "n_subjects"},
                       "synth");
        read(s, "class_counts", cfg.synth.class_counts);
        cfg.synth.n_classes = cfg.synth.class_counts.size();
        read(s, "n_classes", cfg.synth.n_classes);
        read(s, "n_informative", cfg.synth.n_informative);
        read(s, "n_redundant", cfg.synth.n_redundant);
        read(s, "n_noise", cfg.synth.n_noise);
        read(s, "class_separation", cfg.synth.class_separation);
        read(s, "seed", cfg.synth.seed);
        read(s, "n_subjects", cfg.synth.n_subjects);
    }
    read(j, "label_column", cfg.label_column);
    read(j, "subject_column", cfg.subject_column);
    read(j, "train_fraction", cfg.train_fraction);
    if (j.contains("smote")) {
        const auto& s = j["smote"];
        reject_unknown(s, {"enabled", "k", "before_split", "standardize"}, "smote");
        read(s, "enabled", cfg.smote.enabled);
        read(s, "k", cfg.smote.k);
        read(s, "before_split", cfg.smote.before_split);
        read(s, "standardize", cfg.smote.standardize);
    }
    if (j.contains("selection")) {
        const auto& s = j["selection"];
        reject_unknown(s, {"method", "n_target", "correlation_threshold", "filter", "step", "mi_bins"}, "selection");
        if (s.contains("method")) cfg.selection.method = selection::parse_method(s["method"].get<std::string>());
        if (s.contains("filter")) cfg.selection.filter = selection::parse_filter(s["filter"].get<std::string>());
        read(s, "n_target", cfg.selection.n_target);
        read(s, "correlation_threshold", cfg.selection.correlation_threshold);
        read(s, "step", cfg.selection.step);
        read(s, "mi_bins", cfg.selection.mi_bins);
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        reject_unknown(m, {"kind", "tune", "grid", "grid_set", "params", "folds"}, "model");
        if (m.contains("kind")) cfg.model.kind = models::parse_kind(m["kind"].get<std::string>());
        read(m, "tune", cfg.model.tune);
        if (m.contains("grid") && !m["grid"].is_null()) cfg.model.grid = evaluation::grid_from_json(m["grid"]);
        read(m, "grid_set", cfg.model.grid_set);
        if (m.contains("params")) {
            if (!m["params"].is_object()) throw Error(ErrorCode::InvalidConfig, "model.params must be an object");
            for (const auto& [name, v] : m["params"].items()) cfg.model.params[name] = models::param_from_json(v);
        }
        read(m, "folds", cfg.model.folds);
    }
    if (j.contains("averaging")) cfg.averaging = evaluation::parse_averaging(j["averaging"].get<std::string>());
    read(j, "sweep_counts", cfg.sweep_counts);
    read(j, "per_subject", cfg.per_subject);
    read(j, "loso", cfg.loso);
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    validate(cfg);
    return cfg;
}

ordered_json to_json(const PipelineConfig& cfg) {
    ordered_json j;
    j["input"] = cfg.input ? ordered_json(cfg.input->generic_string()) : ordered_json(nullptr);
    j["synth"] = {{"n_classes", cfg.synth.n_classes},
                  {"class_counts", cfg.synth.class_counts},
                  {"n_informative", cfg.synth.n_informative},
                  {"n_redundant", cfg.synth.n_redundant},
                  {"n_noise", cfg.synth.n_noise},
                  {"class_separation", cfg.synth.class_separation},
                  {"seed", cfg.synth.seed},
                  {"n_subjects", cfg.synth.n_subjects}};
    j["label_column"] = cfg.label_column;
    j["subject_column"] = cfg.subject_column;
    j["seed"] = cfg.seed;
    j["train_fraction"] = cfg.train_fraction;
    j["smote"] = {{"enabled", cfg.smote.enabled},
                  {"k", cfg.smote.k},
                  {"before_split", cfg.smote.before_split},
                  {"standardize", cfg.smote.standardize}};
    j["selection"] = {{"method", selection::to_string(cfg.selection.method)},
                      {"n_target", cfg.selection.n_target},
                      {"correlation_threshold", cfg.selection.correlation_threshold},
                      {"filter", selection::to_string(cfg.selection.filter)},
                      {"step", cfg.selection.step},
                      {"mi_bins", cfg.selection.mi_bins}};
    j["model"] = {{"kind", models::to_string(cfg.model.kind)},
                  {"tune", cfg.model.tune},
                  {"grid", cfg.model.grid ? evaluation::to_json(*cfg.model.grid) : ordered_json(nullptr)},
                  {"grid_set", cfg.model.grid_set},
                  {"params", models::params_to_json(cfg.model.params)},
                  {"folds", cfg.model.folds}};
    j["averaging"] = evaluation::to_string(cfg.averaging);
    j["sweep_counts"] = cfg.sweep_counts;
    j["per_subject"] = cfg.per_subject;
    j["loso"] = cfg.loso;
    // out_dir is where the report goes, not part of what it describes.
    return j;
}

void validate(const PipelineConfig& cfg) {
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "train_fraction must lie in (0, 1)");
    }
    if (cfg.smote.k < 1) throw Error(ErrorCode::InvalidConfig, "smote.k must be >= 1");
    if (cfg.selection.n_target < 1) throw Error(ErrorCode::InvalidConfig, "selection.n_target must be >= 1");
    if (cfg.selection.step < 1) throw Error(ErrorCode::InvalidConfig, "selection.step must be >= 1");
    if (cfg.selection.mi_bins < 2) throw Error(ErrorCode::InvalidConfig, "selection.mi_bins must be >= 2");
    const double t = cfg.selection.correlation_threshold;
    if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::InvalidConfig, "correlation_threshold must lie in [0, 1]");
    if (cfg.model.folds < 2) throw Error(ErrorCode::InvalidConfig, "model.folds must be >= 2");
    for (std::size_t c : cfg.sweep_counts) {
        if (c < 1) throw Error(ErrorCode::InvalidConfig, "sweep counts must be >= 1");
    }
    if (cfg.model.kind == models::ModelKind::svc) {
        throw Error(ErrorCode::UnsupportedModel, "svc is not implemented; choose gb, rf, knn, lr or lda");
    }
    models::validate_params(cfg.model.kind, cfg.model.params);
    if (cfg.model.tune) evaluation::validate_grid(cfg.model.kind, resolve_grid(cfg));
    if (!cfg.input) {
        if (cfg.synth.class_counts.size() != cfg.synth.n_classes) {
            throw Error(ErrorCode::InvalidSpec, "synth.class_counts must list one count per class");
        }
    }
}

evaluation::HyperParamGrid resolve_grid(const PipelineConfig& cfg) {
    return cfg.model.grid ? *cfg.model.grid : evaluation::builtin_grid(cfg.model.kind, cfg.model.grid_set);
}

Dataset load_input(const PipelineConfig& cfg) {
    if (!cfg.input) return generate_synthetic(cfg.synth);
    if (!std::filesystem::exists(*cfg.input)) {
        throw Error(ErrorCode::Io, "input file '" + cfg.input->string() + "' does not exist");
    }
    return load_dataset(*cfg.input, cfg.label_column, cfg.subject_column);
}

std::string condition_name(bool balanced, bool tuned) {
    std::string base = balanced ? "balanced" : "imbalanced";
    return tuned ? "tuned-" + base : base;
}

ordered_json to_json(const PipelineReport& r, bool include_timing) {
    const auto& cfg = r.config;
    const std::string condition = condition_name(cfg.smote.enabled, cfg.model.tune);
    ordered_json stages = ordered_json::array();
    stages.push_back({{"step", step_name(0)},
                      {"name", "load"},
                      {"source", r.source},
                      {"rows", r.rows},
                      {"features", r.features},
                      {"n_classes", r.n_classes},
                      {"class_histogram", histogram_json(r.histogram)}});
    stages.push_back({{"step", step_name(1)},
                      {"name", "split"},
                      {"train_fraction", cfg.train_fraction},
                      {"train_rows", r.train_rows},
                      {"test_rows", r.test_rows},
                      {"train_histogram", histogram_json(r.train_histogram)},
                      {"test_histogram", histogram_json(r.test_histogram)}});
    stages.push_back({{"step", step_name(2)},
                      {"name", "smote"},
                      {"enabled", cfg.smote.enabled},
                      {"before_split", cfg.smote.before_split},
                      {"k", cfg.smote.k},
                      {"histogram_before", histogram_json(r.smote_before)},
                      {"histogram_after", histogram_json(r.smote_after)}});
    stages.push_back({{"step", step_name(3)},
                      {"name", "tune"},
                      {"tuned", r.grid.has_value()},
                      {"grid_search", r.grid ? evaluation::to_json(*r.grid) : ordered_json(nullptr)},
                      {"params", models::params_to_json(r.params)}});
    stages.push_back({{"step", step_name(4)},
                      {"name", "tuned_baseline"},
                      {"model", models::to_string(cfg.model.kind)},
                      {"condition", condition},
                      {"features", r.features},
                      {"provenance", "holdout"},
                      {"evaluation", evaluation::to_json(r.baseline)}});
    ordered_json sweep = ordered_json::array();
    for (const auto& row : r.sweep) {
        sweep.push_back({{"count", row.count},
                         {"accuracy", row.accuracy},
                         {"provenance", "holdout"},
                         {"target_exceeds_survivors", row.target_exceeds_survivors},
                         {"selected", row.selected}});
    }
    stages.push_back({{"step", step_name(5)},
                      {"name", "select"},
                      {"selection", selection::to_json(r.selection)},
                      {"sweep", sweep}});
    stages.push_back({{"step", step_name(6)},
                      {"name", "evaluate"},
                      {"model", models::to_string(cfg.model.kind)},
                      {"condition", condition},
                      {"features", r.selection.selected.size()},
                      {"provenance", "holdout"},
                      {"evaluation", evaluation::to_json(r.final_report)}});

    ordered_json j;
    j["format"] = "stresskit-pipeline-report";
    j["version"] = 1;
    j["seed"] = cfg.seed;
    j["config"] = to_json(cfg);
    j["stages"] = std::move(stages);
    if (r.per_subject) {
        ordered_json subjects = ordered_json::array();
        for (const auto& s : r.per_subject->subjects) {
            subjects.push_back({{"subject_id", s.subject_id}, {"rows", s.rows}, {"evaluation", evaluation::to_json(s.report)}});
        }
        j["per_subject"] = {{"protocol", r.per_subject->protocol},
                            {"mean_accuracy", r.per_subject->mean_accuracy},
                            {"subjects", subjects}};
    } else {
        j["per_subject"] = nullptr;
    }
    if (include_timing) {
        ordered_json timing = ordered_json::array();
        for (const auto& t : r.timing) timing.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
        j["timing"] = std::move(timing);
    }
    return j;
}

void validate_report(const ordered_json& report) {
    static const ordered_json schema = ordered_json::parse(resources::report_schema());
    json_schema::require_valid(report, schema);
}

std::string metrics_csv(const PipelineReport& r) {
    const std::string model = models::to_string(r.config.model.kind);
    const std::string condition = condition_name(r.config.smote.enabled, r.config.model.tune);
    std::string out = csv_row({"model", "condition", "stage", "accuracy", "precision", "recall", "f1"});
    auto line = [&](const std::string& stage, const evaluation::EvaluationReport& e) {
        out += csv_row({model, condition, stage, format_double(e.accuracy), format_double(e.headline.precision),
                        format_double(e.headline.recall), format_double(e.headline.f1)});
    };
    line("tuned_baseline", r.baseline);
    line("evaluate", r.final_report);
    return out;
}

std::string sweep_csv(const std::string& method, const std::vector<selection::SweepRow>& rows) {
    std::string out = csv_row({"method", "count", "accuracy", "target_exceeds_survivors"});
    for (const auto& row : rows) {
        out += csv_row({method, std::to_string(row.count), format_double(row.accuracy),
                        row.target_exceeds_survivors ? "true" : "false"});
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write '" + tmp + "'");
        out << text;
        if (!out.flush()) throw Error(ErrorCode::Io, "write to '" + tmp + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorCode::Io, "cannot move report into '" + path.string() + "'");
    }
}

namespace {

/// SMOTE inside one subject: every class must be present with at least two rows,
/// and k shrinks to fit the smallest class. Returns the input unchanged otherwise.
Dataset balance_if_possible(const Dataset& train, std::size_t k, std::uint64_t seed, bool standardize) {
    std::size_t smallest = train.rows();
    for (const auto& [c, n] : class_histogram(train)) smallest = std::min(smallest, n);
    if (smallest < 2) return train;
    return resampling::balance_all(train, std::min(k, smallest - 1), seed, standardize);
}

}  // namespace

SubjectReport per_subject_report(const PipelineConfig& cfg, const Dataset& ds, const models::ParamMap& params) {
    if (!ds.has_subjects()) throw Error(ErrorCode::InvalidDataset, "dataset carries no subject ids");
    const auto& ids = *ds.subject_ids();
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> rows_of;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto& rows = rows_of[ids[i]];
        if (rows.empty()) order.push_back(ids[i]);
        rows.push_back(i);
    }
    for (const auto& id : order) {
        if (rows_of[id].size() < 10) {
            throw Error(ErrorCode::SubjectTooSmall, "subject '" + id + "' has " + std::to_string(rows_of[id].size()) +
                                                        " rows, needs at least 10");
        }
    }

    SubjectReport out;
    out.protocol = cfg.loso ? "loso" : "within_subject";
    out.subjects.resize(order.size());
    const auto model_cfg = models::make_config(cfg.model.kind, params, derive_seed(cfg.seed, "fit"));
    for (std::size_t s = 0; s < order.size(); ++s) {
        const auto& id = order[s];
        const std::uint64_t seed = derive_seed(cfg.seed, "subject:" + id);
        Dataset train = ds;
        Dataset test = ds;
        if (cfg.loso) {
            std::vector<std::size_t> rest;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (ids[i] != id) rest.push_back(i);
            }
            train = ds.subset_rows(rest);
            test = ds.subset_rows(rows_of[id]);
        } else {
            auto split = stratified_split(ds.subset_rows(rows_of[id]), cfg.train_fraction, seed);
            train = std::move(split.train);
            test = std::move(split.test);
        }
        if (cfg.smote.enabled) train = balance_if_possible(train, cfg.smote.k, seed, cfg.smote.standardize);
        const auto model = models::fit(model_cfg, train);
        out.subjects[s] = {id, rows_of[id].size(), score(model, test, cfg.averaging)};
        out.mean_accuracy += out.subjects[s].report.accuracy / static_cast<double>(order.size());
    }
    return out;
}

PipelineReport run_pipeline(const PipelineConfig& cfg) {
    validate(cfg);
    PipelineReport r;
    r.config = cfg;

    auto stage = [&](const std::string& name, const std::function<void()>& body) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            body();
        } catch (const Error& e) {
            throw Error(e.code(), "stage '" + name + "' failed: " + e.detail());
        }
        r.timing.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    };
    const std::uint64_t split_seed = derive_seed(cfg.seed, "split");
    const std::uint64_t smote_seed = derive_seed(cfg.seed, "smote");
    const std::uint64_t fit_seed = derive_seed(cfg.seed, "fit");

    std::optional<Dataset> data;
    std::optional<Dataset> train;
    std::optional<Dataset> test;
    stage("load", [&] {
        data = load_input(cfg);
        r.source = cfg.input ? cfg.input->filename().string() : "synthetic";
        r.rows = data->rows();
        r.features = data->cols();
        r.n_classes = data->n_classes();
        r.histogram = class_histogram(*data);
    });
    // Balancing before the split runs first but is still reported as STEP III.
    std::optional<Dataset> to_split;
    if (cfg.smote.enabled && cfg.smote.before_split) {
        stage("smote", [&] {
            r.smote_before = r.histogram;
            to_split = resampling::balance_all(*data, cfg.smote.k, smote_seed, cfg.smote.standardize);
            r.smote_after = class_histogram(*to_split);
        });
    }
    stage("split", [&] {
        auto split = stratified_split(to_split ? *to_split : *data, cfg.train_fraction, split_seed);
        train = std::move(split.train);
        test = std::move(split.test);
        r.train_rows = train->rows();
        r.test_rows = test->rows();
        r.train_histogram = class_histogram(*train);
        r.test_histogram = class_histogram(*test);
    });
    if (!(cfg.smote.enabled && cfg.smote.before_split)) {
        stage("smote", [&] {
            r.smote_before = class_histogram(*train);
            if (cfg.smote.enabled) train = resampling::balance_all(*train, cfg.smote.k, smote_seed, cfg.smote.standardize);
            r.smote_after = class_histogram(*train);
        });
    }
    stage("tune", [&] {
        r.params = cfg.model.params;
        if (!cfg.model.tune) return;
        r.grid = evaluation::grid_search(cfg.model.kind, resolve_grid(cfg), *train, cfg.model.folds,
                                         derive_seed(cfg.seed, "tune"), cfg.model.params);
        for (const auto& [name, v] : r.grid->best_params) r.params[name] = v;
    });
    const auto model_cfg = models::make_config(cfg.model.kind, r.params, fit_seed);
    stage("tuned_baseline", [&] { r.baseline = score(models::fit(model_cfg, *train), *test, cfg.averaging); });
    stage("select", [&] {
        selection::SelectionConfig sc;
        sc.n_target = cfg.selection.n_target;
        sc.correlation_threshold = cfg.selection.correlation_threshold;
        sc.filter = cfg.selection.filter;
        sc.step = cfg.selection.step;
        sc.mi_bins = cfg.selection.mi_bins;
        sc.seed = derive_seed(cfg.seed, "select");
        // Ranking uses the tuned estimator whenever it exposes importances.
        sc.estimator = models::is_tree_ensemble(cfg.model.kind) ? model_cfg : models::default_ranking_estimator(sc.seed);
        r.selection = selection::select_features(*train, cfg.selection.method, sc);
        std::vector<std::size_t> counts;
        for (std::size_t c : cfg.sweep_counts) {
            if (c <= train->cols()) counts.push_back(c);
        }
        r.sweep = selection::sweep_holdout(*train, *test, cfg.selection.method, counts, model_cfg, sc);
    });
    stage("evaluate", [&] {
        const auto model = models::fit(model_cfg, train->select_features(r.selection.selected));
        r.final_report = score(model, test->select_features(r.selection.selected), cfg.averaging);
    });
    if (cfg.per_subject && data->has_subjects()) {
        stage("per_subject", [&] {
            r.per_subject = per_subject_report(cfg, data->select_features(r.selection.selected), r.params);
        });
    }

    const auto doc = to_json(r);
    validate_report(doc);
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        const std::vector<std::pair<std::string, std::string>> files{
            {"report.json", doc.dump(2) + "\n"},
            {"metrics.csv", metrics_csv(r)},
            {"sweep.csv", sweep_csv(selection::to_string(cfg.selection.method), r.sweep)}};
        std::vector<std::filesystem::path> written;
        try {
            for (const auto& [name, text] : files) {
                write_text(cfg.out_dir / name, text);
                written.push_back(cfg.out_dir / name);
            }
        } catch (...) {
            std::error_code ec;
            for (const auto& p : written) std::filesystem::remove(p, ec);
            throw;
        }
    }
    return r;
}

ComparisonTable compare_models(const PipelineConfig& cfg, const Dataset& ds, const std::vector<models::ModelKind>& kinds) {
    if (kinds.empty()) throw Error(ErrorCode::InvalidConfig, "no model kinds to compare");
    for (auto kind : kinds) {
        if (kind == models::ModelKind::svc) throw Error(ErrorCode::UnsupportedModel, "svc is not implemented");
    }
    const auto split = stratified_split(ds, cfg.train_fraction, derive_seed(cfg.seed, "split"));
    const auto balanced = resampling::balance_all(split.train, cfg.smote.k, derive_seed(cfg.seed, "smote"),
                                                  cfg.smote.standardize);
    ComparisonTable table;
    const auto hist = class_histogram(split.train);
    std::size_t fewest = split.train.rows() + 1;
    for (const auto& [c, n] : hist) {
        if (n < fewest) {
            fewest = n;
            table.minority_class = static_cast<std::size_t>(c);
        }
    }
    const std::uint64_t fit_seed = derive_seed(cfg.seed, "fit");
    for (auto kind : kinds) {
        const auto defaults = models::make_config(kind, {}, fit_seed);
        table.cells.push_back({kind, "imbalanced", score(models::fit(defaults, split.train), split.test, cfg.averaging), {}});
        table.cells.push_back({kind, "balanced", score(models::fit(defaults, balanced), split.test, cfg.averaging), {}});
        const auto grid = kind == cfg.model.kind ? resolve_grid(cfg) : evaluation::builtin_grid(kind, cfg.model.grid_set);
        auto gs = evaluation::grid_search(kind, grid, balanced, cfg.model.folds, derive_seed(cfg.seed, "tune"));
        const auto tuned = models::make_config(kind, gs.best_params, fit_seed);
        table.cells.push_back(
            {kind, "tuned-balanced", score(models::fit(tuned, balanced), split.test, cfg.averaging), std::move(gs)});
    }
    return table;
}

ordered_json to_json(const ComparisonTable& t) {
    ordered_json rows = ordered_json::array();
    for (const auto& c : t.cells) {
        ordered_json row{{"model", models::to_string(c.kind)},
                         {"condition", c.condition},
                         {"provenance", "holdout"},
                         {"minority_recall", c.report.per_class[t.minority_class].recall},
                         {"evaluation", evaluation::to_json(c.report)}};
        row["grid_search"] = c.grid ? evaluation::to_json(*c.grid) : ordered_json(nullptr);
        rows.push_back(std::move(row));
    }
    return {{"format", "stresskit-comparison"}, {"minority_class", t.minority_class}, {"cells", rows}};
}

std::string comparison_csv(const ComparisonTable& t) {
    std::string out = csv_row({"model", "condition", "accuracy", "precision", "recall", "f1", "minority_recall"});
    for (const auto& c : t.cells) {
        out += csv_row({models::to_string(c.kind), c.condition, format_double(c.report.accuracy),
                        format_double(c.report.headline.precision), format_double(c.report.headline.recall),
                        format_double(c.report.headline.f1), format_double(c.report.per_class[t.minority_class].recall)});
    }
    return out;
}

}  // namespace stresskit::pipeline
