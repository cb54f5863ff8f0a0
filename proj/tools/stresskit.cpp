#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "stresskit/dataset.hpp"
#include "stresskit/error.hpp"
#include "stresskit/evaluation.hpp"
#include "stresskit/models.hpp"
#include "stresskit/pipeline.hpp"
#include "stresskit/selection.hpp"
#include "stresskit/signal.hpp"
#include "stresskit/smote.hpp"

using namespace stresskit;
using nlohmann::ordered_json;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::string config;
    std::string out;
    bool quiet = false;
    CLI::Option* seed_opt = nullptr;
};

Globals g;

void note(const std::string& msg) {
    if (!g.quiet) std::cerr << "stresskit: " << msg << '\n';
}

ordered_json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open '" + path + "'");
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::InvalidConfig, "'" + path + "' is not valid JSON: " + e.what());
    }
}

pipeline::PipelineConfig base_config() {
    pipeline::PipelineConfig cfg;
    bool synth_seed_given = false;
    if (!g.config.empty()) {
        const auto j = read_json(g.config);
        cfg = pipeline::config_from_json(j);
        synth_seed_given = j.contains("synth") && j["synth"].contains("seed");
    }
    if (*g.seed_opt) {
        cfg.seed = g.seed;
        if (!synth_seed_given) cfg.synth.seed = g.seed;
    }
    if (!g.out.empty()) cfg.out_dir = g.out;
    return cfg;
}

/// JSON to --out when given, else stdout.
void emit(const ordered_json& j) {
    const std::string text = j.dump(2) + "\n";
    if (g.out.empty()) {
        std::cout << text;
    } else {
        pipeline::write_text(g.out, text);
        note("wrote " + g.out);
    }
}

std::string require_out(const char* what) {
    if (g.out.empty()) throw Error(ErrorCode::InvalidConfig, std::string("--out is required for ") + what);
    return g.out;
}

models::ParamMap parse_params(const std::vector<std::string>& items) {
    models::ParamMap params;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw Error(ErrorCode::InvalidParam, "expected name=value, got '" + item + "'");
        }
        const std::string value = item.substr(eq + 1);
        try {
            params[item.substr(0, eq)] = models::param_from_json(ordered_json::parse(value));
        } catch (const nlohmann::json::parse_error&) {
            params[item.substr(0, eq)] = value;
        }
    }
    return params;
}

int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Config: return 2;
        case ErrorCategory::Data: return 3;
        case ErrorCategory::Stage: return 4;
    }
    return 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stress classification toolkit: features, SMOTE, CoC-RFE selection, tuning and evaluation"};
    app.require_subcommand(1);
    app.fallthrough();
    g.seed_opt = app.add_option("--seed", g.seed, "Master seed for every randomized step");
    app.add_option("--config", g.config, "Pipeline configuration JSON");
    app.add_option("--out", g.out, "Output file, or directory for pipeline/compare/sweep/per-subject");
    app.add_flag("--quiet", g.quiet, "No progress messages");

    std::string in;
    std::string label_column = "label";
    auto add_input = [&](CLI::App* sub, bool required) {
        auto* opt = sub->add_option("--in", in, "Canonical feature CSV");
        if (required) opt->required();
        sub->add_option("--label-column", label_column, "Name of the label column");
    };
    auto load = [&] { return load_dataset(in, label_column); };

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
    std::vector<std::size_t> counts{200, 200, 200};
    SynthSpec spec;
    synth->add_option("--counts", counts, "Rows per class")->delimiter(',');
    synth->add_option("--informative", spec.n_informative, "Informative columns");
    synth->add_option("--redundant", spec.n_redundant, "Redundant columns");
    synth->add_option("--noise", spec.n_noise, "Noise columns");
    synth->add_option("--separation", spec.class_separation, "Distance between class means");
    synth->add_option("--subjects", spec.n_subjects, "Subject ids to deal rows over (0: none)");

    // features
    auto* features = app.add_subcommand("features", "Window features from raw channel CSVs");
    std::vector<std::string> channel_args;
    std::optional<double> rate;
    signal::WindowConfig window;
    signal::StaticAttributes attrs;
    double eda_window = 4.0;
    int feature_label = 0;
    std::string subject;
    features->add_option("--channel", channel_args, "name=path, repeatable")->required();
    features->add_option("--rate", rate, "Sampling rate for single-column files");
    features->add_option("--window", window.window_seconds, "Window length in seconds (0: whole segment)");
    features->add_option("--overlap", window.overlap_fraction, "Window overlap fraction");
    features->add_option("--age", attrs.age, "Subject age")->required();
    features->add_option("--weight", attrs.weight, "Subject weight")->required();
    features->add_option("--eda-window", eda_window, "EDA median window in seconds");
    features->add_option("--label", feature_label, "Class label for every row")->required();
    features->add_option("--subject", subject, "Subject id column value");

    // balance
    auto* balance = app.add_subcommand("balance", "SMOTE oversampling");
    add_input(balance, true);
    std::size_t k = 5;
    std::optional<double> percent;
    std::optional<int> target_class;
    bool standardize = false;
    balance->add_option("--k", k, "Neighbors per minority row");
    balance->add_option("--percent", percent, "P: synthetic rows per minority row, in percent");
    balance->add_option("--class", target_class, "Oversample only this class");
    balance->add_flag("--standardize", standardize, "Neighbor search on z-scored features");

    // select
    auto* select = app.add_subcommand("select", "Feature selection");
    add_input(select, true);
    std::string method = "coc-rfe";
    selection::SelectionConfig sel_cfg;
    std::string filter = "relevance";
    select->add_option("--method", method, "coc-rfe, rfe, anova_f, mutual_info, correlation, feature_importance");
    select->add_option("--n", sel_cfg.n_target, "Features to keep");
    select->add_option("--threshold", sel_cfg.correlation_threshold, "Correlation threshold C");
    select->add_option("--filter", filter, "relevance or redundancy");
    select->add_option("--step", sel_cfg.step, "Features removed per elimination round");
    select->add_option("--bins", sel_cfg.mi_bins, "Quantile bins for mutual information");

    // tune
    auto* tune = app.add_subcommand("tune", "Grid search by stratified k-fold CV");
    add_input(tune, true);
    std::string model_kind = "gb";
    std::string grid_path;
    std::string grid_set = "table1";
    std::size_t folds = 10;
    std::vector<std::string> param_args;
    tune->add_option("--model", model_kind, "gb, rf, knn, lr, lda");
    tune->add_option("--grid", grid_path, "Grid JSON {name: [values]}");
    tune->add_option("--grid-set", grid_set, "Built-in grid set when --grid is absent");
    tune->add_option("--folds", folds, "CV folds");
    tune->add_option("--param", param_args, "Fixed name=value, repeatable");

    // train
    auto* train = app.add_subcommand("train", "Fit a model and save it as JSON");
    add_input(train, true);
    train->add_option("--model", model_kind, "gb, rf, knn, lr, lda");
    train->add_option("--param", param_args, "name=value, repeatable");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Score a saved model on a dataset");
    add_input(evaluate, true);
    std::string model_path;
    std::string averaging = "macro";
    evaluate->add_option("--model", model_path, "Model JSON from train")->required();
    evaluate->add_option("--averaging", averaging, "macro or weighted");

    // compare
    auto* compare = app.add_subcommand("compare", "Imbalanced / balanced / tuned-balanced table");
    add_input(compare, false);
    std::vector<std::string> kinds{"gb"};
    compare->add_option("--models", kinds, "Model kinds")->delimiter(',');
    compare->add_option("--grid-set", grid_set, "Built-in grid set");
    compare->add_option("--folds", folds, "CV folds");
    compare->add_option("--k", k, "SMOTE neighbors");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Accuracy against selected feature count");
    add_input(sweep, false);
    std::vector<std::size_t> sweep_counts{10, 20, 30, 40, 50};
    std::string protocol = "holdout";
    bool sweep_smote = false;
    sweep->add_option("--method", method, "Selection method");
    sweep->add_option("--counts", sweep_counts, "Feature counts")->delimiter(',');
    sweep->add_option("--threshold", sel_cfg.correlation_threshold, "Correlation threshold C");
    sweep->add_option("--model", model_kind, "Scoring model");
    sweep->add_option("--param", param_args, "name=value, repeatable");
    sweep->add_option("--protocol", protocol, "holdout or cv");
    sweep->add_option("--folds", folds, "Folds for --protocol cv");
    sweep->add_flag("--smote", sweep_smote, "Balance each training part first");

    // per-subject
    auto* per_subject = app.add_subcommand("per-subject", "One evaluation per subject");
    add_input(per_subject, false);
    bool loso = false;
    per_subject->add_option("--model", model_kind, "gb, rf, knn, lr, lda");
    per_subject->add_option("--param", param_args, "name=value, repeatable");
    per_subject->add_flag("--loso", loso, "Leave one subject out instead of within-subject splits");

    // pipeline
    auto* run = app.add_subcommand("pipeline", "STEP I-VII end to end");
    add_input(run, false);
    bool before_split = false;
    bool no_smote = false;
    run->add_flag("--smote-before-split", before_split, "Balance before the train/test split");
    run->add_flag("--no-smote", no_smote, "Skip balancing");
    run->add_option("--averaging", averaging, "macro or weighted");
    run->add_flag("--loso", loso, "Leave-one-subject-out per-subject reports");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) {
            auto cfg = base_config();
            spec.class_counts = counts;
            spec.n_classes = counts.size();
            spec.seed = cfg.seed;
            save_dataset(generate_synthetic(spec), require_out("synth"));
            note("wrote " + g.out);
        } else if (features->parsed()) {
            std::vector<signal::SignalSeries> channels;
            for (const auto& item : channel_args) {
                const auto eq = item.find('=');
                if (eq == std::string::npos || eq == 0) {
                    throw Error(ErrorCode::InvalidConfig, "--channel expects name=path, got '" + item + "'");
                }
                channels.push_back(signal::load_signal(item.substr(eq + 1), item.substr(0, eq), rate));
            }
            const auto rows = signal::extract_features(channels, window, attrs, eda_window);
            FeatureSchema schema{rows.feature_names, "label", std::nullopt};
            std::optional<std::vector<std::string>> subjects;
            if (!subject.empty()) {
                schema.subject_column = "subject_id";
                subjects.emplace(rows.rows, subject);
            }
            if (rows.rows == 0) throw Error(ErrorCode::EmptyDataset, "every window was dropped");
            Dataset ds(schema, rows.values, std::vector<Label>(rows.rows, feature_label), subjects,
                       std::max<std::size_t>(3, static_cast<std::size_t>(feature_label) + 1));
            save_dataset(ds, require_out("features"));
            note(std::to_string(rows.rows) + " rows, " + std::to_string(rows.dropped_windows) + " windows dropped");
        } else if (balance->parsed()) {
            const auto cfg = base_config();
            const auto ds = load();
            Dataset out = ds;
            if (target_class) {
                resampling::SmoteConfig sc;
                sc.percent = percent.value_or(100.0);
                sc.k_neighbors = k;
                sc.seed = cfg.seed;
                sc.standardize_distances = standardize;
                out = resampling::append_smote(ds, *target_class, sc);
            } else {
                if (percent) throw Error(ErrorCode::InvalidConfig, "--percent needs --class");
                out = resampling::balance_all(ds, k, cfg.seed, standardize);
            }
            save_dataset(out, require_out("balance"));
            note(std::to_string(out.rows() - ds.rows()) + " synthetic rows");
        } else if (select->parsed()) {
            const auto cfg = base_config();
            sel_cfg.seed = cfg.seed;
            sel_cfg.filter = selection::parse_filter(filter);
            sel_cfg.estimator = models::default_ranking_estimator(cfg.seed);
            emit(selection::to_json(selection::select_features(load(), selection::parse_method(method), sel_cfg)));
        } else if (tune->parsed()) {
            const auto cfg = base_config();
            const auto kind = models::parse_kind(model_kind);
            const auto grid = grid_path.empty() ? evaluation::builtin_grid(kind, grid_set)
                                                : evaluation::grid_from_json(read_json(grid_path));
            evaluation::validate_grid(kind, grid);
            emit(evaluation::to_json(evaluation::grid_search(kind, grid, load(), folds, cfg.seed, parse_params(param_args))));
        } else if (train->parsed()) {
            const auto cfg = base_config();
            const auto model = models::fit(models::make_config(models::parse_kind(model_kind), parse_params(param_args), cfg.seed), load());
            models::save_model(model, require_out("train"));
            note("wrote " + g.out);
        } else if (evaluate->parsed()) {
            const auto model = models::load_model(model_path);
            const auto ds = load().select_features(model.feature_names);
            const auto cm = evaluation::confusion(ds.labels(), models::predict(model, ds), ds.n_classes());
            auto j = evaluation::to_json(evaluation::metrics(cm, evaluation::parse_averaging(averaging)));
            j["provenance"] = "holdout";
            emit(j);
        } else if (compare->parsed()) {
            auto cfg = base_config();
            cfg.model.grid_set = grid_set;
            cfg.model.folds = folds;
            cfg.smote.k = k;
            if (!in.empty()) cfg.input = in;
            cfg.label_column = label_column;
            std::vector<models::ModelKind> parsed;
            for (const auto& name : kinds) parsed.push_back(models::parse_kind(name));
            if (!cfg.model.grid || std::find(parsed.begin(), parsed.end(), cfg.model.kind) == parsed.end()) {
                cfg.model.grid.reset();
            }
            const auto table = pipeline::compare_models(cfg, pipeline::load_input(cfg), parsed);
            if (g.out.empty()) {
                std::cout << pipeline::to_json(table).dump(2) << '\n';
            } else {
                std::filesystem::create_directories(g.out);
                pipeline::write_text(std::filesystem::path(g.out) / "comparison.json", pipeline::to_json(table).dump(2) + "\n");
                pipeline::write_text(std::filesystem::path(g.out) / "comparison.csv", pipeline::comparison_csv(table));
                note("wrote comparison.json and comparison.csv to " + g.out);
            }
        } else if (sweep->parsed()) {
            auto cfg = base_config();
            if (!in.empty()) cfg.input = in;
            cfg.label_column = label_column;
            const auto ds = pipeline::load_input(cfg);
            selection::EvalProtocol ep;
            if (protocol == "cv") ep.kind = selection::EvalProtocol::Kind::cv;
            else if (protocol != "holdout") throw Error(ErrorCode::InvalidConfig, "--protocol must be holdout or cv");
            ep.folds = folds;
            ep.seed = cfg.seed;
            ep.train_fraction = cfg.train_fraction;
            ep.smote_train = sweep_smote;
            ep.smote_k = cfg.smote.k;
            sel_cfg.seed = cfg.seed;
            sel_cfg.estimator = models::default_ranking_estimator(cfg.seed);
            const auto m = selection::parse_method(method);
            const auto est = models::make_config(models::parse_kind(model_kind), parse_params(param_args), cfg.seed);
            const auto rows = selection::sweep(ds, m, sweep_counts, est, ep, sel_cfg);
            ordered_json j = ordered_json::array();
            for (const auto& r : rows) {
                j.push_back({{"count", r.count},
                             {"accuracy", r.accuracy},
                             {"provenance", protocol == "cv" ? "cv_mean" : "holdout"},
                             {"target_exceeds_survivors", r.target_exceeds_survivors},
                             {"selected", r.selected}});
            }
            if (g.out.empty()) {
                std::cout << j.dump(2) << '\n';
            } else {
                std::filesystem::create_directories(g.out);
                pipeline::write_text(std::filesystem::path(g.out) / "sweep.json", j.dump(2) + "\n");
                pipeline::write_text(std::filesystem::path(g.out) / "sweep.csv", pipeline::sweep_csv(selection::to_string(m), rows));
                note("wrote sweep.json and sweep.csv to " + g.out);
            }
        } else if (per_subject->parsed()) {
            auto cfg = base_config();
            if (!in.empty()) cfg.input = in;
            cfg.label_column = label_column;
            cfg.loso = cfg.loso || loso;
            cfg.model.kind = models::parse_kind(model_kind);
            const auto rep = pipeline::per_subject_report(cfg, pipeline::load_input(cfg), parse_params(param_args));
            ordered_json subjects = ordered_json::array();
            for (const auto& s : rep.subjects) {
                subjects.push_back({{"subject_id", s.subject_id}, {"rows", s.rows}, {"evaluation", evaluation::to_json(s.report)}});
            }
            ordered_json j{{"protocol", rep.protocol}, {"mean_accuracy", rep.mean_accuracy}, {"subjects", subjects}};
            if (g.out.empty()) {
                std::cout << j.dump(2) << '\n';
            } else {
                std::filesystem::create_directories(g.out);
                pipeline::write_text(std::filesystem::path(g.out) / "per_subject.json", j.dump(2) + "\n");
                note("wrote per_subject.json to " + g.out);
            }
        } else if (run->parsed()) {
            auto cfg = base_config();
            if (!in.empty()) cfg.input = in;
            if (*run->get_option("--label-column")) cfg.label_column = label_column;
            if (before_split) cfg.smote.before_split = true;
            if (no_smote) cfg.smote.enabled = false;
            if (*run->get_option("--averaging")) cfg.averaging = evaluation::parse_averaging(averaging);
            if (loso) cfg.loso = true;
            const auto report = pipeline::run_pipeline(cfg);
            if (cfg.out_dir.empty()) {
                std::cout << pipeline::to_json(report).dump(2) << '\n';
            } else {
                note("wrote report.json, metrics.csv and sweep.csv to " + cfg.out_dir.string());
            }
            for (const auto& t : report.timing) note(t.stage + " " + format_double(t.seconds) + " s");
        }
    } catch (const Error& e) {
        std::cerr << "stresskit: error: " << e.what() << '\n';
        return exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "stresskit: error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
