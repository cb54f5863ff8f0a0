#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "stresskit/json_schema.hpp"
#include "stresskit/pipeline.hpp"
#include "stresskit/resources.hpp"
#include "support.hpp"

using namespace stresskit;
using namespace stresskit::pipeline;
using nlohmann::ordered_json;
using testing_support::code_of;
using testing_support::read_file;
using testing_support::scratch_dir;

namespace {

PipelineConfig small_config(std::uint64_t seed = 1) {
    PipelineConfig cfg;
    cfg.seed = seed;
    cfg.synth.class_counts = {60, 40, 20};
    cfg.synth.n_informative = 4;
    cfg.synth.n_noise = 8;
    cfg.synth.class_separation = 1.5;
    cfg.synth.seed = seed;
    cfg.selection.n_target = 5;
    cfg.model.grid = evaluation::grid_from_json(ordered_json::parse(R"({"n_estimators": [10, 20], "max_depth": [1, 2]})"));
    cfg.model.folds = 3;
    cfg.sweep_counts = {3, 5, 8};
    return cfg;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_CASE("pipeline is deterministic apart from timing") {
    const auto a = run_pipeline(small_config());
    const auto b = run_pipeline(small_config());
    CHECK(to_json(a, false).dump() == to_json(b, false).dump());
    CHECK(to_json(a).contains("timing"));
    CHECK(!to_json(a, false).contains("timing"));
    CHECK(to_json(run_pipeline(small_config(2)), false).dump() != to_json(a, false).dump());
}

TEST_CASE("stages appear once each in step order") {
    const auto doc = to_json(run_pipeline(small_config()));
    const std::vector<std::string> names{"load", "split", "smote", "tune", "tuned_baseline", "select", "evaluate"};
    const std::vector<std::string> steps{"I", "II", "III", "IV", "V", "VI", "VII"};
    REQUIRE(doc["stages"].size() == 7);
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(doc["stages"][i]["name"] == names[i]);
        CHECK(doc["stages"][i]["step"] == steps[i]);
    }
}

TEST_CASE("smote off keeps the training histogram") {
    auto cfg = small_config();
    cfg.synth.class_counts = {40, 40, 40};
    cfg.smote.enabled = false;
    const auto r = run_pipeline(cfg);
    CHECK(r.smote_before == r.smote_after);
    CHECK(r.smote_before == r.train_histogram);
    cfg.smote.enabled = true;
    const auto on = run_pipeline(cfg);
    CHECK(on.smote_after == on.smote_before);
}

TEST_CASE("smote on balances the training split only") {
    const auto r = run_pipeline(small_config());
    for (const auto& [c, n] : r.smote_after) CHECK(n == r.train_histogram.at(0));
    std::size_t test_total = 0;
    for (const auto& [c, n] : r.test_histogram) test_total += n;
    CHECK(test_total == r.test_rows);
    CHECK(r.train_rows + r.test_rows == r.rows);
}

TEST_CASE("smote before the split is still step III") {
    auto cfg = small_config();
    cfg.smote.before_split = true;
    const auto r = run_pipeline(cfg);
    for (const auto& [c, n] : r.smote_after) CHECK(n == 60);
    CHECK(r.train_rows + r.test_rows == 180);
    const auto doc = to_json(r);
    CHECK(doc["stages"][2]["name"] == "smote");
    CHECK(doc["stages"][2]["before_split"] == true);
}

TEST_CASE("desk grid yields 16 candidates") {
    auto cfg = small_config();
    cfg.model.grid.reset();
    cfg.model.grid_set = "desk";
    const auto r = run_pipeline(cfg);
    REQUIRE(r.grid.has_value());
    CHECK(r.grid->table.size() == 16);
    for (const auto& c : r.grid->table) CHECK(r.grid->best_cv_accuracy >= c.mean);
    for (const auto& [name, v] : r.grid->best_params) CHECK(r.params.at(name) == v);
}

TEST_CASE("report validates against the shipped schema") {
    const auto doc = to_json(run_pipeline(small_config()));
    const auto schema = ordered_json::parse(resources::report_schema());
    CHECK(json_schema::validate(doc, schema).empty());

    auto broken = doc;
    broken["stages"][0]["step"] = "VIII";
    CHECK(!json_schema::validate(broken, schema).empty());
    broken = doc;
    broken["stages"].erase(broken["stages"].begin() + 3);
    CHECK(!json_schema::validate(broken, schema).empty());
    broken = doc;
    broken["stages"][4]["evaluation"]["accuracy"] = "high";
    CHECK(!json_schema::validate(broken, schema).empty());
    broken = doc;
    broken["stages"][6]["extra"] = 1;
    CHECK(!json_schema::validate(broken, schema).empty());
    CHECK(code_of([&] { validate_report(broken); }) == ErrorCode::SchemaViolation);
}

TEST_CASE("shipped schema agrees with an independent validator") {
    if (std::system("python3 -c 'import jsonschema' >/dev/null 2>&1") != 0) {
        MESSAGE("python jsonschema not available; cross-check skipped");
        return;
    }
    const auto dir = scratch_dir("schema");
    auto cfg = small_config();
    cfg.synth.n_subjects = 3;
    const auto doc = to_json(run_pipeline(cfg));
    testing_support::write_file(dir / "good.json", doc.dump());
    auto bad = doc;
    bad["stages"][1]["name"] = "shuffle";
    testing_support::write_file(dir / "bad.json", bad.dump());
    const std::string schema = std::string(STRESSKIT_SOURCE_DIR) + "/schemas/pipeline_report.schema.json";
    auto check = [&](const std::string& file) {
        const std::string cmd = "python3 -c \"import json,sys,jsonschema; jsonschema.validate(json.load(open(sys.argv[1])), "
                                "json.load(open(sys.argv[2])))\" '" +
                                (dir / file).string() + "' '" + schema + "' >/dev/null 2>&1";
        return std::system(cmd.c_str()) == 0;
    };
    CHECK(check("good.json"));
    CHECK(!check("bad.json"));
    CHECK(json_schema::validate(bad, ordered_json::parse(resources::report_schema())).size() > 0);
}

TEST_CASE("csv outputs carry the report numbers") {
    const auto dir = scratch_dir("pipeline_csv");
    auto cfg = small_config();
    cfg.out_dir = dir;
    const auto r = run_pipeline(cfg);
    const auto doc = ordered_json::parse(read_file(dir / "report.json"));
    CHECK(doc == ordered_json::parse(to_json(r).dump()));

    const auto metrics = parse_csv(read_file(dir / "metrics.csv"));
    REQUIRE(metrics.size() == 3);
    CHECK(metrics[0] == std::vector<std::string>{"model", "condition", "stage", "accuracy", "precision", "recall", "f1"});
    for (std::size_t row = 1; row <= 2; ++row) {
        const auto& stage = doc["stages"][row == 1 ? 4 : 6];
        CHECK(metrics[row][0] == "gb");
        CHECK(metrics[row][1] == "tuned-balanced");
        CHECK(metrics[row][2] == stage["name"].get<std::string>());
        CHECK(std::stod(metrics[row][3]) == stage["evaluation"]["accuracy"].get<double>());
        CHECK(std::stod(metrics[row][4]) == stage["evaluation"]["precision"].get<double>());
        CHECK(std::stod(metrics[row][5]) == stage["evaluation"]["recall"].get<double>());
        CHECK(std::stod(metrics[row][6]) == stage["evaluation"]["f1"].get<double>());
    }
    const auto sweep = parse_csv(read_file(dir / "sweep.csv"));
    const auto& sweep_json = doc["stages"][5]["sweep"];
    REQUIRE(sweep.size() == sweep_json.size() + 1);
    for (std::size_t q = 0; q < sweep_json.size(); ++q) {
        CHECK(sweep[q + 1][0] == "coc_rfe");
        CHECK(std::stoul(sweep[q + 1][1]) == sweep_json[q]["count"].get<std::size_t>());
        CHECK(std::stod(sweep[q + 1][2]) == sweep_json[q]["accuracy"].get<double>());
    }
    CHECK(!std::filesystem::exists(dir / "report.json.tmp"));
}

TEST_CASE("sweep counts above the feature count are skipped") {
    auto cfg = small_config();
    cfg.sweep_counts = {3, 12, 40};
    const auto r = run_pipeline(cfg);
    REQUIRE(r.sweep.size() == 2);
    CHECK(r.sweep[1].count == 12);
}

TEST_CASE("a failing stage names itself and leaves no files") {
    const auto dir = scratch_dir("pipeline_fail");
    auto cfg = small_config();
    cfg.out_dir = dir;
    cfg.model.folds = 50;
    try {
        (void)run_pipeline(cfg);
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ClassSmallerThanK);
        CHECK(std::string(e.what()).find("stage 'tune' failed") != std::string::npos);
    }
    CHECK(std::filesystem::is_empty(dir));

    cfg = small_config();
    cfg.input = dir / "missing.csv";
    try {
        (void)run_pipeline(cfg);
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Io);
        CHECK(std::string(e.what()).find("stage 'load' failed") != std::string::npos);
    }
}

TEST_CASE("per-subject reports") {
    auto cfg = small_config();
    cfg.synth.n_subjects = 2;
    const auto r = run_pipeline(cfg);
    REQUIRE(r.per_subject.has_value());
    CHECK(r.per_subject->protocol == "within_subject");
    REQUIRE(r.per_subject->subjects.size() == 2);
    CHECK(r.per_subject->subjects[0].subject_id == "S1");
    CHECK(r.per_subject->subjects[1].subject_id == "S2");
    CHECK(r.per_subject->subjects[0].rows + r.per_subject->subjects[1].rows == 120);
    const double mean = (r.per_subject->subjects[0].report.accuracy + r.per_subject->subjects[1].report.accuracy) / 2;
    CHECK(r.per_subject->mean_accuracy == doctest::Approx(mean).epsilon(1e-15));

    cfg.loso = true;
    cfg.synth.n_subjects = 3;
    const auto loso = run_pipeline(cfg);
    CHECK(loso.per_subject->protocol == "loso");
    CHECK(loso.per_subject->subjects.size() == 3);

    cfg = small_config();
    cfg.synth.n_subjects = 0;
    CHECK(!run_pipeline(cfg).per_subject.has_value());
}

TEST_CASE("separable subjects score perfectly") {
    auto cfg = small_config();
    cfg.synth.class_separation = 20.0;
    cfg.synth.n_subjects = 2;
    cfg.model.tune = false;
    const auto ds = generate_synthetic(cfg.synth);
    const auto rep = per_subject_report(cfg, ds, {{"n_estimators", 20.0}});
    for (const auto& s : rep.subjects) {
        CHECK(s.report.accuracy == 1.0);
        CHECK(s.report.macro.f1 == 1.0);
    }
    CHECK(rep.mean_accuracy == 1.0);
}

TEST_CASE("tiny subjects are rejected") {
    auto cfg = small_config();
    cfg.synth.n_subjects = 20;  // 6 rows each
    const auto ds = generate_synthetic(cfg.synth);
    CHECK(code_of([&] { (void)per_subject_report(cfg, ds, {}); }) == ErrorCode::SubjectTooSmall);
    CHECK(code_of([&] { (void)run_pipeline(cfg); }) == ErrorCode::SubjectTooSmall);
}

TEST_CASE("compare_models table shapes") {
    auto cfg = small_config();
    cfg.model.grid_set = "desk";
    cfg.model.grid.reset();
    const auto ds = generate_synthetic(cfg.synth);
    const auto one = compare_models(cfg, ds, {models::ModelKind::gb});
    REQUIRE(one.cells.size() == 3);
    CHECK(one.cells[0].condition == "imbalanced");
    CHECK(one.cells[1].condition == "balanced");
    CHECK(one.cells[2].condition == "tuned-balanced");
    CHECK(one.cells[2].grid->table.size() == 16);
    CHECK(one.minority_class == 2);

    const auto all = compare_models(cfg, ds,
                                    {models::ModelKind::gb, models::ModelKind::rf, models::ModelKind::knn,
                                     models::ModelKind::lr, models::ModelKind::lda});
    CHECK(all.cells.size() == 15);
    const auto csv = parse_csv(comparison_csv(all));
    REQUIRE(csv.size() == 16);
    std::size_t metric_cells = 0;
    for (std::size_t q = 1; q < csv.size(); ++q) metric_cells += csv[q].size() - 3;
    CHECK(metric_cells == 60);
    const auto j = to_json(all);
    CHECK(j["cells"].size() == 15);
    CHECK(j["cells"][0]["grid_search"].is_null());
    CHECK(code_of([&] { (void)compare_models(cfg, ds, {models::ModelKind::svc}); }) == ErrorCode::UnsupportedModel);
}

TEST_CASE("config json round trip and validation") {
    auto cfg = small_config();
    cfg.smote.before_split = true;
    cfg.averaging = evaluation::Averaging::weighted;
    const auto j = to_json(cfg);
    CHECK(to_json(config_from_json(j)) == j);

    const auto parsed = config_from_json(ordered_json::parse(R"({"seed": 9, "model": {"kind": "lr", "params": {"C": 2}}})"));
    CHECK(parsed.synth.seed == 9);
    CHECK(parsed.model.kind == models::ModelKind::lr);

    CHECK(code_of([] { (void)config_from_json(ordered_json::parse(R"({"sed": 1})")); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([] { (void)config_from_json(ordered_json::parse(R"({"smote": {"kk": 1}})")); }) ==
          ErrorCode::InvalidConfig);
    CHECK(code_of([] { (void)config_from_json(ordered_json::parse(R"({"model": {"kind": "svc"}})")); }) ==
          ErrorCode::UnsupportedModel);
    CHECK(code_of([] { (void)config_from_json(ordered_json::parse(R"({"train_fraction": 1.0})")); }) ==
          ErrorCode::InvalidConfig);
    CHECK(code_of([] { (void)config_from_json(ordered_json::parse(R"({"model": {"params": {"depth": 1}}})")); }) ==
          ErrorCode::InvalidParam);
    CHECK(condition_name(false, true) == "tuned-imbalanced");
}
