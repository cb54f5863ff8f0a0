#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "stresskit/evaluation.hpp"
#include "stresskit/selection.hpp"
#include "support.hpp"

using namespace stresskit;
using namespace stresskit::selection;
using testing_support::code_of;

namespace {

Dataset frame(std::vector<std::vector<double>> columns, std::vector<Label> y, std::size_t k = 0) {
    FeatureSchema s;
    for (std::size_t j = 0; j < columns.size(); ++j) s.feature_names.push_back("c" + std::to_string(j));
    std::vector<double> x;
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (const auto& c : columns) x.push_back(c[i]);
    }
    return Dataset(s, x, std::move(y), std::nullopt, k);
}

// sample covariance over the product of sample standard deviations
double cov_corr(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    long double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    long double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    const long double cov = sab / (n - 1);
    return static_cast<double>(cov / (std::sqrt(saa / (n - 1)) * std::sqrt(sbb / (n - 1))));
}

Dataset default_synth(std::uint64_t seed) {
    SynthSpec spec;
    spec.class_counts = {150, 100, 50};
    spec.n_informative = 6;
    spec.n_noise = 14;
    spec.class_separation = 1.0;
    spec.seed = seed;
    return generate_synthetic(spec);
}

models::ModelConfig small_gb() { return models::make_config(models::ModelKind::gb, {{"n_estimators", 20.0}}); }

}  // namespace

TEST_CASE("correlation matrix matches the covariance formula") {
    const auto ds = default_synth(1);
    const auto corr = correlation_matrix(ds);
    const std::size_t d = ds.cols();
    for (std::size_t a = 0; a < d; ++a) {
        CHECK(corr[a * d + a] == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t b = 0; b < d; ++b) {
            CHECK(std::abs(corr[a * d + b] - cov_corr(ds.column(a), ds.column(b))) < 1e-10);
            CHECK(corr[a * d + b] == corr[b * d + a]);
        }
    }
    std::vector<double> y(ds.labels().begin(), ds.labels().end());
    const auto target = feature_target_scores(ds);
    for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(target[j] - std::abs(cov_corr(ds.column(j), y))) < 1e-10);
}

TEST_CASE("zero-variance columns correlate with nothing") {
    const auto ds = frame({{1, 1, 1, 1}, {1, 2, 3, 4}}, {0, 0, 1, 1});
    const auto corr = correlation_matrix(ds);
    CHECK(corr == std::vector<double>{1, 0, 0, 1});
    CHECK(feature_target_scores(ds)[0] == 0.0);
    CHECK(code_of([] { (void)correlation_matrix(frame({{1}}, {0}, 2)); }) == ErrorCode::TooFewRows);
}

TEST_CASE("anova F by hand") {
    // groups {1,2,3} and {4,5,6}: SSB 13.5 on 1 df, SSW 4 on 4 df
    const auto ds = frame({{1, 2, 3, 4, 5, 6}, {1, 1, 1, 1, 1, 1}, {0, 0, 0, 1, 1, 1}}, {0, 0, 0, 1, 1, 1});
    const auto f = anova_f_scores(ds);
    CHECK(std::abs(f[0] - 13.5) < 1e-9);
    CHECK(f[1] == 0.0);
    CHECK(std::isinf(f[2]));
    CHECK(code_of([] { (void)anova_f_scores(frame({{1, 2, 3}}, {0, 0, 1})); }) == ErrorCode::ClassTooSmall);
}

TEST_CASE("anova F matches the textbook three-group example") {
    // groups {2,3,7}, {8,9,10}, {1,4,4}: grand mean 5.333..., SSB 78, SSW 24
    const auto ds = frame({{2, 3, 7, 8, 9, 10, 1, 4, 4}}, {0, 0, 0, 1, 1, 1, 2, 2, 2});
    const double ssb = 3 * (4.0 - 48.0 / 9) * (4.0 - 48.0 / 9) + 3 * (9.0 - 48.0 / 9) * (9.0 - 48.0 / 9) +
                       3 * (3.0 - 48.0 / 9) * (3.0 - 48.0 / 9);
    const double ssw = (4 + 1 + 9) + (1 + 0 + 1) + (4 + 1 + 1);
    CHECK(std::abs(anova_f_scores(ds)[0] - (ssb / 2) / (ssw / 6)) < 1e-9);
}

TEST_CASE("mutual information by hand") {
    // column 0 decides the label, column 1 is constant, column 2 is independent of it
    const auto ds = frame({{0, 0, 1, 1, 0, 0, 1, 1}, {5, 5, 5, 5, 5, 5, 5, 5}, {0, 1, 0, 1, 0, 1, 0, 1}},
                          {0, 0, 1, 1, 0, 0, 1, 1});
    const auto mi = mutual_info_scores(ds, 2);
    CHECK(std::abs(mi[0] - std::log(2.0)) < 1e-12);
    CHECK(mi[1] == 0.0);
    CHECK(std::abs(mi[2]) < 1e-12);
    CHECK(code_of([&] { (void)mutual_info_scores(ds, 1); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("mutual information ranks informative columns first") {
    SynthSpec spec;
    spec.class_counts = {200, 200, 200};
    spec.n_informative = 3;
    spec.n_noise = 7;
    spec.class_separation = 2.0;
    const auto ds = generate_synthetic(spec);
    const auto r = select_features(ds, Method::mutual_info, SelectionConfig{3});
    const auto anova = select_features(ds, Method::anova_f, SelectionConfig{3});
    CHECK(r.selected == anova.selected);
    for (const auto& name : r.selected) CHECK(name.rfind("inf_", 0) == 0);
}

TEST_CASE("score methods keep the top n in schema order") {
    const auto ds = frame({{0, 1, 0, 0, 1, 0}, {0, 0, 0, 1, 1, 1}, {0, 0, 1, 0, 1, 1}}, {0, 0, 0, 1, 1, 1});
    const auto r = select_features(ds, Method::correlation, SelectionConfig{2});
    CHECK(r.ranking.front() == "c1");
    CHECK(r.selected.size() == 2);
    CHECK(r.selected.front() == "c1");
    CHECK(r.elimination_order.size() == 1);
    CHECK(r.elimination_order.front() == r.ranking.back());
    const auto all = select_features(ds, Method::anova_f, SelectionConfig{5});
    CHECK(all.selected.size() == 3);
    CHECK(all.target_exceeds_survivors);
}

TEST_CASE("rfe removes the least important feature each round") {
    const auto ds = default_synth(2);
    const auto r = rfe(ds, small_gb(), 5, 1, 3);
    CHECK(r.selected.size() == 5);
    CHECK(r.elimination_order.size() == ds.cols() - 5);
    CHECK(r.ranking.size() == ds.cols());
    std::set<std::string> all(r.ranking.begin(), r.ranking.end());
    CHECK(all.size() == ds.cols());
    // first elimination is the argmin importance of the full fit
    auto cfg = small_gb();
    cfg.seed = 3;
    const auto imp = models::importance_scores(models::fit(cfg, ds));
    std::size_t worst = 0;
    for (std::size_t j = 0; j < imp.size(); ++j) {
        if (imp[j] <= imp[worst]) worst = j;
    }
    CHECK(r.elimination_order.front() == ds.schema().feature_names[worst]);
    const auto stepped = rfe(ds, small_gb(), 5, 4, 3);
    CHECK(stepped.selected.size() == 5);
    CHECK(stepped.elimination_order.size() == ds.cols() - 5);
}

TEST_CASE("coc_rfe with a zero threshold is plain rfe") {
    const auto ds = default_synth(3);
    SelectionConfig cfg;
    cfg.n_target = 8;
    cfg.correlation_threshold = 0.0;
    cfg.estimator = small_gb();
    cfg.seed = 4;
    const auto coc = coc_rfe(ds, cfg);
    CHECK(coc.filter_dropped.empty());
    CHECK(coc == rfe(ds, cfg.estimator, 8, 1, 4));
}

TEST_CASE("coc_rfe filters, then eliminates") {
    const auto ds = default_synth(4);
    SelectionConfig cfg;
    cfg.n_target = 4;
    cfg.correlation_threshold = 0.15;
    cfg.estimator = small_gb();
    const auto r = coc_rfe(ds, cfg);
    const auto scores = feature_target_scores(ds);
    for (const auto& d : r.filter_dropped) {
        CHECK(d.score < 0.15);
        CHECK(std::find(r.selected.begin(), r.selected.end(), d.name) == r.selected.end());
    }
    for (std::size_t q = 1; q < r.filter_dropped.size(); ++q) CHECK(r.filter_dropped[q - 1].score >= r.filter_dropped[q].score);
    CHECK(r.selected.size() == 4);
    CHECK(r.ranking.size() == ds.cols());
    CHECK(!r.target_exceeds_survivors);

    cfg.n_target = 19;
    const auto few = coc_rfe(ds, cfg);
    CHECK(few.target_exceeds_survivors == (ds.cols() - few.filter_dropped.size() < 19));

    cfg.correlation_threshold = 1.0;
    CHECK(code_of([&] { (void)coc_rfe(ds, cfg); }) == ErrorCode::AllFeaturesFiltered);
    cfg.correlation_threshold = 1.5;
    CHECK(code_of([&] { (void)coc_rfe(ds, cfg); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("redundancy filter drops the weaker of a correlated pair") {
    std::mt19937 gen(1);
    std::normal_distribution<double> n01;
    std::vector<double> a, b, c;
    std::vector<Label> y;
    for (int i = 0; i < 100; ++i) {
        const Label lab = i % 2;
        const double base = lab * 2.0 + n01(gen);
        a.push_back(base);
        b.push_back(base + 0.05 * n01(gen));
        c.push_back(n01(gen));
        y.push_back(lab);
    }
    const auto ds = frame({a, b, c}, y);
    SelectionConfig cfg;
    cfg.n_target = 2;
    cfg.correlation_threshold = 0.9;
    cfg.filter = FilterMode::redundancy;
    const auto r = coc_rfe(ds, cfg);
    REQUIRE(r.filter_dropped.size() == 1);
    const auto s = feature_target_scores(ds);
    CHECK(r.filter_dropped[0].name == (s[0] >= s[1] ? "c1" : "c0"));
    CHECK(r.selected.size() == 2);
}

TEST_CASE("holdout sweep reuses one elimination path") {
    const auto ds = default_synth(5);
    const auto split = stratified_split(ds, 0.7, 1);
    SelectionConfig base;
    base.estimator = small_gb();
    base.seed = 2;
    base.correlation_threshold = 0.05;
    const std::vector<std::size_t> counts{12, 3, 7};
    for (auto method : {Method::rfe, Method::coc_rfe}) {
        const auto rows = sweep_holdout(split.train, split.test, method, counts, small_gb(), base);
        REQUIRE(rows.size() == 3);
        for (std::size_t q = 0; q < counts.size(); ++q) {
            CAPTURE(q);
            SelectionConfig cfg = base;
            cfg.n_target = counts[q];
            const auto direct = select_features(split.train, method, cfg);
            CHECK(rows[q].count == counts[q]);
            CHECK(rows[q].selected == direct.selected);
            CHECK(rows[q].target_exceeds_survivors == direct.target_exceeds_survivors);
            const auto model = models::fit(small_gb(), split.train.select_features(direct.selected));
            const auto held = split.test.select_features(direct.selected);
            CHECK(rows[q].accuracy == evaluation::accuracy(held.labels(), models::predict(model, held)));
        }
    }
    CHECK(code_of([&] { (void)sweep_holdout(split.train, split.test, Method::rfe, {21}, small_gb(), base); }) ==
          ErrorCode::InvalidConfig);
}

TEST_CASE("cv sweep averages fold accuracies") {
    const auto ds = default_synth(6);
    EvalProtocol p;
    p.kind = EvalProtocol::Kind::cv;
    p.folds = 3;
    p.seed = 1;
    SelectionConfig base;
    base.estimator = small_gb();
    const auto rows = sweep(ds, Method::anova_f, {5, 10}, small_gb(), p, base);
    const auto folds = evaluation::kfold_indices(ds.labels(), 3, 1);
    double mean5 = 0.0;
    for (std::size_t f = 0; f < 3; ++f) {
        const auto r = sweep_holdout(ds.subset_rows(evaluation::fold_complement(folds, f)), ds.subset_rows(folds[f]),
                                     Method::anova_f, {5}, small_gb(), base);
        mean5 += r[0].accuracy / 3.0;
    }
    CHECK(rows[0].accuracy == doctest::Approx(mean5).epsilon(1e-12));
}

TEST_CASE("method and filter names parse") {
    CHECK(parse_method("coc-rfe") == Method::coc_rfe);
    CHECK(parse_method("coc_rfe") == Method::coc_rfe);
    CHECK(parse_method("anova") == Method::anova_f);
    CHECK(parse_method("mi") == Method::mutual_info);
    CHECK(to_string(Method::feature_importance) == "feature_importance");
    CHECK(parse_filter("redundancy") == FilterMode::redundancy);
    CHECK(code_of([] { (void)parse_method("lasso"); }) == ErrorCode::InvalidConfig);
}
