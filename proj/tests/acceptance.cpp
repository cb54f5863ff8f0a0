// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "stresskit/dataset.hpp"
#include "stresskit/evaluation.hpp"
#include "stresskit/models.hpp"
#include "stresskit/pipeline.hpp"
#include "stresskit/random.hpp"
#include "stresskit/selection.hpp"
#include "stresskit/signal.hpp"
#include "stresskit/smote.hpp"

using namespace stresskit;

namespace {

struct Outcome {
    bool pass = true;
    std::string failed;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            failed += (pass ? "" : "; ") + what;
            pass = false;
        }
    }
};

int failures = 0;

void criterion(const std::string& name, double budget_seconds, const std::function<void(Outcome&)>& body) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < budget_seconds, "runtime over " + std::to_string(budget_seconds) + " s");
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " (" << std::fixed << std::setprecision(1) << secs << " s) "
              << o.detail.str() << (o.pass ? "" : "\n    failed: " + o.failed) << std::endl;
}

Dataset random_dataset(std::mt19937& gen, std::size_t& k_out) {
    const std::size_t dims = 1 + gen() % 8;
    const std::size_t classes = 2 + gen() % 2;
    const std::size_t k = 1 + gen() % 5;
    std::vector<std::size_t> counts(classes);
    std::size_t total = 0;
    for (auto& c : counts) {
        c = k + 1 + gen() % 12;
        total += c;
    }
    while (total > 50) {
        auto it = std::max_element(counts.begin(), counts.end());
        --*it;
        --total;
    }
    std::normal_distribution<double> n01;
    FeatureSchema s;
    for (std::size_t j = 0; j < dims; ++j) s.feature_names.push_back("f" + std::to_string(j));
    std::vector<double> x;
    std::vector<Label> y;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < counts[c]; ++i) {
            for (std::size_t j = 0; j < dims; ++j) x.push_back(static_cast<double>(c) + n01(gen));
            y.push_back(static_cast<Label>(c));
        }
    }
    // shuffle rows so classes interleave
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), gen);
    k_out = k;
    return Dataset(s, x, y, std::nullopt, classes).subset_rows(order);
}

std::vector<std::size_t> brute_knn(const Dataset& ds, std::size_t row, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        if (i == row || ds.label(i) != ds.label(row)) continue;
        double d = 0.0;
        for (std::size_t j = 0; j < ds.cols(); ++j) d += (ds.at(i, j) - ds.at(row, j)) * (ds.at(i, j) - ds.at(row, j));
        all.emplace_back(d, i);
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < std::min(k, all.size()); ++t) out.push_back(all[t].second);
    return out;
}

// Distance (max norm) from p to the closest segment between a row of `cls` and one of its k neighbors.
double segment_residual(const Dataset& ds, std::span<const double> p, Label cls, std::size_t k) {
    double best = INFINITY;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        if (ds.label(i) != cls) continue;
        for (std::size_t nb : brute_knn(ds, i, k)) {
            const auto a = ds.row(i);
            const auto b = ds.row(nb);
            double num = 0.0, den = 0.0;
            for (std::size_t j = 0; j < p.size(); ++j) {
                num += (p[j] - a[j]) * (b[j] - a[j]);
                den += (b[j] - a[j]) * (b[j] - a[j]);
            }
            const double t = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;
            double r = 0.0;
            for (std::size_t j = 0; j < p.size(); ++j) r = std::max(r, std::abs(a[j] + t * (b[j] - a[j]) - p[j]));
            best = std::min(best, r);
        }
    }
    return best;
}

void smote_correctness(Outcome& o) {
    std::mt19937 gen(20240601);
    double worst = 0.0;
    std::size_t synthetic = 0;
    for (int rep = 0; rep < 100; ++rep) {
        std::size_t k = 0;
        const auto ds = random_dataset(gen, k);
        const auto bal = resampling::balance_all(ds, k, static_cast<std::uint64_t>(rep));
        const auto hist = class_histogram(bal);
        std::size_t first = hist.begin()->second;
        for (const auto& [c, n] : hist) o.require(n == first, "non-uniform counts in dataset " + std::to_string(rep));
        for (std::size_t i = ds.rows(); i < bal.rows(); ++i) {
            worst = std::max(worst, segment_residual(ds, bal.row(i), bal.label(i), k));
            ++synthetic;
        }
        // provenance form: the recorded neighbor is one of the brute-force k nearest
        for (const auto& [c, n] : class_histogram(ds)) {
            resampling::SmoteConfig cfg;
            cfg.k_neighbors = k;
            cfg.seed = static_cast<std::uint64_t>(rep);
            cfg.percent = 150;
            for (const auto& s : resampling::smote_class(ds, c, cfg)) {
                const auto nn = brute_knn(ds, s.base_row, k);
                o.require(std::find(nn.begin(), nn.end(), s.neighbor_row) != nn.end(), "neighbor outside brute-force k-NN");
                double r = 0.0;
                for (std::size_t j = 0; j < ds.cols(); ++j) {
                    const double a = ds.at(s.base_row, j), b = ds.at(s.neighbor_row, j);
                    r = std::max(r, std::abs(a + s.gap * (b - a) - s.values[j]));
                }
                worst = std::max(worst, r);
                ++synthetic;
            }
        }
    }
    o.require(worst < 1e-9, "segment residual " + std::to_string(worst));
    o.detail << "100 datasets, " << synthetic << " synthetic points, max residual " << worst;
}

void oracle_equivalences(Outcome& o) {
    std::mt19937 gen(7);
    // confusion and metrics against a brute-force tally
    double worst = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t k = 2 + gen() % 5;
        std::vector<Label> t(60), p(60);
        for (auto& v : t) v = static_cast<Label>(gen() % k);
        for (auto& v : p) v = static_cast<Label>(gen() % k);
        const auto r = evaluation::metrics(evaluation::confusion(t, p, k));
        double macro_p = 0.0, macro_r = 0.0, macro_f = 0.0, w_f = 0.0, correct = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            double tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < 60; ++i) {
                const bool isc = t[i] == static_cast<Label>(c), predc = p[i] == static_cast<Label>(c);
                tp += isc && predc;
                fp += !isc && predc;
                fn += isc && !predc;
            }
            correct += tp;
            const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
            const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
            const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
            macro_p += prec / k;
            macro_r += rec / k;
            macro_f += f1 / k;
            w_f += f1 * (tp + fn) / 60.0;
        }
        for (double d : {r.accuracy - correct / 60.0, r.macro.precision - macro_p, r.macro.recall - macro_r,
                         r.macro.f1 - macro_f, r.weighted.f1 - w_f}) {
            worst = std::max(worst, std::abs(d));
        }
    }
    o.require(worst < 1e-9, "metrics vs tally " + std::to_string(worst));

    // hand-computed 3x3 case
    const std::vector<Label> t{0, 0, 0, 1, 1, 2}, p{0, 0, 1, 1, 2, 2};
    const auto h = evaluation::metrics(evaluation::confusion(t, p, 3));
    const double f0 = 0.8, f1 = 0.5, f2 = 2.0 / 3.0;
    o.require(std::abs(h.accuracy - 4.0 / 6.0) < 1e-9, "3x3 accuracy");
    o.require(std::abs(h.macro.precision - 2.0 / 3.0) < 1e-9, "3x3 macro precision");
    o.require(std::abs(h.macro.recall - 13.0 / 18.0) < 1e-9, "3x3 macro recall");
    o.require(std::abs(h.macro.f1 - (f0 + f1 + f2) / 3.0) < 1e-9, "3x3 macro f1");

    // grid search against a loop over the same folds
    SynthSpec spec;
    spec.class_counts = {60, 40, 30};
    spec.n_informative = 3;
    spec.n_noise = 3;
    spec.class_separation = 1.0;
    const auto ds = generate_synthetic(spec);
    evaluation::HyperParamGrid grid;
    grid.axes = {{"n_estimators", {10.0, 30.0}}, {"max_depth", {1.0, 2.0}}};
    const auto gs = evaluation::grid_search(models::ModelKind::gb, grid, ds, 5, 3);
    const auto folds = evaluation::kfold_indices(ds.labels(), 5, 3);
    const auto cands = grid.candidates();
    std::size_t best = 0;
    double best_mean = -1.0;
    bool exact = gs.table.size() == 4;
    for (std::size_t c = 0; c < cands.size() && exact; ++c) {
        double sum = 0.0;
        for (std::size_t f = 0; f < 5; ++f) {
            const auto m = models::fit(models::make_config(models::ModelKind::gb, cands[c], 3),
                                       ds.subset_rows(evaluation::fold_complement(folds, f)));
            const auto test = ds.subset_rows(folds[f]);
            const double a = evaluation::accuracy(test.labels(), models::predict(m, test));
            exact = exact && gs.table[c].fold_accuracies[f] == a;
            sum += a;
        }
        exact = exact && gs.table[c].mean == sum / 5.0;
        if (sum / 5.0 > best_mean) {
            best_mean = sum / 5.0;
            best = c;
        }
    }
    o.require(exact && gs.best_index == best && gs.best_cv_accuracy == best_mean, "grid search differs from loop oracle");

    // correlation matrix against the covariance formula
    const auto big = generate_synthetic(SynthSpec{});
    const auto corr = selection::correlation_matrix(big);
    const std::size_t d = big.cols(), n = big.rows();
    double corr_worst = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < d; ++b) {
            long double ma = 0, mb = 0;
            for (std::size_t i = 0; i < n; ++i) {
                ma += big.at(i, a);
                mb += big.at(i, b);
            }
            ma /= n;
            mb /= n;
            long double sab = 0, saa = 0, sbb = 0;
            for (std::size_t i = 0; i < n; ++i) {
                sab += (big.at(i, a) - ma) * (big.at(i, b) - mb);
                saa += (big.at(i, a) - ma) * (big.at(i, a) - ma);
                sbb += (big.at(i, b) - mb) * (big.at(i, b) - mb);
            }
            const double direct = static_cast<double>((sab / (n - 1)) / (std::sqrt(saa / (n - 1)) * std::sqrt(sbb / (n - 1))));
            corr_worst = std::max(corr_worst, std::abs(corr[a * d + b] - direct));
        }
    }
    o.require(corr_worst < 1e-10, "correlation deviation " + std::to_string(corr_worst));

    // ANOVA F by hand: groups {2,3,7}, {8,9,10}, {1,4,4}; means 4, 9, 3, grand 16/3
    FeatureSchema s;
    s.feature_names = {"v"};
    const Dataset anova_ds(s, {2, 3, 7, 8, 9, 10, 1, 4, 4}, {0, 0, 0, 1, 1, 1, 2, 2, 2});
    const double ssb = 3 * (4 - 16.0 / 3) * (4 - 16.0 / 3) + 3 * (9 - 16.0 / 3) * (9 - 16.0 / 3) + 3 * (3 - 16.0 / 3) * (3 - 16.0 / 3);
    const double ssw = 14 + 2 + 6;
    const double f_hand = (ssb / 2) / (ssw / 6);
    const double f = selection::anova_f_scores(anova_ds)[0];
    o.require(std::abs(f - f_hand) < 1e-9, "ANOVA F " + std::to_string(f) + " vs " + std::to_string(f_hand));
    o.detail << "metrics max dev " << worst << ", correlation max dev " << corr_worst << ", grid search exact, ANOVA F "
             << f;
}

void gb_numerics(Outcome& o) {
    std::mt19937 gen(11);
    std::normal_distribution<double> n01;
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 5 + gen() % 20, k = 2 + gen() % 4;
        std::vector<double> f(n * k);
        for (auto& v : f) v = 2.0 * n01(gen);
        std::vector<Label> y(n);
        for (auto& v : y) v = static_cast<Label>(gen() % k);
        const auto g = models::deviance_gradient(f, y, k);
        for (std::size_t q = 0; q < f.size(); ++q) {
            const double h = 1e-5;
            auto up = f, dn = f;
            up[q] += h;
            dn[q] -= h;
            const double fd = (models::multinomial_deviance(up, y, k) - models::multinomial_deviance(dn, y, k)) / (2 * h);
            worst = std::max(worst, std::abs(g[q] - fd) / std::max(std::abs(g[q]), 1e-3 / static_cast<double>(n)));
        }
    }
    o.require(worst < 1e-5, "gradient relative error " + std::to_string(worst));

    bool monotone = true;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SynthSpec spec;
        spec.class_counts = {120, 80, 40};
        spec.n_informative = 4;
        spec.n_noise = 6;
        spec.class_separation = 0.7;
        spec.seed = seed;
        const auto m = models::fit(models::make_config(models::ModelKind::gb,
                                                       {{"n_estimators", 100.0}, {"subsample", 1.0}, {"learning_rate", 0.5}}, seed),
                                   generate_synthetic(spec));
        const auto& dev = std::get<models::GbState>(m.state).train_deviance;
        for (std::size_t i = 1; i < dev.size(); ++i) monotone = monotone && dev[i] <= dev[i - 1];
    }
    o.require(monotone, "training deviance increased");

    std::size_t memorized = 0;
    for (unsigned seed = 0; seed < 5; ++seed) {
        std::mt19937 g2(seed);
        FeatureSchema s;
        s.feature_names = {"a", "b", "c"};
        std::vector<double> x(60);
        for (auto& v : x) v = n01(g2);
        std::vector<Label> y(20);
        for (std::size_t i = 0; i < 20; ++i) y[i] = static_cast<Label>(i < 3 ? i : g2() % 3);
        const Dataset ds(s, x, y, std::nullopt, 3);
        const auto m = models::fit(models::make_config(models::ModelKind::gb, {{"n_estimators", 500.0}}, seed), ds);
        memorized += models::predict(m, ds) == y ? 1 : 0;
    }
    o.require(memorized == 5, std::to_string(memorized) + "/5 random-label sets memorized");
    o.detail << "gradient max rel err " << worst << ", deviance monotone on 5 sets, 500-tree GB memorized " << memorized
             << "/5 random-label sets";
}

void coc_rfe_behavior(Outcome& o) {
    SynthSpec spec;  // 600 x 50, 10 informative, separation 3.0
    const auto ds0 = generate_synthetic(spec);
    selection::SelectionConfig zero;
    zero.n_target = 10;
    zero.correlation_threshold = 0.0;
    zero.estimator = models::make_config(models::ModelKind::gb, {{"n_estimators", 30.0}});
    zero.seed = 5;
    const auto coc = selection::coc_rfe(ds0, zero);
    const auto plain = selection::rfe(ds0, zero.estimator, 10, 1, 5);
    o.require(coc == plain && coc.filter_dropped.empty(), "C=0 result differs from plain RFE");

    std::size_t good = 0;
    std::ostringstream hits;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SynthSpec s;
        s.seed = seed;
        const auto ds = generate_synthetic(s);
        selection::SelectionConfig cfg;
        cfg.n_target = 10;
        cfg.seed = seed;
        cfg.estimator = models::default_ranking_estimator(seed);
        const auto r = selection::coc_rfe(ds, cfg);
        const auto n_inf = std::count_if(r.selected.begin(), r.selected.end(),
                                         [](const std::string& f) { return f.rfind("inf_", 0) == 0; });
        hits << (seed ? "," : "") << n_inf;
        good += n_inf >= 8 ? 1 : 0;
    }
    o.require(good >= 8, std::to_string(good) + "/10 seeds recovered >= 8 informative");
    o.detail << "C=0 equals RFE; informative recovered per seed [" << hits.str() << "], " << good << "/10 seeds >= 8";
}

void ordering_claims(Outcome& o) {
    std::size_t recall_ok = 0, sweep_ok = 0;
    std::ostringstream rows;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        pipeline::PipelineConfig cfg;
        cfg.seed = seed;
        cfg.synth.class_counts = {650, 300, 50};
        cfg.synth.seed = seed;
        cfg.model.grid_set = "desk";
        cfg.model.folds = 5;
        const auto ds = generate_synthetic(cfg.synth);
        const auto table = pipeline::compare_models(cfg, ds, {models::ModelKind::gb});
        const auto m = table.minority_class;
        const double imb = table.cells[0].report.per_class[m].recall;
        const double bal = table.cells[1].report.per_class[m].recall;
        const double tuned = table.cells[2].report.per_class[m].recall;
        const bool r_ok = tuned >= bal - 0.01 && bal >= imb - 0.01;
        recall_ok += r_ok ? 1 : 0;

        // same split and balancing as the pipeline; selection and scoring at n = 40
        const auto split = stratified_split(ds, cfg.train_fraction, derive_seed(seed, "split"));
        const auto train = resampling::balance_all(split.train, cfg.smote.k, derive_seed(seed, "smote"));
        selection::SelectionConfig sc;
        sc.seed = derive_seed(seed, "select");
        sc.estimator = models::default_ranking_estimator(sc.seed);
        const auto est = models::make_config(models::ModelKind::gb, {}, derive_seed(seed, "fit"));
        const auto coc = selection::sweep_holdout(train, split.test, selection::Method::coc_rfe, {40}, est, sc);
        const auto rfe = selection::sweep_holdout(train, split.test, selection::Method::rfe, {40}, est, sc);
        const bool s_ok = coc[0].accuracy >= rfe[0].accuracy - 0.02;
        sweep_ok += s_ok ? 1 : 0;
        rows << "\n    seed " << seed << ": minority recall imbalanced " << imb << " balanced " << bal << " tuned-balanced "
             << tuned << (r_ok ? "" : " (order violated)") << "; n=40 accuracy coc_rfe " << coc[0].accuracy << " ("
             << coc[0].selected.size() << " features) rfe " << rfe[0].accuracy << (s_ok ? "" : " (order violated)");
    }
    o.require(recall_ok >= 8, "recall ordering held in " + std::to_string(recall_ok) + "/10 seeds");
    o.require(sweep_ok >= 8, "coc_rfe >= rfe held in " + std::to_string(sweep_ok) + "/10 seeds");
    o.detail << "recall ordering " << recall_ok << "/10, sweep ordering " << sweep_ok << "/10" << rows.str();
}

void determinism(Outcome& o) {
    const auto root = std::filesystem::temp_directory_path() / "stresskit_acceptance";
    std::filesystem::remove_all(root);
    auto read = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    auto strip_timing = [&](const std::filesystem::path& p) {
        auto j = nlohmann::ordered_json::parse(read(p));
        j.erase("timing");
        return j.dump(2);
    };
    double slowest = 0.0;
    std::vector<std::string> reports, metrics, sweeps;
    std::size_t candidates = 0;
    for (int run = 0; run < 2; ++run) {
        pipeline::PipelineConfig cfg;  // 600 x 50 synthetic, 10-fold CV
        cfg.seed = 42;
        cfg.synth.seed = 42;
        cfg.model.grid_set = "desk";
        cfg.out_dir = root / ("run" + std::to_string(run));
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = pipeline::run_pipeline(cfg);
        slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        candidates = r.grid ? r.grid->table.size() : 0;
        reports.push_back(strip_timing(cfg.out_dir / "report.json"));
        metrics.push_back(read(cfg.out_dir / "metrics.csv"));
        sweeps.push_back(read(cfg.out_dir / "sweep.csv"));
    }
    o.require(reports[0] == reports[1], "report.json differs");
    o.require(metrics[0] == metrics[1], "metrics.csv differs");
    o.require(sweeps[0] == sweeps[1], "sweep.csv differs");
    o.require(candidates == 16, std::to_string(candidates) + " grid candidates instead of 16");
    o.require(slowest < 300.0, "a run took longer than 5 min");
    o.detail << "two runs byte-identical without timing (" << reports[0].size() << " bytes), " << candidates
             << " grid candidates, slowest run " << slowest << " s";
}

void formula_exactness(Outcome& o) {
    o.require(signal::heart_rate_regular(5) == 60.0, "heart_rate_regular(5)");
    o.require(signal::heart_rate_regular(1) == 300.0, "heart_rate_regular(1)");
    o.require(signal::heart_rate_irregular(7) == 70.0, "heart_rate_irregular(7)");
    std::size_t exact = 0, total = 0;
    for (const double rate : {4.0, 32.0, 64.0, 700.0}) {
        for (const std::size_t n : {256u, 1000u, 4096u}) {
            for (const std::size_t bin : {1u, 7u, 50u, 100u}) {
                if (bin >= n / 2) continue;
                const double f = static_cast<double>(bin) * rate / static_cast<double>(n);
                std::vector<double> v(n);
                for (std::size_t i = 0; i < n; ++i) {
                    v[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(bin) * static_cast<double>(i) / static_cast<double>(n));
                }
                ++total;
                exact += signal::periodogram_peak_frequency({v, rate, "x"}) == f ? 1 : 0;
            }
        }
    }
    o.require(exact == total, std::to_string(exact) + "/" + std::to_string(total) + " bin-aligned peaks exact");
    o.detail << "HR(5)=60, HR(1)=300, HR_irregular(7)=70; " << exact << "/" << total << " bin-aligned peaks exact";
}

}  // namespace

int main() {
    criterion("SMOTE correctness", 10.0, smote_correctness);
    criterion("Oracle equivalences", 30.0, oracle_equivalences);
    criterion("GB numerics", 60.0, gb_numerics);
    criterion("CoC-RFE behavior", 180.0, coc_rfe_behavior);
    criterion("Ordering claims (synthetic analogue)", 600.0, ordering_claims);
    criterion("Determinism", 600.0, determinism);
    criterion("Formula exactness", 10.0, formula_exactness);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
