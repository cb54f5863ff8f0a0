#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "stresskit/smote.hpp"
#include "support.hpp"

using namespace stresskit;
using namespace stresskit::resampling;
using testing_support::blobs;
using testing_support::code_of;

namespace {

// Sort every other same-class row by (squared distance, index), keep k.
std::vector<std::size_t> brute_neighbors(const Dataset& ds, std::size_t row, std::size_t k) {
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

}  // namespace

TEST_CASE("class_neighbors matches brute force") {
    const auto ds = blobs({30, 12}, 4, 1.0, 3);
    for (std::size_t r = 0; r < ds.rows(); ++r) CHECK(class_neighbors(ds, r, 5) == brute_neighbors(ds, r, 5));
}

TEST_CASE("neighbor ties go to the lower row index") {
    FeatureSchema s;
    s.feature_names = {"a"};
    // rows 1 and 2 are both at distance 1 from row 0
    Dataset ds(s, {0.0, 1.0, -1.0, 5.0, 9.0}, {0, 0, 0, 0, 1});
    CHECK(class_neighbors(ds, 0, 1) == std::vector<std::size_t>{1});
}

TEST_CASE("every synthetic row lies on a segment to one of its k neighbors") {
    for (unsigned seed = 0; seed < 10; ++seed) {
        const auto ds = blobs({40, 15 + seed}, 3, 2.0, seed);
        SmoteConfig cfg;
        cfg.percent = 300;
        cfg.k_neighbors = 5;
        cfg.seed = seed;
        const auto rows = smote_class(ds, 1, cfg);
        REQUIRE(rows.size() == 3 * ds.rows() - 3 * 40);
        for (const auto& r : rows) {
            CHECK(ds.label(r.base_row) == 1);
            const auto nn = brute_neighbors(ds, r.base_row, 5);
            CHECK(std::find(nn.begin(), nn.end(), r.neighbor_row) != nn.end());
            CHECK(r.gap >= 0.0);
            CHECK(r.gap <= 1.0);
            for (std::size_t j = 0; j < ds.cols(); ++j) {
                const double a = ds.at(r.base_row, j);
                const double b = ds.at(r.neighbor_row, j);
                CHECK(r.values[j] == a + r.gap * (b - a));
                CHECK(r.values[j] >= std::min(a, b) - 1e-12);
                CHECK(r.values[j] <= std::max(a, b) + 1e-12);
            }
        }
    }
}

TEST_CASE("synthetic count is floor(P/100 * T)") {
    const auto ds = blobs({100, 5}, 2, 1.0, 1);
    SmoteConfig cfg;
    cfg.k_neighbors = 3;
    cfg.percent = 200;
    CHECK(smote_class(ds, 1, cfg).size() == 10);
    cfg.percent = 150;
    CHECK(smote_class(ds, 1, cfg).size() == 7);
    cfg.percent = 0;
    CHECK(smote_class(ds, 1, cfg).empty());
    cfg.percent = 50;
    const auto half = smote_class(ds, 1, cfg);
    REQUIRE(half.size() == 2);
    CHECK(half[0].base_row != half[1].base_row);
}

TEST_CASE("each minority row gets floor(P/100) samples") {
    const auto ds = blobs({20, 8}, 2, 1.0, 2);
    SmoteConfig cfg;
    cfg.k_neighbors = 3;
    cfg.percent = 250;
    const auto rows = smote_class(ds, 1, cfg);
    CHECK(rows.size() == 20);
    std::map<std::size_t, std::size_t> per;
    for (const auto& r : rows) ++per[r.base_row];
    CHECK(per.size() == 8);
    for (const auto& [row, n] : per) {
        CHECK(n >= 2);
        CHECK(n <= 3);
    }
}

TEST_CASE("balance_all equalizes the histogram and keeps originals first") {
    const auto ds = blobs({50, 20, 7}, 3, 1.5, 4);
    const auto bal = balance_all(ds, 5, 9);
    for (const auto& [c, n] : class_histogram(bal)) CHECK(n == 50);
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        CHECK(bal.label(i) == ds.label(i));
        for (std::size_t j = 0; j < ds.cols(); ++j) CHECK(bal.at(i, j) == ds.at(i, j));
    }
    for (std::size_t i = ds.rows() + 1; i < bal.rows(); ++i) CHECK(bal.label(i - 1) <= bal.label(i));
}

TEST_CASE("synthetic rows stay inside the class bounding box") {
    const auto ds = blobs({60, 25}, 5, 1.0, 5);
    const auto bal = balance_all(ds, 5, 1);
    std::vector<double> lo(5, INFINITY), hi(5, -INFINITY);
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        if (ds.label(i) != 1) continue;
        for (std::size_t j = 0; j < 5; ++j) {
            lo[j] = std::min(lo[j], ds.at(i, j));
            hi[j] = std::max(hi[j], ds.at(i, j));
        }
    }
    for (std::size_t i = ds.rows(); i < bal.rows(); ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(bal.at(i, j) >= lo[j]);
            CHECK(bal.at(i, j) <= hi[j]);
        }
    }
}

TEST_CASE("balance_all is deterministic for a seed") {
    const auto ds = blobs({40, 10}, 3, 1.0, 6);
    CHECK(balance_all(ds, 5, 11) == balance_all(ds, 5, 11));
    CHECK(!(balance_all(ds, 5, 11) == balance_all(ds, 5, 12)));
    CHECK(balance_all(blobs({10, 10}, 2, 1.0, 1), 3, 0) == blobs({10, 10}, 2, 1.0, 1));
}

TEST_CASE("standardized neighbor search ignores feature scale") {
    auto ds = blobs({30, 12}, 3, 1.0, 8);
    std::vector<double> v = ds.values();
    for (std::size_t i = 0; i < ds.rows(); ++i) v[i * 3] *= 1000.0;
    const Dataset scaled(ds.schema(), v, ds.labels(), std::nullopt, 2);
    const auto raw = balance_all(ds, 5, 3, true);
    const auto big = balance_all(scaled, 5, 3, true);
    CHECK(raw.rows() == big.rows());
    for (std::size_t r = 0; r < ds.rows(); ++r) CHECK(class_neighbors(ds, r, 4, true).size() == 4);
    // z-scoring removes the factor, so the neighbor sets agree
    std::size_t same = 0;
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        same += class_neighbors(ds, r, 4, true) == class_neighbors(scaled, r, 4, true) ? 1 : 0;
    }
    CHECK(same == ds.rows());
}

TEST_CASE("smote errors") {
    const auto ds = blobs({20, 4}, 2, 1.0, 1);
    SmoteConfig cfg;
    cfg.k_neighbors = 5;
    CHECK(code_of([&] { (void)smote_class(ds, 1, cfg); }) == ErrorCode::ClassTooSmallForK);
    CHECK(code_of([&] { (void)balance_all(ds, 5, 0); }) == ErrorCode::ClassTooSmallForK);
    CHECK(code_of([&] { (void)smote_class(ds, 7, cfg); }) == ErrorCode::UnknownClass);
    cfg.k_neighbors = 3;
    cfg.percent = -1;
    CHECK(code_of([&] { (void)smote_class(ds, 1, cfg); }) == ErrorCode::InvalidConfig);
    cfg.percent = 100;
    cfg.k_neighbors = 0;
    CHECK(code_of([&] { (void)smote_class(ds, 1, cfg); }) == ErrorCode::InvalidConfig);
}
