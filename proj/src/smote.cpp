#include "stresskit/smote.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stresskit/error.hpp"
#include "stresskit/random.hpp"

namespace stresskit::resampling {

namespace {

std::vector<double> feature_scales(const Dataset& ds, bool standardize) {
    std::vector<double> scale(ds.cols(), 1.0);
    if (!standardize) return scale;
    for (std::size_t j = 0; j < ds.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < ds.rows(); ++i) mean += ds.at(i, j);
        mean /= static_cast<double>(ds.rows());
        double var = 0.0;
        for (std::size_t i = 0; i < ds.rows(); ++i) var += (ds.at(i, j) - mean) * (ds.at(i, j) - mean);
        var /= static_cast<double>(ds.rows());
        scale[j] = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
    }
    return scale;
}

double scaled_sq_distance(std::span<const double> a, std::span<const double> b,
                          const std::vector<double>& scale) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = (a[j] - b[j]) * scale[j];
        d += diff * diff;
    }
    return d;
}

std::vector<std::size_t> members_of(const Dataset& ds, Label c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        if (ds.label(i) == c) members.push_back(i);
    }
    return members;
}

std::vector<std::size_t> nearest(const Dataset& ds, std::size_t row, const std::vector<std::size_t>& members,
                                 std::size_t k, const std::vector<double>& scale) {
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(members.size());
    for (std::size_t m : members) {
        if (m == row) continue;
        cand.emplace_back(scaled_sq_distance(ds.row(row), ds.row(m), scale), m);
    }
    const std::size_t take = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
    std::vector<std::size_t> out(take);
    for (std::size_t t = 0; t < take; ++t) out[t] = cand[t].second;
    return out;
}

void check_class(const Dataset& ds, Label c, std::size_t n_members, std::size_t k) {
    if (c < 0 || static_cast<std::size_t>(c) >= ds.n_classes()) {
        throw Error(ErrorCode::UnknownClass, "class " + std::to_string(c));
    }
    if (k < 1) throw Error(ErrorCode::InvalidConfig, "k_neighbors must be >= 1");
    if (n_members < k + 1) {
        throw Error(ErrorCode::ClassTooSmallForK, "class " + std::to_string(c) + " has " +
                                                      std::to_string(n_members) + " rows, needs at least k+1 = " +
                                                      std::to_string(k + 1));
    }
}

SyntheticRow interpolate(const Dataset& ds, std::size_t base, const std::vector<std::size_t>& neighbors, Rng& rng) {
    SyntheticRow s;
    s.base_row = base;
    s.neighbor_row = neighbors[rng.index(neighbors.size())];
    s.gap = rng.uniform_closed();
    const auto xi = ds.row(base);
    const auto xn = ds.row(s.neighbor_row);
    s.values.resize(xi.size());
    for (std::size_t j = 0; j < xi.size(); ++j) s.values[j] = xi[j] + s.gap * (xn[j] - xi[j]);
    return s;
}

}  // namespace

std::vector<std::size_t> class_neighbors(const Dataset& ds, std::size_t row, std::size_t k, bool standardize) {
    return nearest(ds, row, members_of(ds, ds.label(row)), k, feature_scales(ds, standardize));
}

std::vector<SyntheticRow> smote_count(const Dataset& ds, Label target_class, std::size_t n_synthetic,
                                      const SmoteConfig& cfg) {
    const auto members = members_of(ds, target_class);
    check_class(ds, target_class, members.size(), cfg.k_neighbors);
    if (n_synthetic == 0) return {};

    const auto scale = feature_scales(ds, cfg.standardize_distances);
    std::vector<std::vector<std::size_t>> neighbors(members.size());
    for (std::size_t m = 0; m < members.size(); ++m) {
        neighbors[m] = nearest(ds, members[m], members, cfg.k_neighbors, scale);
    }

    Rng rng(cfg.seed);
    const std::size_t per_row = n_synthetic / members.size();
    const std::size_t remainder = n_synthetic % members.size();
    std::vector<SyntheticRow> out;
    out.reserve(n_synthetic);
    for (std::size_t m = 0; m < members.size(); ++m) {
        for (std::size_t rep = 0; rep < per_row; ++rep) {
            out.push_back(interpolate(ds, members[m], neighbors[m], rng));
        }
    }
    if (remainder > 0) {
        std::vector<std::size_t> pick(members.size());
        std::iota(pick.begin(), pick.end(), 0);
        rng.shuffle(pick);
        pick.resize(remainder);
        std::sort(pick.begin(), pick.end());
        for (std::size_t m : pick) out.push_back(interpolate(ds, members[m], neighbors[m], rng));
    }
    return out;
}

std::vector<SyntheticRow> smote_class(const Dataset& ds, Label target_class, const SmoteConfig& cfg) {
    if (!(cfg.percent >= 0.0) || !std::isfinite(cfg.percent)) {
        throw Error(ErrorCode::InvalidConfig, "SMOTE percent must be a finite non-negative number");
    }
    std::size_t t_m = 0;
    for (Label y : ds.labels()) t_m += (y == target_class);
    // Integer arithmetic when P is whole avoids 0.07 * 100 style rounding surprises.
    std::size_t n_synthetic;
    if (cfg.percent == std::floor(cfg.percent) && cfg.percent < 1e15) {
        n_synthetic = static_cast<std::size_t>(cfg.percent) * t_m / 100;
    } else {
        n_synthetic = static_cast<std::size_t>(std::floor(cfg.percent / 100.0 * static_cast<double>(t_m)));
    }
    return smote_count(ds, target_class, n_synthetic, cfg);
}

Dataset append_smote(const Dataset& ds, Label target_class, const SmoteConfig& cfg) {
    const auto rows = smote_class(ds, target_class, cfg);
    std::vector<double> values;
    for (const auto& r : rows) values.insert(values.end(), r.values.begin(), r.values.end());
    std::vector<Label> labels(rows.size(), target_class);
    return ds.append_rows(values, labels);
}

Dataset balance_all(const Dataset& ds, std::size_t k, std::uint64_t seed, bool standardize) {
    const auto hist = class_histogram(ds);
    std::size_t majority = 0;
    for (const auto& [c, n] : hist) majority = std::max(majority, n);

    for (const auto& [c, n] : hist) {
        if (n < majority) check_class(ds, c, n, k);
    }
    std::vector<double> values;
    std::vector<Label> labels;
    for (const auto& [c, n] : hist) {
        if (n == majority) continue;
        SmoteConfig cfg;
        cfg.k_neighbors = k;
        cfg.seed = derive_seed(seed, static_cast<std::uint64_t>(c));
        cfg.standardize_distances = standardize;
        for (const auto& r : smote_count(ds, c, majority - n, cfg)) {
            values.insert(values.end(), r.values.begin(), r.values.end());
            labels.push_back(c);
        }
    }
    if (labels.empty()) return ds;
    return ds.append_rows(values, labels);
}

}  // namespace stresskit::resampling
