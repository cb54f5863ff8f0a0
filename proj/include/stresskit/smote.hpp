#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stresskit/dataset.hpp"

namespace stresskit::resampling {

struct SmoteConfig {
    double percent = 100.0;  // P: synthetic rows per minority row, in percent
    std::size_t k_neighbors = 5;
    std::uint64_t seed = 0;
    /// Neighbor search on z-scored features instead of raw values. Off by default.
    bool standardize_distances = false;
};

/// One synthetic sample and the originals it was interpolated between.
struct SyntheticRow {
    std::vector<double> values;
    std::size_t base_row = 0;      // dataset row index of x_i
    std::size_t neighbor_row = 0;  // dataset row index of x'
    double gap = 0.0;              // delta in [0, 1]
};

/// Indices (into ds) of the k nearest same-class rows of `row`, self excluded.
/// Ties in distance resolve to the lower row index.
std::vector<std::size_t> class_neighbors(const Dataset& ds, std::size_t row, std::size_t k,
                                         bool standardize = false);

/// floor(P/100 * T_m) synthetic rows for `target_class`. Every minority row receives
/// floor(P/100) samples; the fractional remainder is spread over distinct minority
/// rows drawn uniformly.
std::vector<SyntheticRow> smote_class(const Dataset& ds, Label target_class, const SmoteConfig& cfg);

/// Exactly `n_synthetic` rows for `target_class` (the integer form used by balance_all).
std::vector<SyntheticRow> smote_count(const Dataset& ds, Label target_class, std::size_t n_synthetic,
                                      const SmoteConfig& cfg);

/// Oversamples every class up to the majority count. Original rows come first,
/// unchanged, followed by synthetic rows grouped by class id.
Dataset balance_all(const Dataset& ds, std::size_t k, std::uint64_t seed, bool standardize = false);

/// Original rows followed by the rows produced by smote_class.
Dataset append_smote(const Dataset& ds, Label target_class, const SmoteConfig& cfg);

}  // namespace stresskit::resampling
