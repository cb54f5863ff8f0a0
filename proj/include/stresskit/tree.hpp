#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stresskit/dataset.hpp"
#include "stresskit/random.hpp"

namespace stresskit::models {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int depth = 0;
    double gain = 0.0;  // impurity decrease of this split (criterion units, weighted)

    bool operator==(const TreeNode&) const = default;
};

/// Binary tree with samples routed left when x[feature] <= threshold. Each node owns
/// `value_width` payload entries in `values`; only leaf payloads are read.
struct Tree {
    std::size_t value_width = 1;
    std::vector<TreeNode> nodes;
    std::vector<double> values;

    [[nodiscard]] std::size_t leaf_for(std::span<const double> x) const;
    [[nodiscard]] std::span<const double> value_of(std::size_t node) const {
        return {values.data() + node * value_width, value_width};
    }
    [[nodiscard]] std::span<double> value_of(std::size_t node) {
        return {values.data() + node * value_width, value_width};
    }
    [[nodiscard]] std::span<const double> predict(std::span<const double> x) const {
        return value_of(leaf_for(x));
    }
    [[nodiscard]] int max_depth() const;

    bool operator==(const Tree&) const = default;
};

/// Column-major copy of a feature matrix plus the ascending sample order of every column.
/// Sorting happens once and is shared by every tree of an ensemble.
class SortedColumns {
public:
    SortedColumns(std::span<const double> row_major, std::size_t rows, std::size_t cols);
    explicit SortedColumns(const Dataset& ds) : SortedColumns(ds.values(), ds.rows(), ds.cols()) {}

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] double value(std::size_t row, std::size_t col) const { return columns_[col * rows_ + row]; }
    [[nodiscard]] std::span<const std::uint32_t> order(std::size_t col) const {
        return {order_.data() + col * rows_, rows_};
    }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> columns_;
    std::vector<std::uint32_t> order_;
};

struct TreeParams {
    std::size_t max_depth = 3;  // 0 = unlimited
    std::size_t max_features = 0;  // per-node candidate features; 0 = all
    std::size_t min_samples_split = 2;
};

struct GrownTree {
    Tree tree;
    std::vector<int> leaf_of;  // leaf node per sample, -1 for zero-weight samples
};

/// Grows a tree that maximizes the decrease of sum_j S_j^2 / W over candidate splits,
/// where S_j is the weighted sum of target component j and W the weight in a node.
/// With a scalar target this is variance reduction; with one-hot class targets it is
/// the Gini decrease. Ties resolve to the lowest feature index, then lowest threshold.
/// Leaf payloads are zero-filled with width `value_width`; callers assign them.
GrownTree grow_tree(const SortedColumns& x, std::span<const double> targets, std::size_t target_width,
                    std::span<const double> weights, const TreeParams& params, std::size_t value_width,
                    Rng* feature_rng = nullptr);

}  // namespace stresskit::models
