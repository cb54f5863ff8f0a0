#include "stresskit/tree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "stresskit/error.hpp"

namespace stresskit::models {

std::size_t Tree::leaf_for(std::span<const double> x) const {
    std::size_t node = 0;
    while (nodes[node].feature >= 0) {
        const auto& n = nodes[node];
        node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return node;
}

int Tree::max_depth() const {
    int d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
}

SortedColumns::SortedColumns(std::span<const double> row_major, std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), columns_(rows * cols), order_(rows * cols) {
    if (rows > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorCode::InvalidDataset, "too many rows for tree training");
    }
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) columns_[j * rows + i] = row_major[i * cols + j];
    }
    for (std::size_t j = 0; j < cols; ++j) {
        auto* first = order_.data() + j * rows;
        std::iota(first, first + rows, 0u);
        const double* col = columns_.data() + j * rows;
        std::stable_sort(first, first + rows, [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
    }
}

namespace {

struct NodeTotals {
    double weight = 0.0;
    double sum_sq = 0.0;  // sum of w * |t|^2, bounds any achievable gain
    std::size_t count = 0;
};

struct BestSplit {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

double score(const double* sums, std::size_t width, double weight) {
    double s = 0.0;
    for (std::size_t j = 0; j < width; ++j) s += sums[j] * sums[j];
    return s / weight;
}

}  // namespace

GrownTree grow_tree(const SortedColumns& x, std::span<const double> targets, std::size_t target_width,
                    std::span<const double> weights, const TreeParams& params, std::size_t value_width,
                    Rng* feature_rng) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    const std::size_t m = target_width;
    const std::size_t depth_limit = params.max_depth == 0 ? std::numeric_limits<std::size_t>::max() : params.max_depth;
    const std::size_t n_try = params.max_features == 0 ? d : std::min(params.max_features, d);

    GrownTree out;
    out.tree.value_width = value_width;
    out.tree.nodes.push_back(TreeNode{});
    out.leaf_of.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        if (weights[i] > 0.0) out.leaf_of[i] = 0;
    }
    auto& node_of = out.leaf_of;

    std::vector<int> frontier{0};
    std::vector<int> slot_of;
    while (!frontier.empty()) {
        const std::size_t n_slots = frontier.size();
        slot_of.assign(out.tree.nodes.size(), -1);
        for (std::size_t s = 0; s < n_slots; ++s) slot_of[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);

        std::vector<NodeTotals> totals(n_slots);
        std::vector<double> total_sums(n_slots * m, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (node_of[i] < 0) continue;
            const int s = slot_of[static_cast<std::size_t>(node_of[i])];
            if (s < 0) continue;
            const double w = weights[i];
            auto& t = totals[static_cast<std::size_t>(s)];
            t.weight += w;
            ++t.count;
            for (std::size_t j = 0; j < m; ++j) {
                const double v = targets[i * m + j];
                total_sums[static_cast<std::size_t>(s) * m + j] += w * v;
                t.sum_sq += w * v * v;
            }
        }

        std::vector<char> splittable(n_slots, 0);
        bool any = false;
        for (std::size_t s = 0; s < n_slots; ++s) {
            const auto& node = out.tree.nodes[static_cast<std::size_t>(frontier[s])];
            splittable[s] = static_cast<std::size_t>(node.depth) < depth_limit &&
                            totals[s].count >= std::max<std::size_t>(2, params.min_samples_split);
            any = any || splittable[s];
        }
        if (!any) break;

        // Per-node candidate feature subsets, drawn in slot order.
        std::vector<char> allowed;
        if (n_try < d) {
            if (feature_rng == nullptr) throw Error(ErrorCode::InvalidConfig, "feature subsampling needs an rng");
            allowed.assign(n_slots * d, 0);
            std::vector<std::size_t> pool(d);
            for (std::size_t s = 0; s < n_slots; ++s) {
                if (!splittable[s]) continue;
                std::iota(pool.begin(), pool.end(), 0);
                for (std::size_t t = 0; t < n_try; ++t) {
                    const std::size_t pick = t + feature_rng->index(d - t);
                    std::swap(pool[t], pool[pick]);
                    allowed[s * d + pool[t]] = 1;
                }
            }
        }

        std::vector<double> parent_score(n_slots, 0.0);
        for (std::size_t s = 0; s < n_slots; ++s) {
            if (totals[s].weight > 0.0) parent_score[s] = score(&total_sums[s * m], m, totals[s].weight);
        }

        std::vector<BestSplit> best(n_slots);
        std::vector<double> left_sums(n_slots * m);
        std::vector<double> left_weight(n_slots);
        std::vector<double> last_value(n_slots);
        std::vector<char> has_last(n_slots);
        std::vector<double> right(m);
        for (std::size_t f = 0; f < d; ++f) {
            std::fill(left_sums.begin(), left_sums.end(), 0.0);
            std::fill(left_weight.begin(), left_weight.end(), 0.0);
            std::fill(has_last.begin(), has_last.end(), 0);
            for (std::uint32_t i : x.order(f)) {
                const int node = node_of[i];
                if (node < 0) continue;
                const int slot = slot_of[static_cast<std::size_t>(node)];
                if (slot < 0) continue;
                const auto s = static_cast<std::size_t>(slot);
                if (!splittable[s] || (!allowed.empty() && !allowed[s * d + f])) continue;
                const double v = x.value(i, f);
                if (has_last[s] && v > last_value[s]) {
                    const double wl = left_weight[s];
                    const double wr = totals[s].weight - wl;
                    if (wl > 0.0 && wr > 0.0) {
                        for (std::size_t j = 0; j < m; ++j) right[j] = total_sums[s * m + j] - left_sums[s * m + j];
                        const double gain = score(&left_sums[s * m], m, wl) + score(right.data(), m, wr) - parent_score[s];
                        if (gain > best[s].gain) {
                            double thr = last_value[s] + (v - last_value[s]) / 2.0;
                            if (!(thr < v)) thr = last_value[s];
                            best[s] = {gain, static_cast<int>(f), thr};
                        }
                    }
                }
                const double w = weights[i];
                left_weight[s] += w;
                for (std::size_t j = 0; j < m; ++j) left_sums[s * m + j] += w * targets[i * m + j];
                last_value[s] = v;
                has_last[s] = 1;
            }
        }

        std::vector<int> next;
        for (std::size_t s = 0; s < n_slots; ++s) {
            if (!splittable[s] || best[s].feature < 0) continue;
            // Gains at rounding-noise level are not real structure.
            if (!(best[s].gain > 1e-12 * totals[s].sum_sq)) continue;
            const auto id = static_cast<std::size_t>(frontier[s]);
            const int depth = out.tree.nodes[id].depth + 1;
            const int left = static_cast<int>(out.tree.nodes.size());
            out.tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, depth, 0.0});
            out.tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, depth, 0.0});
            auto& node = out.tree.nodes[id];
            node.feature = best[s].feature;
            node.threshold = best[s].threshold;
            node.left = left;
            node.right = left + 1;
            node.gain = best[s].gain;
            next.push_back(left);
            next.push_back(left + 1);
        }
        if (next.empty()) break;
        for (std::size_t i = 0; i < n; ++i) {
            if (node_of[i] < 0) continue;
            const auto& node = out.tree.nodes[static_cast<std::size_t>(node_of[i])];
            if (node.feature < 0) continue;
            node_of[i] = x.value(i, static_cast<std::size_t>(node.feature)) <= node.threshold ? node.left : node.right;
        }
        frontier = std::move(next);
    }
    out.tree.values.assign(out.tree.nodes.size() * value_width, 0.0);
    return out;
}

}  // namespace stresskit::models
