#include "stresskit/models.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "stresskit/error.hpp"
#include "stresskit/parallel.hpp"
#include "stresskit/random.hpp"

namespace stresskit::models {

using nlohmann::ordered_json;

namespace {

constexpr double kImpossible = std::numeric_limits<double>::lowest();

// ---------------------------------------------------------------------------------------
// parameter domains

struct Domain {
    enum class Type { Integer, Real, Choice } type;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    bool lo_open = false;
    std::vector<std::string> choices;
    ParamValue fallback;
};

Domain integer(double lo, double dflt) { return {Domain::Type::Integer, lo, std::numeric_limits<double>::infinity(), false, {}, dflt}; }
Domain real(double lo, double hi, bool lo_open, double dflt) { return {Domain::Type::Real, lo, hi, lo_open, {}, dflt}; }
Domain choice(std::vector<std::string> options, std::string dflt) {
    return {Domain::Type::Choice, 0, 0, false, std::move(options), std::move(dflt)};
}

const std::map<std::string, Domain>& domains(ModelKind kind) {
    static const std::map<std::string, Domain> gb{
        {"n_estimators", integer(0, 100)},
        {"learning_rate", real(0.0, std::numeric_limits<double>::infinity(), false, 0.1)},
        {"subsample", real(0.0, 1.0, true, 1.0)},
        {"max_depth", integer(1, 3)},
    };
    static const std::map<std::string, Domain> rf{
        {"estimators", integer(1, 100)},
        {"max_features", choice({"log2", "sqrt"}, "sqrt")},
        {"max_depth", integer(0, 0)},
    };
    static const std::map<std::string, Domain> knn{
        {"n_neighbors", integer(1, 5)},
        {"weights", choice({"uniform", "distance"}, "uniform")},
        {"metric", choice({"euclidean", "manhattan", "minkowski"}, "euclidean")},
        {"p", real(1.0, std::numeric_limits<double>::infinity(), false, 3.0)},
    };
    static const std::map<std::string, Domain> lr{
        {"c_value", real(0.0, std::numeric_limits<double>::infinity(), true, 1.0)},
        {"penalty", choice({"l2"}, "l2")},
        {"solver", choice({"newton-cg", "lbfgs", "liblinear"}, "lbfgs")},
        {"max_iter", integer(1, 5000)},
        {"tol", real(0.0, std::numeric_limits<double>::infinity(), true, 1e-6)},
    };
    static const std::map<std::string, Domain> lda{
        {"solver", choice({"svd", "lsqr", "eigen"}, "svd")},
    };
    static const std::map<std::string, Domain> svc{
        {"kernel", choice({"poly", "rbf", "sigmoid", "linear"}, "rbf")},
        {"C", real(0.0, std::numeric_limits<double>::infinity(), true, 1.0)},
        {"gamma", choice({"scale", "auto"}, "scale")},
    };
    switch (kind) {
        case ModelKind::gb: return gb;
        case ModelKind::rf: return rf;
        case ModelKind::knn: return knn;
        case ModelKind::lr: return lr;
        case ModelKind::lda: return lda;
        case ModelKind::svc: return svc;
    }
    return gb;
}

std::string canonical_name(ModelKind kind, const std::string& name) {
    if (kind == ModelKind::rf && name == "n_estimators") return "estimators";
    if (kind == ModelKind::lr && (name == "c" || name == "C" || name == "c_values")) return "c_value";
    if (kind == ModelKind::lr && name == "solvers") return "solver";
    return name;
}

// ---------------------------------------------------------------------------------------
// numerics helpers

void softmax_inplace(double* row, std::size_t k) {
    double mx = kImpossible;
    for (std::size_t c = 0; c < k; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        row[c] = row[c] == kImpossible ? 0.0 : std::exp(row[c] - mx);
        sum += row[c];
    }
    for (std::size_t c = 0; c < k; ++c) row[c] /= sum;
}

double log_sum_exp(const double* row, std::size_t k) {
    double mx = kImpossible;
    for (std::size_t c = 0; c < k; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        if (row[c] != kImpossible) sum += std::exp(row[c] - mx);
    }
    return mx + std::log(sum);
}

void check_width(const TrainedModel& model, std::size_t values, std::size_t rows) {
    if (rows == 0 ? values != 0 : values != rows * model.width()) {
        throw Error(ErrorCode::WidthMismatch, "expected " + std::to_string(model.width()) + " features per row");
    }
}

// ---------------------------------------------------------------------------------------
// gradient boosting

GbState fit_gb(const ModelConfig& cfg, const Dataset& train, std::span<const Label> y, std::size_t k) {
    const std::size_t n = train.rows();
    GbState st;
    st.learning_rate = cfg.number("learning_rate");
    st.iterations = cfg.integer("n_estimators");
    const double subsample = cfg.number("subsample");
    TreeParams tp;
    tp.max_depth = cfg.integer("max_depth");

    std::vector<double> counts(k, 0.0);
    for (Label c : y) counts[static_cast<std::size_t>(c)] += 1.0;
    st.init_scores.resize(k);
    for (std::size_t c = 0; c < k; ++c) st.init_scores[c] = std::log(counts[c] / static_cast<double>(n));

    std::vector<double> scores(n * k);
    for (std::size_t i = 0; i < n; ++i) std::copy(st.init_scores.begin(), st.init_scores.end(), scores.begin() + static_cast<std::ptrdiff_t>(i * k));
    st.train_deviance.push_back(multinomial_deviance(scores, y, k));
    if (st.iterations == 0) return st;

    const SortedColumns sorted(train);
    Rng rng(derive_seed(cfg.seed, "gb-subsample"));
    const auto n_bag = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(subsample * static_cast<double>(n))));
    std::vector<double> weights(n, 1.0);
    std::vector<std::size_t> perm(n);
    std::vector<double> residual(n);
    const double newton_scale = static_cast<double>(k - 1) / static_cast<double>(k);
    st.trees.reserve(st.iterations * k);

    for (std::size_t it = 0; it < st.iterations; ++it) {
        if (n_bag < n) {
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(perm);
            std::fill(weights.begin(), weights.end(), 0.0);
            for (std::size_t b = 0; b < n_bag; ++b) weights[perm[b]] = 1.0;
        }
        const auto prob = softmax_rows(scores, k);
        std::vector<Tree> round(k);
        parallel_for(k, [&](std::size_t c) {
            std::vector<double> r(n);
            for (std::size_t i = 0; i < n; ++i) {
                r[i] = (static_cast<std::size_t>(y[i]) == c ? 1.0 : 0.0) - prob[i * k + c];
            }
            auto grown = grow_tree(sorted, r, 1, weights, tp, 1);
            // One Newton step per leaf on the multinomial deviance.
            std::vector<double> num(grown.tree.nodes.size(), 0.0);
            std::vector<double> den(grown.tree.nodes.size(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (grown.leaf_of[i] < 0) continue;
                const auto leaf = static_cast<std::size_t>(grown.leaf_of[i]);
                num[leaf] += r[i];
                den[leaf] += std::abs(r[i]) * (1.0 - std::abs(r[i]));
            }
            for (std::size_t node = 0; node < grown.tree.nodes.size(); ++node) {
                if (grown.tree.nodes[node].feature >= 0) continue;
                grown.tree.values[node] = den[node] < 1e-150 ? 0.0 : newton_scale * num[node] / den[node];
            }
            round[c] = std::move(grown.tree);
        });
        for (std::size_t c = 0; c < k; ++c) {
            const Tree& tree = round[c];
            for (std::size_t i = 0; i < n; ++i) {
                scores[i * k + c] += st.learning_rate * tree.predict(train.row(i))[0];
            }
            st.trees.push_back(std::move(round[c]));
        }
        st.train_deviance.push_back(multinomial_deviance(scores, y, k));
    }
    return st;
}

void proba_gb(const GbState& st, std::span<const double> x, std::size_t rows, std::size_t width, std::size_t k, double* out) {
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = out + i * k;
        std::copy(st.init_scores.begin(), st.init_scores.end(), row);
        const std::span<const double> xi = x.subspan(i * width, width);
        for (std::size_t t = 0; t < st.trees.size(); ++t) {
            row[t % k] += st.learning_rate * st.trees[t].predict(xi)[0];
        }
        softmax_inplace(row, k);
    }
}

// ---------------------------------------------------------------------------------------
// random forest

RfState fit_rf(const ModelConfig& cfg, const Dataset& train, std::span<const Label> y, std::size_t k) {
    const std::size_t n = train.rows();
    const std::size_t d = train.cols();
    const std::size_t n_trees = cfg.integer("estimators");
    TreeParams tp;
    tp.max_depth = cfg.integer("max_depth");
    const double dd = static_cast<double>(d);
    tp.max_features = std::max<std::size_t>(
        1, static_cast<std::size_t>(cfg.text("max_features") == "log2" ? std::floor(std::log2(dd)) : std::floor(std::sqrt(dd))));

    const SortedColumns sorted(train);
    std::vector<double> onehot(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) onehot[i * k + static_cast<std::size_t>(y[i])] = 1.0;

    RfState st;
    st.trees.resize(n_trees);
    parallel_for(n_trees, [&](std::size_t t) {
        Rng rng(derive_seed(cfg.seed, t));
        std::vector<double> weights(n, 0.0);
        for (std::size_t b = 0; b < n; ++b) weights[rng.index(n)] += 1.0;
        auto grown = grow_tree(sorted, onehot, k, weights, tp, k, &rng);
        for (std::size_t i = 0; i < n; ++i) {
            if (grown.leaf_of[i] < 0) continue;
            grown.tree.value_of(static_cast<std::size_t>(grown.leaf_of[i]))[static_cast<std::size_t>(y[i])] += weights[i];
        }
        for (std::size_t node = 0; node < grown.tree.nodes.size(); ++node) {
            auto v = grown.tree.value_of(node);
            const double total = std::accumulate(v.begin(), v.end(), 0.0);
            if (total > 0.0) {
                for (double& p : v) p /= total;
            }
        }
        st.trees[t] = std::move(grown.tree);
    });
    return st;
}

void proba_rf(const RfState& st, std::span<const double> x, std::size_t rows, std::size_t width, std::size_t k, double* out) {
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = out + i * k;
        std::fill(row, row + k, 0.0);
        const std::span<const double> xi = x.subspan(i * width, width);
        for (const auto& tree : st.trees) {
            const auto dist = tree.predict(xi);
            const auto vote = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
            row[vote] += 1.0;
        }
        for (std::size_t c = 0; c < k; ++c) row[c] /= static_cast<double>(st.trees.size());
    }
}

// ---------------------------------------------------------------------------------------
// k nearest neighbours

KnnState fit_knn(const ModelConfig& cfg, const Dataset& train, std::span<const Label> y) {
    KnnState st;
    st.x = train.values();
    st.y.assign(y.begin(), y.end());
    st.k = cfg.integer("n_neighbors");
    st.distance_weighted = cfg.text("weights") == "distance";
    const auto& metric = cfg.text("metric");
    st.p = metric == "manhattan" ? 1.0 : metric == "euclidean" ? 2.0 : cfg.number("p");
    return st;
}

double minkowski(std::span<const double> a, std::span<const double> b, double p) {
    double acc = 0.0;
    if (p == 1.0) {
        for (std::size_t j = 0; j < a.size(); ++j) acc += std::abs(a[j] - b[j]);
        return acc;
    }
    if (p == 2.0) {
        for (std::size_t j = 0; j < a.size(); ++j) acc += (a[j] - b[j]) * (a[j] - b[j]);
        return std::sqrt(acc);
    }
    for (std::size_t j = 0; j < a.size(); ++j) acc += std::pow(std::abs(a[j] - b[j]), p);
    return std::pow(acc, 1.0 / p);
}

void proba_knn(const KnnState& st, std::span<const double> x, std::size_t rows, std::size_t width, std::size_t k, double* out) {
    const std::size_t n = st.y.size();
    const std::size_t take = std::min(st.k, n);
    std::vector<std::pair<double, Label>> cand(n);
    for (std::size_t i = 0; i < rows; ++i) {
        const std::span<const double> xi = x.subspan(i * width, width);
        for (std::size_t t = 0; t < n; ++t) {
            cand[t] = {minkowski(xi, std::span<const double>(st.x).subspan(t * width, width), st.p), st.y[t]};
        }
        // (distance, label) ordering makes the neighbour multiset independent of row order.
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
        double* row = out + i * k;
        std::fill(row, row + k, 0.0);
        if (st.distance_weighted && cand[0].first == 0.0) {
            for (std::size_t t = 0; t < take && cand[t].first == 0.0; ++t) row[static_cast<std::size_t>(cand[t].second)] += 1.0;
        } else {
            for (std::size_t t = 0; t < take; ++t) {
                row[static_cast<std::size_t>(cand[t].second)] += st.distance_weighted ? 1.0 / cand[t].first : 1.0;
            }
        }
        const double total = std::accumulate(row, row + k, 0.0);
        for (std::size_t c = 0; c < k; ++c) row[c] /= total;
    }
}

// ---------------------------------------------------------------------------------------
// multinomial logistic regression

std::string solver_implementation(ModelKind kind) {
    return kind == ModelKind::lr ? "full-batch gradient descent (Barzilai-Borwein step, Armijo backtracking)"
                                 : "pooled-covariance discriminant via SVD pseudo-inverse";
}

LrState fit_lr(const ModelConfig& cfg, const Dataset& train, std::span<const Label> y, std::size_t k) {
    const std::size_t d = train.cols();
    LogisticObjective obj{train.values(), y, train.rows(), d, k, cfg.number("c_value")};
    const std::size_t max_iter = cfg.integer("max_iter");
    const double tol = cfg.number("tol");

    std::vector<double> theta(k * d + k, 0.0);
    std::vector<double> grad;
    double f = obj.value_and_gradient(theta, grad);
    auto norm = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double e : v) s += e * e;
        return std::sqrt(s);
    };
    double gnorm = norm(grad);
    double step = 1.0;
    std::vector<double> trial(theta.size());
    std::vector<double> trial_grad;
    std::size_t it = 0;
    for (; it < max_iter && gnorm > tol; ++it) {
        double f_trial = 0.0;
        bool accepted = false;
        for (int halving = 0; halving < 80; ++halving) {
            for (std::size_t q = 0; q < theta.size(); ++q) trial[q] = theta[q] - step * grad[q];
            f_trial = obj.value_and_gradient(trial, trial_grad);
            if (std::isfinite(f_trial) && f_trial <= f - 1e-4 * step * gnorm * gnorm) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        // Barzilai-Borwein proposal for the next trial step.
        double ss = 0.0;
        double sy = 0.0;
        for (std::size_t q = 0; q < theta.size(); ++q) {
            const double s = trial[q] - theta[q];
            const double yq = trial_grad[q] - grad[q];
            ss += s * s;
            sy += s * yq;
        }
        step = sy > 0.0 ? ss / sy : step * 2.0;
        theta.swap(trial);
        grad.swap(trial_grad);
        f = f_trial;
        gnorm = norm(grad);
    }
    LrState st;
    st.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(k * d));
    st.bias.assign(theta.begin() + static_cast<std::ptrdiff_t>(k * d), theta.end());
    st.iterations = it;
    st.gradient_norm = gnorm;
    st.solver_alias = cfg.text("solver");
    return st;
}

void linear_scores(const std::vector<double>& w, const std::vector<double>& b, std::span<const double> x,
                   std::size_t rows, std::size_t width, std::size_t k, double* out) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* xi = x.data() + i * width;
        for (std::size_t c = 0; c < k; ++c) {
            double s = b[c];
            const double* wc = w.data() + c * width;
            for (std::size_t j = 0; j < width; ++j) s += wc[j] * xi[j];
            out[i * k + c] = s;
        }
    }
}

// ---------------------------------------------------------------------------------------
// linear discriminant analysis

LdaState fit_lda(const ModelConfig& cfg, const Dataset& train, std::span<const Label> y, std::size_t k) {
    const std::size_t n = train.rows();
    const std::size_t d = train.cols();
    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
    std::vector<double> counts(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<Eigen::Index>(y[i]);
        counts[static_cast<std::size_t>(c)] += 1.0;
        for (std::size_t j = 0; j < d; ++j) means(c, static_cast<Eigen::Index>(j)) += train.at(i, j);
    }
    for (std::size_t c = 0; c < k; ++c) means.row(static_cast<Eigen::Index>(c)) /= counts[c];

    Eigen::MatrixXd centered(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            centered(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                train.at(i, j) - means(static_cast<Eigen::Index>(y[i]), static_cast<Eigen::Index>(j));
        }
    }
    const double dof = n > k ? static_cast<double>(n - k) : static_cast<double>(n);
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / dof;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cov, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cutoff = sv.size() > 0 ? sv(0) * static_cast<double>(d) * std::numeric_limits<double>::epsilon() : 0.0;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index q = 0; q < sv.size(); ++q) inv(q) = sv(q) > cutoff ? 1.0 / sv(q) : 0.0;
    const Eigen::MatrixXd pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();

    LdaState st;
    st.coef.resize(k * d);
    st.intercept.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        const Eigen::VectorXd mu = means.row(static_cast<Eigen::Index>(c)).transpose();
        const Eigen::VectorXd a = pinv * mu;
        for (std::size_t j = 0; j < d; ++j) st.coef[c * d + j] = a(static_cast<Eigen::Index>(j));
        st.intercept[c] = -0.5 * mu.dot(a) + std::log(counts[c] / static_cast<double>(n));
    }
    st.solver_alias = cfg.text("solver");
    return st;
}

// ---------------------------------------------------------------------------------------
// JSON helpers

ordered_json tree_to_json(const Tree& t) {
    ordered_json nodes = ordered_json::array();
    for (const auto& n : t.nodes) {
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.depth, n.gain});
    }
    return {{"value_width", t.value_width}, {"nodes", nodes}, {"values", t.values}};
}

Tree tree_from_json(const ordered_json& j) {
    Tree t;
    t.value_width = j.at("value_width").get<std::size_t>();
    for (const auto& n : j.at("nodes")) {
        t.nodes.push_back(TreeNode{n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                                   n.at(4).get<int>(), n.at(5).get<double>()});
    }
    t.values = j.at("values").get<std::vector<double>>();
    return t;
}

// JSON cannot carry -inf/lowest faithfully through every reader; encode as null.
ordered_json encode_scores(const std::vector<double>& v) {
    ordered_json out = ordered_json::array();
    for (double e : v) {
        if (e == kImpossible) out.push_back(nullptr);
        else out.push_back(e);
    }
    return out;
}

std::vector<double> decode_scores(const ordered_json& j) {
    std::vector<double> out;
    for (const auto& e : j) out.push_back(e.is_null() ? kImpossible : e.get<double>());
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------------------
// configuration

ModelKind parse_kind(const std::string& name) {
    std::string s;
    for (char c : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (s == "gb") return ModelKind::gb;
    if (s == "rf") return ModelKind::rf;
    if (s == "knn") return ModelKind::knn;
    if (s == "lr") return ModelKind::lr;
    if (s == "lda") return ModelKind::lda;
    if (s == "svc") return ModelKind::svc;
    throw Error(ErrorCode::InvalidConfig, "unknown model kind '" + name + "'");
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::gb: return "gb";
        case ModelKind::rf: return "rf";
        case ModelKind::knn: return "knn";
        case ModelKind::lr: return "lr";
        case ModelKind::lda: return "lda";
        case ModelKind::svc: return "svc";
    }
    return "gb";
}

bool is_tree_ensemble(ModelKind kind) noexcept { return kind == ModelKind::gb || kind == ModelKind::rf; }

std::string to_string(const ParamValue& v) {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    const double d = std::get<double>(v);
    if (d == std::floor(d) && std::abs(d) < 1e15) return std::to_string(static_cast<long long>(d));
    return format_double(d);
}

ordered_json param_to_json(const ParamValue& v) {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    const double d = std::get<double>(v);
    if (d == std::floor(d) && std::abs(d) < 1e15) return static_cast<long long>(d);
    return d;
}

ParamValue param_from_json(const ordered_json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number()) return j.get<double>();
    throw Error(ErrorCode::InvalidParam, "parameter values must be numbers or strings, got " + j.dump());
}

ordered_json params_to_json(const ParamMap& params) {
    ordered_json out = ordered_json::object();
    for (const auto& [name, v] : params) out[name] = param_to_json(v);
    return out;
}

double ModelConfig::number(const std::string& name) const {
    const auto it = params.find(name);
    if (it == params.end()) return std::get<double>(domains(kind).at(name).fallback);
    if (const auto* d = std::get_if<double>(&it->second)) return *d;
    throw Error(ErrorCode::InvalidParam, name + " must be numeric");
}

std::size_t ModelConfig::integer(const std::string& name) const { return static_cast<std::size_t>(number(name)); }

const std::string& ModelConfig::text(const std::string& name) const {
    const auto it = params.find(name);
    const ParamValue& v = it == params.end() ? domains(kind).at(name).fallback : it->second;
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    throw Error(ErrorCode::InvalidParam, name + " must be a string");
}

ParamMap default_params(ModelKind kind) {
    ParamMap out;
    for (const auto& [name, dom] : domains(kind)) out[name] = dom.fallback;
    return out;
}

void validate_params(ModelKind kind, const ParamMap& params) {
    const auto& dom = domains(kind);
    for (const auto& [name, value] : params) {
        const auto it = dom.find(canonical_name(kind, name));
        if (it == dom.end()) {
            throw Error(ErrorCode::InvalidParam, "'" + name + "' is not a parameter of " + to_string(kind));
        }
        const Domain& d = it->second;
        if (d.type == Domain::Type::Choice) {
            const auto* s = std::get_if<std::string>(&value);
            if (s == nullptr || std::find(d.choices.begin(), d.choices.end(), *s) == d.choices.end()) {
                throw Error(ErrorCode::InvalidParam, to_string(kind) + "." + name + " = '" + to_string(value) + "' is outside its domain");
            }
            continue;
        }
        const auto* v = std::get_if<double>(&value);
        const bool ok = v != nullptr && std::isfinite(*v) && (d.lo_open ? *v > d.lo : *v >= d.lo) && *v <= d.hi &&
                        (d.type != Domain::Type::Integer || *v == std::floor(*v));
        if (!ok) {
            throw Error(ErrorCode::InvalidParam, to_string(kind) + "." + name + " = " + to_string(value) + " is outside its domain");
        }
    }
}

ModelConfig make_config(ModelKind kind, const ParamMap& overrides, std::uint64_t seed) {
    ModelConfig cfg{kind, default_params(kind), seed};
    ParamMap canonical;
    for (const auto& [name, v] : overrides) canonical[canonical_name(kind, name)] = v;
    validate_params(kind, canonical);
    for (const auto& [name, v] : canonical) cfg.params[name] = v;
    return cfg;
}

ModelConfig default_ranking_estimator(std::uint64_t seed) {
    return make_config(ModelKind::gb, {{"n_estimators", 100.0}, {"max_depth", 3.0}, {"learning_rate", 0.1}, {"subsample", 1.0}}, seed);
}

std::string schema_fingerprint(const std::vector<std::string>& feature_names) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& name : feature_names) {
        for (unsigned char c : name) h = (h ^ c) * 0x100000001b3ULL;
        h = (h ^ 0x1f) * 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// ---------------------------------------------------------------------------------------
// fit / predict

TrainedModel fit(const ModelConfig& cfg, const Dataset& train) {
    validate_params(cfg.kind, cfg.params);
    if (cfg.kind == ModelKind::svc) {
        throw Error(ErrorCode::UnsupportedModel,
                    "kernel SVC is outside this toolkit's scope (no QP/SMO solver); its grid is accepted for "
                    "report parity only");
    }
    if (train.rows() < 2) throw Error(ErrorCode::TooFewRows, "training needs at least 2 rows");

    TrainedModel model;
    model.config = make_config(cfg.kind, cfg.params, cfg.seed);
    model.n_classes = train.n_classes();
    model.feature_names = train.schema().feature_names;
    model.fingerprint = schema_fingerprint(model.feature_names);

    std::vector<int> internal(train.n_classes(), -1);
    for (Label y : train.labels()) internal[static_cast<std::size_t>(y)] = 0;
    for (std::size_t c = 0; c < internal.size(); ++c) {
        if (internal[c] == 0) {
            internal[c] = static_cast<int>(model.classes.size());
            model.classes.push_back(static_cast<Label>(c));
        }
    }
    if (model.classes.size() < 2) {
        throw Error(ErrorCode::SingleClassTraining, "training data contains a single class");
    }
    std::vector<Label> y(train.rows());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = internal[static_cast<std::size_t>(train.label(i))];
    const std::size_t k = model.classes.size();

    switch (cfg.kind) {
        case ModelKind::gb: model.state = fit_gb(model.config, train, y, k); break;
        case ModelKind::rf: model.state = fit_rf(model.config, train, y, k); break;
        case ModelKind::knn: model.state = fit_knn(model.config, train, y); break;
        case ModelKind::lr: model.state = fit_lr(model.config, train, y, k); break;
        case ModelKind::lda: model.state = fit_lda(model.config, train, y, k); break;
        case ModelKind::svc: break;
    }
    return model;
}

std::vector<double> predict_proba(const TrainedModel& model, std::span<const double> x, std::size_t rows) {
    check_width(model, x.size(), rows);
    const std::size_t k = model.classes.size();
    const std::size_t w = model.width();
    std::vector<double> inner(rows * k);
    std::visit(
        [&](const auto& st) {
            using T = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<T, GbState>) {
                proba_gb(st, x, rows, w, k, inner.data());
            } else if constexpr (std::is_same_v<T, RfState>) {
                proba_rf(st, x, rows, w, k, inner.data());
            } else if constexpr (std::is_same_v<T, KnnState>) {
                proba_knn(st, x, rows, w, k, inner.data());
            } else if constexpr (std::is_same_v<T, LrState>) {
                linear_scores(st.weights, st.bias, x, rows, w, k, inner.data());
                for (std::size_t i = 0; i < rows; ++i) softmax_inplace(inner.data() + i * k, k);
            } else {
                linear_scores(st.coef, st.intercept, x, rows, w, k, inner.data());
                for (std::size_t i = 0; i < rows; ++i) softmax_inplace(inner.data() + i * k, k);
            }
        },
        model.state);
    std::vector<double> out(rows * model.n_classes, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t c = 0; c < k; ++c) {
            out[i * model.n_classes + static_cast<std::size_t>(model.classes[c])] = inner[i * k + c];
        }
    }
    return out;
}

std::vector<double> predict_proba(const TrainedModel& model, const Dataset& ds) {
    if (ds.cols() != model.width()) {
        throw Error(ErrorCode::WidthMismatch, "dataset has " + std::to_string(ds.cols()) + " features, model expects " +
                                                  std::to_string(model.width()));
    }
    return predict_proba(model, ds.values(), ds.rows());
}

namespace {
std::vector<Label> argmax_rows(const std::vector<double>& proba, std::size_t rows, std::size_t k) {
    std::vector<Label> out(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = proba.data() + i * k;
        out[i] = static_cast<Label>(std::max_element(row, row + k) - row);
    }
    return out;
}
}  // namespace

std::vector<Label> predict(const TrainedModel& model, std::span<const double> x, std::size_t rows) {
    return argmax_rows(predict_proba(model, x, rows), rows, model.n_classes);
}

std::vector<Label> predict(const TrainedModel& model, const Dataset& ds) {
    return argmax_rows(predict_proba(model, ds), ds.rows(), model.n_classes);
}

std::vector<double> importance_scores(const TrainedModel& model) {
    const std::vector<Tree>* trees = nullptr;
    if (const auto* gb = std::get_if<GbState>(&model.state)) trees = &gb->trees;
    if (const auto* rf = std::get_if<RfState>(&model.state)) trees = &rf->trees;
    if (trees == nullptr) {
        throw Error(ErrorCode::UnsupportedModel, "importance scores need a tree ensemble, got " + to_string(model.config.kind));
    }
    std::vector<double> imp(model.width(), 0.0);
    for (const auto& tree : *trees) {
        for (const auto& node : tree.nodes) {
            if (node.feature >= 0) imp[static_cast<std::size_t>(node.feature)] += node.gain;
        }
    }
    const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (total > 0.0) {
        for (double& v : imp) v /= total;
    }
    return imp;
}

// ---------------------------------------------------------------------------------------
// losses

std::vector<double> softmax_rows(std::span<const double> scores, std::size_t k) {
    std::vector<double> out(scores.begin(), scores.end());
    for (std::size_t i = 0; i < out.size() / k; ++i) softmax_inplace(out.data() + i * k, k);
    return out;
}

double multinomial_deviance(std::span<const double> scores, std::span<const Label> y, std::size_t k) {
    const std::size_t n = y.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = scores.data() + i * k;
        total += log_sum_exp(row, k) - row[static_cast<std::size_t>(y[i])];
    }
    return total / static_cast<double>(n);
}

std::vector<double> deviance_gradient(std::span<const double> scores, std::span<const Label> y, std::size_t k) {
    auto g = softmax_rows(scores, k);
    const double inv_n = 1.0 / static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        g[i * k + static_cast<std::size_t>(y[i])] -= 1.0;
        for (std::size_t c = 0; c < k; ++c) g[i * k + c] *= inv_n;
    }
    return g;
}

double LogisticObjective::value(std::span<const double> params) const {
    std::vector<double> grad;
    return value_and_gradient(params, grad);
}

double LogisticObjective::value_and_gradient(std::span<const double> params, std::vector<double>& grad) const {
    const std::size_t k = classes;
    const std::size_t d = cols;
    const double* w = params.data();
    const double* b = params.data() + k * d;
    grad.assign(k * d + k, 0.0);
    std::vector<double> z(k);
    double loss = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const double* xi = x.data() + i * d;
        for (std::size_t c = 0; c < k; ++c) {
            double s = b[c];
            for (std::size_t j = 0; j < d; ++j) s += w[c * d + j] * xi[j];
            z[c] = s;
        }
        const double lse = log_sum_exp(z.data(), k);
        const auto yi = static_cast<std::size_t>(y[i]);
        loss += lse - z[yi];
        for (std::size_t c = 0; c < k; ++c) {
            const double r = std::exp(z[c] - lse) - (c == yi ? 1.0 : 0.0);
            double* gc = grad.data() + c * d;
            for (std::size_t j = 0; j < d; ++j) gc[j] += r * xi[j];
            grad[k * d + c] += r;
        }
    }
    const double inv_n = 1.0 / static_cast<double>(rows);
    const double penalty = inv_n / c_value;
    double sq = 0.0;
    for (std::size_t q = 0; q < k * d; ++q) {
        sq += w[q] * w[q];
        grad[q] = grad[q] * inv_n + penalty * w[q];
    }
    for (std::size_t c = 0; c < k; ++c) grad[k * d + c] *= inv_n;
    return loss * inv_n + 0.5 * penalty * sq;
}

// ---------------------------------------------------------------------------------------
// serialization

ordered_json to_json(const TrainedModel& model) {
    ordered_json j;
    j["format"] = "stresskit-model";
    j["version"] = 1;
    j["kind"] = to_string(model.config.kind);
    j["params"] = params_to_json(model.config.params);
    j["seed"] = model.config.seed;
    j["n_classes"] = model.n_classes;
    j["classes"] = model.classes;
    j["feature_names"] = model.feature_names;
    j["schema_fingerprint"] = model.fingerprint;
    ordered_json st;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, GbState>) {
                st["init_scores"] = encode_scores(s.init_scores);
                st["learning_rate"] = s.learning_rate;
                st["iterations"] = s.iterations;
                st["train_deviance"] = s.train_deviance;
                ordered_json trees = ordered_json::array();
                for (const auto& t : s.trees) trees.push_back(tree_to_json(t));
                st["trees"] = std::move(trees);
            } else if constexpr (std::is_same_v<T, RfState>) {
                ordered_json trees = ordered_json::array();
                for (const auto& t : s.trees) trees.push_back(tree_to_json(t));
                st["trees"] = std::move(trees);
            } else if constexpr (std::is_same_v<T, KnnState>) {
                st["k"] = s.k;
                st["distance_weighted"] = s.distance_weighted;
                st["p"] = s.p;
                st["x"] = s.x;
                st["y"] = s.y;
            } else if constexpr (std::is_same_v<T, LrState>) {
                st["weights"] = s.weights;
                st["bias"] = s.bias;
                st["iterations"] = s.iterations;
                st["gradient_norm"] = s.gradient_norm;
                st["solver_alias"] = s.solver_alias;
                st["solver_implementation"] = solver_implementation(ModelKind::lr);
            } else {
                st["coef"] = s.coef;
                st["intercept"] = s.intercept;
                st["solver_alias"] = s.solver_alias;
                st["solver_implementation"] = solver_implementation(ModelKind::lda);
            }
        },
        model.state);
    j["state"] = std::move(st);
    return j;
}

TrainedModel model_from_json(const ordered_json& j) {
    try {
        if (j.at("format").get<std::string>() != "stresskit-model" || j.at("version").get<int>() != 1) {
            throw Error(ErrorCode::InvalidConfig, "not a version 1 stresskit model file");
        }
        TrainedModel m;
        m.config.kind = parse_kind(j.at("kind").get<std::string>());
        for (const auto& [name, v] : j.at("params").items()) m.config.params[name] = param_from_json(v);
        validate_params(m.config.kind, m.config.params);
        m.config.seed = j.at("seed").get<std::uint64_t>();
        m.n_classes = j.at("n_classes").get<std::size_t>();
        m.classes = j.at("classes").get<std::vector<Label>>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.fingerprint = j.at("schema_fingerprint").get<std::string>();
        if (m.fingerprint != schema_fingerprint(m.feature_names)) {
            throw Error(ErrorCode::InvalidConfig, "schema fingerprint does not match feature names");
        }
        const auto& st = j.at("state");
        switch (m.config.kind) {
            case ModelKind::gb: {
                GbState s;
                s.init_scores = decode_scores(st.at("init_scores"));
                s.learning_rate = st.at("learning_rate").get<double>();
                s.iterations = st.at("iterations").get<std::size_t>();
                s.train_deviance = st.at("train_deviance").get<std::vector<double>>();
                for (const auto& t : st.at("trees")) s.trees.push_back(tree_from_json(t));
                m.state = std::move(s);
                break;
            }
            case ModelKind::rf: {
                RfState s;
                for (const auto& t : st.at("trees")) s.trees.push_back(tree_from_json(t));
                m.state = std::move(s);
                break;
            }
            case ModelKind::knn: {
                KnnState s;
                s.k = st.at("k").get<std::size_t>();
                s.distance_weighted = st.at("distance_weighted").get<bool>();
                s.p = st.at("p").get<double>();
                s.x = st.at("x").get<std::vector<double>>();
                s.y = st.at("y").get<std::vector<Label>>();
                m.state = std::move(s);
                break;
            }
            case ModelKind::lr: {
                LrState s;
                s.weights = st.at("weights").get<std::vector<double>>();
                s.bias = st.at("bias").get<std::vector<double>>();
                s.iterations = st.at("iterations").get<std::size_t>();
                s.gradient_norm = st.at("gradient_norm").get<double>();
                s.solver_alias = st.at("solver_alias").get<std::string>();
                m.state = std::move(s);
                break;
            }
            case ModelKind::lda: {
                LdaState s;
                s.coef = st.at("coef").get<std::vector<double>>();
                s.intercept = st.at("intercept").get<std::vector<double>>();
                s.solver_alias = st.at("solver_alias").get<std::string>();
                m.state = std::move(s);
                break;
            }
            case ModelKind::svc:
                throw Error(ErrorCode::UnsupportedModel, "svc models cannot be serialized");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("malformed model file: ") + e.what());
    }
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << to_json(model).dump(1) << '\n';
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    try {
        return model_from_json(ordered_json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("model file is not JSON: ") + e.what());
    }
}

}  // namespace stresskit::models
