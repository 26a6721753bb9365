#ifndef FAIRPILOT_MODELS_HPP
#define FAIRPILOT_MODELS_HPP

#include "fairpilot/data.hpp"
#include "fairpilot/error.hpp"
#include "fairpilot/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace fairpilot {

enum class ModelFamily { decision_tree, random_forest, logistic_regression, svc };

inline constexpr std::array<ModelFamily, 4> kAllFamilies{ModelFamily::decision_tree, ModelFamily::random_forest,
                                                         ModelFamily::logistic_regression, ModelFamily::svc};

inline const char* to_string(ModelFamily f) {
    switch (f) {
    case ModelFamily::decision_tree: return "decision_tree";
    case ModelFamily::random_forest: return "random_forest";
    case ModelFamily::logistic_regression: return "logistic_regression";
    case ModelFamily::svc: return "svc";
    }
    return "unknown";
}

/// Accepts the canonical ids and the short aliases dt/rf/lr/svc.
inline std::optional<ModelFamily> parse_family(std::string_view s) {
    if (s == "decision_tree" || s == "dt") return ModelFamily::decision_tree;
    if (s == "random_forest" || s == "rf") return ModelFamily::random_forest;
    if (s == "logistic_regression" || s == "lr") return ModelFamily::logistic_regression;
    if (s == "svc" || s == "svm") return ModelFamily::svc;
    return std::nullopt;
}

using ParamValue = std::variant<bool, std::int64_t, double, std::string>;

inline std::string to_string(const ParamValue& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, bool>) {
                return x ? "true" : "false";
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                return std::to_string(x);
            } else if constexpr (std::is_same_v<T, double>) {
                return detail::format_number(x);
            } else {
                return x;
            }
        },
        v);
}

/// One point of a family's hyperparameter grid. Values are kept in the
/// family's declaration order.
struct Assignment {
    ModelFamily family = ModelFamily::decision_tree;
    std::vector<std::pair<std::string, ParamValue>> values;

    const ParamValue* get(std::string_view name) const {
        for (const auto& [k, v] : values) {
            if (k == name) {
                return &v;
            }
        }
        return nullptr;
    }

    bool operator==(const Assignment&) const = default;
};

enum class Criterion { gini, entropy };
enum class MaxFeatures { all, sqrt, log2 };
enum class ClassWeight { none, balanced };
enum class Kernel { linear, poly, rbf, sigmoid };

struct TreeParams {
    Criterion criterion = Criterion::gini;
    MaxFeatures max_features = MaxFeatures::all;
    std::size_t min_samples_split = 2;
    std::size_t min_samples_leaf = 1;
    ClassWeight class_weight = ClassWeight::none;
};

struct ForestParams {
    TreeParams tree;
    bool bootstrap = true;
    std::size_t n_trees = 100;
};

struct LogisticParams {
    double C = 1.0;
    bool l2 = true;
    std::size_t max_iter = 1000;
    double tol = 1e-6;
};

struct SvcParams {
    double C = 1.0;
    Kernel kernel = Kernel::rbf;
    int degree = 3;
    double coef0 = 0.0;
    std::size_t epochs = 10;
};

/// Settings that are fixed for a run rather than searched over.
struct ModelOptions {
    std::size_t rf_trees = 100;
    std::size_t lr_max_iter = 1000;
    double lr_tol = 1e-6;
    std::size_t svc_epochs = 10;
};

namespace detail {

inline const std::string& param_string(const Assignment& a, std::string_view name) {
    const auto* v = a.get(name);
    if (!v || !std::holds_alternative<std::string>(*v)) {
        throw ValidationError(std::string(to_string(a.family)) + ": hyperparameter '" + std::string(name) +
                              "' missing or not a string");
    }
    return std::get<std::string>(*v);
}

inline std::int64_t param_int(const Assignment& a, std::string_view name) {
    const auto* v = a.get(name);
    if (v && std::holds_alternative<std::int64_t>(*v)) {
        return std::get<std::int64_t>(*v);
    }
    if (v && std::holds_alternative<double>(*v)) {
        const double d = std::get<double>(*v);
        if (d == std::floor(d)) {
            return static_cast<std::int64_t>(d);
        }
    }
    throw ValidationError(std::string(to_string(a.family)) + ": hyperparameter '" + std::string(name) +
                          "' missing or not an integer");
}

inline double param_double(const Assignment& a, std::string_view name) {
    const auto* v = a.get(name);
    if (v && std::holds_alternative<double>(*v)) {
        return std::get<double>(*v);
    }
    if (v && std::holds_alternative<std::int64_t>(*v)) {
        return static_cast<double>(std::get<std::int64_t>(*v));
    }
    throw ValidationError(std::string(to_string(a.family)) + ": hyperparameter '" + std::string(name) +
                          "' missing or not a number");
}

inline bool param_bool(const Assignment& a, std::string_view name) {
    const auto* v = a.get(name);
    if (!v || !std::holds_alternative<bool>(*v)) {
        throw ValidationError(std::string(to_string(a.family)) + ": hyperparameter '" + std::string(name) +
                              "' missing or not a boolean");
    }
    return std::get<bool>(*v);
}

[[noreturn]] inline void bad_level(std::string_view param, const std::string& value) {
    throw ValidationError("unknown value '" + value + "' for hyperparameter '" + std::string(param) + "'");
}

} // namespace detail

inline TreeParams tree_params(const Assignment& a) {
    TreeParams p;
    const auto& crit = detail::param_string(a, "criterion");
    if (crit == "gini") p.criterion = Criterion::gini;
    else if (crit == "entropy") p.criterion = Criterion::entropy;
    else detail::bad_level("criterion", crit);

    const auto& mf = detail::param_string(a, "max_features");
    if (mf == "none") p.max_features = MaxFeatures::all;
    else if (mf == "sqrt") p.max_features = MaxFeatures::sqrt;
    else if (mf == "log2") p.max_features = MaxFeatures::log2;
    else detail::bad_level("max_features", mf);

    const auto split = detail::param_int(a, "min_samples_split");
    const auto leaf = detail::param_int(a, "min_samples_leaf");
    if (split < 1 || leaf < 1) {
        throw ValidationError("min_samples_split and min_samples_leaf must be >= 1");
    }
    p.min_samples_split = static_cast<std::size_t>(split);
    p.min_samples_leaf = static_cast<std::size_t>(leaf);

    const auto& cw = detail::param_string(a, "class_weight");
    if (cw == "none") p.class_weight = ClassWeight::none;
    else if (cw == "balanced") p.class_weight = ClassWeight::balanced;
    else detail::bad_level("class_weight", cw);
    return p;
}

inline ForestParams forest_params(const Assignment& a, const ModelOptions& opt = {}) {
    ForestParams p;
    p.tree = tree_params(a);
    p.bootstrap = detail::param_bool(a, "bootstrap");
    p.n_trees = opt.rf_trees;
    return p;
}

inline LogisticParams logistic_params(const Assignment& a, const ModelOptions& opt = {}) {
    LogisticParams p;
    p.C = detail::param_double(a, "C");
    if (!(p.C > 0.0) || !std::isfinite(p.C)) {
        throw ValidationError("C must be > 0");
    }
    const auto& pen = detail::param_string(a, "penalty");
    if (pen == "l2") p.l2 = true;
    else if (pen == "none") p.l2 = false;
    else detail::bad_level("penalty", pen);
    p.max_iter = opt.lr_max_iter;
    p.tol = opt.lr_tol;
    return p;
}

inline SvcParams svc_params(const Assignment& a, const ModelOptions& opt = {}) {
    SvcParams p;
    p.C = detail::param_double(a, "C");
    if (!(p.C > 0.0) || !std::isfinite(p.C)) {
        throw ValidationError("C must be > 0");
    }
    const auto& k = detail::param_string(a, "kernel");
    if (k == "linear") p.kernel = Kernel::linear;
    else if (k == "poly") p.kernel = Kernel::poly;
    else if (k == "rbf") p.kernel = Kernel::rbf;
    else if (k == "sigmoid") p.kernel = Kernel::sigmoid;
    else detail::bad_level("kernel", k);
    p.epochs = opt.svc_epochs;
    return p;
}

// ---------------------------------------------------------------------------
// Decision tree (CART)

/// Gini impurity of a two-class weighted distribution.
inline double gini(double w0, double w1) {
    const double w = w0 + w1;
    if (w <= 0.0) {
        return 0.0;
    }
    const double p0 = w0 / w, p1 = w1 / w;
    return 1.0 - p0 * p0 - p1 * p1;
}

/// Shannon entropy in bits.
inline double entropy(double w0, double w1) {
    const double w = w0 + w1;
    if (w <= 0.0) {
        return 0.0;
    }
    double h = 0.0;
    for (double c : {w0, w1}) {
        if (c > 0.0) {
            const double p = c / w;
            h -= p * std::log2(p);
        }
    }
    return h;
}

inline double impurity(Criterion c, double w0, double w1) {
    return c == Criterion::gini ? gini(w0, w1) : entropy(w0, w1);
}

/// Class weights n / (2 * n_k) for `balanced`, ones otherwise.
inline std::array<double, 2> class_weights(std::span<const std::uint8_t> y, ClassWeight mode) {
    if (mode == ClassWeight::none) {
        return {1.0, 1.0};
    }
    std::array<double, 2> n{};
    for (auto v : y) {
        n[v] += 1.0;
    }
    const double total = n[0] + n[1];
    return {n[0] > 0 ? total / (2.0 * n[0]) : 0.0, n[1] > 0 ? total / (2.0 * n[1]) : 0.0};
}

struct TreeNode {
    int feature = -1; // -1 for leaves
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::size_t n_samples = 0;
    std::array<double, 2> weight{};
    std::uint8_t label = 0;

    bool is_leaf() const noexcept { return feature < 0; }
};

class DecisionTree {
public:
    /// Grows a tree on `rows` of X (duplicates allowed, as produced by
    /// bootstrap resampling). Rows with x <= threshold go left.
    static DecisionTree fit(const Matrix& X, std::span<const std::uint8_t> y, std::vector<std::size_t> rows,
                            const std::array<double, 2>& cw, const TreeParams& params, std::uint64_t seed) {
        DecisionTree t;
        t.n_features_ = X.cols();
        Builder b{X, y, cw, params, Rng(seed), t.nodes_, {}};
        b.grow(rows);
        return t;
    }

    std::uint8_t predict_row(std::span<const double> x) const {
        std::size_t i = 0;
        while (!nodes_[i].is_leaf()) {
            const auto& n = nodes_[i];
            i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
        }
        return nodes_[i].label;
    }

    std::vector<std::uint8_t> predict(const Matrix& X) const {
        std::vector<std::uint8_t> out(X.rows());
        for (std::size_t r = 0; r < X.rows(); ++r) {
            out[r] = predict_row(X.row(r));
        }
        return out;
    }

    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    std::size_t n_features() const noexcept { return n_features_; }

    bool operator==(const DecisionTree& o) const {
        if (nodes_.size() != o.nodes_.size()) {
            return false;
        }
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto &a = nodes_[i], &b = o.nodes_[i];
            if (a.feature != b.feature || a.threshold != b.threshold || a.left != b.left || a.right != b.right ||
                a.n_samples != b.n_samples || a.label != b.label) {
                return false;
            }
        }
        return true;
    }

private:
    struct Candidate {
        double decrease = -1.0;
        int feature = -1;
        double threshold = 0.0;
    };

    struct Builder {
        const Matrix& X;
        std::span<const std::uint8_t> y;
        std::array<double, 2> cw;
        const TreeParams& params;
        Rng rng;
        std::vector<TreeNode>& nodes;
        std::vector<std::pair<double, std::size_t>> scratch;

        std::size_t features_per_split() const {
            const auto p = X.cols();
            switch (params.max_features) {
            case MaxFeatures::all: return p;
            case MaxFeatures::sqrt: return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(p))));
            case MaxFeatures::log2: return std::max<std::size_t>(1, static_cast<std::size_t>(std::log2(static_cast<double>(std::max<std::size_t>(p, 1)))));
            }
            return p;
        }

        std::int32_t grow(std::vector<std::size_t>& rows) {
            const auto id = static_cast<std::int32_t>(nodes.size());
            nodes.emplace_back();
            TreeNode node;
            node.n_samples = rows.size();
            for (auto r : rows) {
                node.weight[y[r]] += cw[y[r]];
            }
            // Weighted majority; ties resolve to 0.
            node.label = node.weight[1] > node.weight[0] ? 1 : 0;

            const bool pure = node.weight[0] <= 0.0 || node.weight[1] <= 0.0;
            if (!pure && rows.size() >= params.min_samples_split && rows.size() >= 2 * params.min_samples_leaf) {
                const auto best = find_split(rows, node.weight);
                if (best.feature >= 0) {
                    std::vector<std::size_t> left, right;
                    for (auto r : rows) {
                        (X(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right).push_back(r);
                    }
                    rows.clear();
                    rows.shrink_to_fit();
                    node.feature = best.feature;
                    node.threshold = best.threshold;
                    nodes[static_cast<std::size_t>(id)] = node;
                    const auto l = grow(left);
                    const auto r = grow(right);
                    nodes[static_cast<std::size_t>(id)].left = l;
                    nodes[static_cast<std::size_t>(id)].right = r;
                    return id;
                }
            }
            nodes[static_cast<std::size_t>(id)] = node;
            return id;
        }

        Candidate find_split(const std::vector<std::size_t>& rows, const std::array<double, 2>& total) {
            const std::size_t p = X.cols();
            std::vector<std::size_t> order(p);
            std::iota(order.begin(), order.end(), std::size_t{0});
            if (params.max_features != MaxFeatures::all) {
                rng.shuffle(std::span<std::size_t>(order));
            }
            const auto quota = features_per_split();
            const double parent = (total[0] + total[1]) * impurity(params.criterion, total[0], total[1]);
            const std::size_t n = rows.size();
            const std::size_t min_leaf = params.min_samples_leaf;

            Candidate best;
            std::size_t inspected = 0;
            for (auto f : order) {
                // Keep drawing features past the quota until a valid split exists.
                if (inspected >= quota && best.feature >= 0) {
                    break;
                }
                ++inspected;
                scratch.clear();
                for (auto r : rows) {
                    scratch.emplace_back(X(r, f), r);
                }
                std::sort(scratch.begin(), scratch.end());
                std::array<double, 2> left{};
                for (std::size_t k = 0; k + 1 < n; ++k) {
                    const auto r = scratch[k].second;
                    left[y[r]] += cw[y[r]];
                    const double lo = scratch[k].first, hi = scratch[k + 1].first;
                    if (!(lo < hi) || k + 1 < min_leaf || n - (k + 1) < min_leaf) {
                        continue;
                    }
                    const std::array<double, 2> right{total[0] - left[0], total[1] - left[1]};
                    const double dec = parent - (left[0] + left[1]) * impurity(params.criterion, left[0], left[1]) -
                                       (right[0] + right[1]) * impurity(params.criterion, right[0], right[1]);
                    double thr = lo + (hi - lo) / 2.0;
                    if (!(thr < hi)) {
                        thr = lo;
                    }
                    const auto fi = static_cast<int>(f);
                    if (best.feature < 0 || dec > best.decrease ||
                        (dec == best.decrease && (fi < best.feature || (fi == best.feature && thr < best.threshold)))) {
                        best = {dec, fi, thr};
                    }
                }
            }
            return best;
        }
    };

    std::vector<TreeNode> nodes_;
    std::size_t n_features_ = 0;
};

// ---------------------------------------------------------------------------
// Random forest

/// Seed of tree `t` in an ensemble trained with `seed`. A lone decision
/// tree uses tree index 0, so a one-tree forest without bootstrap
/// reproduces it exactly.
inline std::uint64_t tree_seed(std::uint64_t seed, std::size_t t) { return derive_seed(seed, {0x7EEULL, t}); }

class RandomForest {
public:
    static RandomForest fit(const Matrix& X, std::span<const std::uint8_t> y, const ForestParams& params,
                            std::uint64_t seed) {
        RandomForest f;
        const auto cw = class_weights(y, params.tree.class_weight);
        const std::size_t n = X.rows();
        f.trees_.reserve(params.n_trees);
        for (std::size_t t = 0; t < params.n_trees; ++t) {
            std::vector<std::size_t> rows(n);
            if (params.bootstrap) {
                Rng draw(derive_seed(seed, {0xB007ULL, t}));
                for (auto& r : rows) {
                    r = static_cast<std::size_t>(draw.below(n));
                }
                std::sort(rows.begin(), rows.end());
            } else {
                std::iota(rows.begin(), rows.end(), std::size_t{0});
            }
            f.trees_.push_back(DecisionTree::fit(X, y, std::move(rows), cw, params.tree, tree_seed(seed, t)));
        }
        return f;
    }

    /// Majority vote; ties resolve to 0.
    std::vector<std::uint8_t> predict(const Matrix& X) const {
        std::vector<std::uint8_t> out(X.rows());
        for (std::size_t r = 0; r < X.rows(); ++r) {
            std::size_t ones = 0;
            for (const auto& t : trees_) {
                ones += t.predict_row(X.row(r));
            }
            out[r] = 2 * ones > trees_.size() ? 1 : 0;
        }
        return out;
    }

    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

private:
    std::vector<DecisionTree> trees_;
};

// ---------------------------------------------------------------------------
// Logistic regression

struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;
    std::size_t iterations = 0;
    double grad_norm = 0.0;

    double decision(std::span<const double> x) const {
        double z = bias;
        for (std::size_t j = 0; j < weights.size(); ++j) {
            z += weights[j] * x[j];
        }
        return z;
    }

    std::vector<std::uint8_t> predict(const Matrix& X) const {
        std::vector<std::uint8_t> out(X.rows());
        for (std::size_t r = 0; r < X.rows(); ++r) {
            out[r] = decision(X.row(r)) > 0.0 ? 1 : 0;
        }
        return out;
    }
};

namespace detail {

// log(1 + exp(-m)) without overflow.
inline double log1pexp_neg(double m) { return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

// 1 / (1 + exp(m))
inline double sigmoid_neg(double m) {
    if (m >= 0) {
        const double e = std::exp(-m);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(m));
}

} // namespace detail

/// Minimizes  sum_i logloss_i + (1/C)||w||^2  (penalty only for l2; the
/// intercept is never penalized), scaled by 1/n, with L-BFGS and Armijo
/// backtracking.
inline LogisticModel fit_logistic(const Matrix& X, std::span<const std::uint8_t> y, const LogisticParams& params) {
    const std::size_t n = X.rows(), p = X.cols(), dim = p + 1;
    const double inv_n = 1.0 / static_cast<double>(n);
    const double reg = params.l2 ? 1.0 / params.C : 0.0;

    auto evaluate = [&](const std::vector<double>& theta, std::vector<double>& grad) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = X.row(i);
            double z = theta[p];
            for (std::size_t j = 0; j < p; ++j) {
                z += theta[j] * x[j];
            }
            const double s = y[i] ? 1.0 : -1.0;
            loss += detail::log1pexp_neg(s * z);
            const double g = -s * detail::sigmoid_neg(s * z);
            for (std::size_t j = 0; j < p; ++j) {
                grad[j] += g * x[j];
            }
            grad[p] += g;
        }
        for (std::size_t j = 0; j < p; ++j) {
            loss += reg * theta[j] * theta[j];
            grad[j] += 2.0 * reg * theta[j];
        }
        for (auto& g : grad) {
            g *= inv_n;
        }
        return loss * inv_n;
    };
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            s += a[i] * b[i];
        }
        return s;
    };
    auto inf_norm = [](const std::vector<double>& a) {
        double m = 0.0;
        for (double v : a) {
            m = std::max(m, std::abs(v));
        }
        return m;
    };

    constexpr std::size_t kMemory = 10;
    std::vector<double> theta(dim, 0.0), grad(dim), next(dim), next_grad(dim), dir(dim);
    std::deque<std::pair<std::vector<double>, std::vector<double>>> history; // (s, y)
    double f = evaluate(theta, grad);
    std::size_t it = 0;
    for (; it < params.max_iter && inf_norm(grad) > params.tol; ++it) {
        // Two-loop recursion.
        dir = grad;
        std::vector<double> alpha(history.size());
        for (std::size_t k = history.size(); k-- > 0;) {
            const auto& [s, yk] = history[k];
            alpha[k] = dot(s, dir) / dot(yk, s);
            for (std::size_t j = 0; j < dim; ++j) {
                dir[j] -= alpha[k] * yk[j];
            }
        }
        if (!history.empty()) {
            const auto& [s, yk] = history.back();
            const double scale = dot(s, yk) / dot(yk, yk);
            for (auto& d : dir) {
                d *= scale;
            }
        }
        for (std::size_t k = 0; k < history.size(); ++k) {
            const auto& [s, yk] = history[k];
            const double beta = dot(yk, dir) / dot(yk, s);
            for (std::size_t j = 0; j < dim; ++j) {
                dir[j] += (alpha[k] - beta) * s[j];
            }
        }
        for (auto& d : dir) {
            d = -d;
        }
        double slope = dot(grad, dir);
        if (!(slope < 0.0)) {
            history.clear();
            for (std::size_t j = 0; j < dim; ++j) {
                dir[j] = -grad[j];
            }
            slope = dot(grad, dir);
        }

        double step = 1.0;
        double f_next = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t j = 0; j < dim; ++j) {
                next[j] = theta[j] + step * dir[j];
            }
            f_next = evaluate(next, next_grad);
            if (f_next <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            break;
        }
        std::vector<double> s(dim), yk(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            s[j] = next[j] - theta[j];
            yk[j] = next_grad[j] - grad[j];
        }
        if (dot(s, yk) > 1e-12) {
            history.emplace_back(std::move(s), std::move(yk));
            if (history.size() > kMemory) {
                history.pop_front();
            }
        }
        theta.swap(next);
        grad.swap(next_grad);
        f = f_next;
    }

    LogisticModel m;
    m.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(p));
    m.bias = theta[p];
    m.iterations = it;
    m.grad_norm = inf_norm(grad);
    return m;
}

// ---------------------------------------------------------------------------
// Kernel support vector classifier

struct KernelSpec {
    Kernel kind = Kernel::rbf;
    double gamma = 1.0;
    int degree = 3;
    double coef0 = 0.0;

    double operator()(std::span<const double> a, std::span<const double> b) const {
        if (kind == Kernel::rbf) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < a.size(); ++j) {
                const double d = a[j] - b[j];
                d2 += d * d;
            }
            return std::exp(-gamma * d2);
        }
        double ip = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) {
            ip += a[j] * b[j];
        }
        switch (kind) {
        case Kernel::linear: return ip;
        case Kernel::poly: return std::pow(gamma * ip + coef0, degree);
        case Kernel::sigmoid: return std::tanh(gamma * ip + coef0);
        default: return ip;
        }
    }
};

struct SvcModel {
    KernelSpec kernel;
    Matrix support;
    std::vector<double> coef;

    double decision(std::span<const double> x) const {
        double f = 0.0;
        for (std::size_t k = 0; k < coef.size(); ++k) {
            // +1 augments the kernel with a (regularized) bias feature.
            f += coef[k] * (kernel(support.row(k), x) + 1.0);
        }
        return f;
    }

    std::vector<std::uint8_t> predict(const Matrix& X) const {
        std::vector<std::uint8_t> out(X.rows());
        for (std::size_t r = 0; r < X.rows(); ++r) {
            out[r] = decision(X.row(r)) > 0.0 ? 1 : 0;
        }
        return out;
    }
};

/// gamma = 1 / (p * var(X)) over all entries; 1 when that is undefined.
inline double scale_gamma(const Matrix& X) {
    const auto data = X.data();
    if (data.empty() || X.cols() == 0) {
        return 1.0;
    }
    const double mu = detail::mean_of(data);
    double ss = 0.0;
    for (double v : data) {
        ss += (v - mu) * (v - mu);
    }
    const double var = ss / static_cast<double>(data.size());
    return var > 0.0 ? 1.0 / (static_cast<double>(X.cols()) * var) : 1.0;
}

/// Kernelized Pegasos: stochastic subgradient descent on
///   (lambda/2)||f||^2 + (1/n) sum_i hinge(y_i f(x_i)),  lambda = 1/(C n),
/// which has the same minimizer as 0.5||f||^2 + C sum_i hinge.
inline SvcModel fit_svc(const Matrix& X, std::span<const std::uint8_t> y, const SvcParams& params, std::uint64_t seed) {
    const std::size_t n = X.rows();
    SvcModel m;
    m.kernel = {params.kernel, scale_gamma(X), params.degree, params.coef0};
    const double lambda = 1.0 / (params.C * static_cast<double>(n));
    const std::size_t steps = std::max<std::size_t>(1, params.epochs * n);

    std::vector<double> alpha(n, 0.0);
    std::vector<double> g(n, 0.0); // g_j = sum_i alpha_i y_i K'(x_i, x_j)
    Rng rng(derive_seed(seed, {0x5FCULL}));
    for (std::size_t t = 1; t <= steps; ++t) {
        const auto i = static_cast<std::size_t>(rng.below(n));
        const double yi = y[i] ? 1.0 : -1.0;
        if (yi * g[i] / (lambda * static_cast<double>(t)) < 1.0) {
            alpha[i] += 1.0;
            const auto xi = X.row(i);
            for (std::size_t j = 0; j < n; ++j) {
                g[j] += yi * (m.kernel(xi, X.row(j)) + 1.0);
            }
        }
    }
    std::vector<std::size_t> sv;
    for (std::size_t i = 0; i < n; ++i) {
        if (alpha[i] > 0.0) {
            sv.push_back(i);
        }
    }
    m.support = X.select_rows(sv);
    const double scale = 1.0 / (lambda * static_cast<double>(steps));
    for (auto i : sv) {
        m.coef.push_back(alpha[i] * (y[i] ? 1.0 : -1.0) * scale);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Uniform train / predict contract

class TrainedModel {
public:
    using Impl = std::variant<DecisionTree, RandomForest, LogisticModel, SvcModel>;

    TrainedModel(Assignment a, std::uint64_t seed, std::size_t n_features, Impl impl)
        : assignment_(std::move(a)), seed_(seed), n_features_(n_features), impl_(std::move(impl)) {}

    ModelFamily family() const noexcept { return assignment_.family; }
    const Assignment& assignment() const noexcept { return assignment_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t n_features() const noexcept { return n_features_; }
    const Impl& impl() const noexcept { return impl_; }

private:
    Assignment assignment_;
    std::uint64_t seed_;
    std::size_t n_features_;
    Impl impl_;
};

/// Trains one model on a training partition. Throws TrainingError for a
/// single-class partition or non-finite features.
inline TrainedModel train(const Matrix& X, std::span<const std::uint8_t> y, const Assignment& a, std::uint64_t seed,
                          const ModelOptions& opt = {}) {
    if (X.rows() != y.size()) {
        throw TrainingError("feature rows (" + std::to_string(X.rows()) + ") and labels (" + std::to_string(y.size()) +
                            ") differ in length");
    }
    if (X.rows() < 2) {
        throw TrainingError("training partition needs at least 2 rows");
    }
    std::array<std::size_t, 2> counts{};
    for (auto v : y) {
        if (v > 1) {
            throw TrainingError("labels must be 0 or 1");
        }
        ++counts[v];
    }
    if (counts[0] == 0 || counts[1] == 0) {
        throw TrainingError("training partition contains a single class");
    }
    for (double v : X.data()) {
        if (!std::isfinite(v)) {
            throw TrainingError("non-finite feature value in training partition");
        }
    }

    switch (a.family) {
    case ModelFamily::decision_tree: {
        const auto p = tree_params(a);
        std::vector<std::size_t> rows(X.rows());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        return {a, seed, X.cols(),
                DecisionTree::fit(X, y, std::move(rows), class_weights(y, p.class_weight), p, tree_seed(seed, 0))};
    }
    case ModelFamily::random_forest:
        return {a, seed, X.cols(), RandomForest::fit(X, y, forest_params(a, opt), seed)};
    case ModelFamily::logistic_regression:
        return {a, seed, X.cols(), fit_logistic(X, y, logistic_params(a, opt))};
    case ModelFamily::svc:
        return {a, seed, X.cols(), fit_svc(X, y, svc_params(a, opt), seed)};
    }
    throw TrainingError("unknown model family");
}

inline std::vector<std::uint8_t> predict(const TrainedModel& m, const Matrix& rows) {
    if (rows.rows() > 0 && rows.cols() != m.n_features()) {
        throw ValidationError("feature arity mismatch: model expects " + std::to_string(m.n_features()) + ", got " +
                              std::to_string(rows.cols()));
    }
    return std::visit([&](const auto& impl) { return impl.predict(rows); }, m.impl());
}

} // namespace fairpilot

#endif
