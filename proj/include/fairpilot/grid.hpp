#ifndef FAIRPILOT_GRID_HPP
#define FAIRPILOT_GRID_HPP

#include "fairpilot/data.hpp"
#include "fairpilot/error.hpp"
#include "fairpilot/metrics.hpp"
#include "fairpilot/models.hpp"
#include "fairpilot/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace fairpilot {

struct ParamRange {
    std::string name;
    std::vector<ParamValue> values;
};

/// Discrete search space of one model family.
struct HyperparamSpace {
    ModelFamily family = ModelFamily::decision_tree;
    std::vector<ParamRange> params;

    ParamRange* find(std::string_view name) {
        for (auto& p : params) {
            if (p.name == name) {
                return &p;
            }
        }
        return nullptr;
    }
    const ParamRange* find(std::string_view name) const { return const_cast<HyperparamSpace*>(this)->find(name); }
};

inline std::vector<std::string> family_param_names(ModelFamily f) {
    switch (f) {
    case ModelFamily::decision_tree:
        return {"criterion", "max_features", "min_samples_split", "min_samples_leaf", "class_weight"};
    case ModelFamily::random_forest:
        return {"criterion", "max_features", "min_samples_split", "min_samples_leaf", "class_weight", "bootstrap"};
    case ModelFamily::logistic_regression:
        return {"C", "penalty"};
    case ModelFamily::svc:
        return {"C", "kernel"};
    }
    return {};
}

inline HyperparamSpace default_space(ModelFamily f) {
    using S = std::string;
    auto ints = [](std::initializer_list<std::int64_t> v) { return std::vector<ParamValue>(v.begin(), v.end()); };
    const std::vector<ParamValue> c_values{0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0};

    HyperparamSpace s{f, {}};
    switch (f) {
    case ModelFamily::decision_tree:
    case ModelFamily::random_forest:
        s.params = {
            {"criterion", {S("gini"), S("entropy")}},
            {"max_features", {S("none"), S("sqrt"), S("log2")}},
            {"min_samples_split", ints({2, 4, 8, 12, 16, 20})},
            {"min_samples_leaf", ints({1, 4, 8, 12, 16, 20})},
            {"class_weight", {S("none"), S("balanced")}},
        };
        if (f == ModelFamily::random_forest) {
            s.params.push_back({"bootstrap", {false, true}});
        }
        break;
    case ModelFamily::logistic_regression:
        s.params = {{"C", c_values}, {"penalty", {S("l2"), S("none")}}};
        break;
    case ModelFamily::svc:
        s.params = {{"C", c_values}, {"kernel", {S("linear"), S("poly"), S("rbf"), S("sigmoid")}}};
        break;
    }
    return s;
}

/// A feasibility problem with a user-supplied range.
struct Violation {
    std::string param;
    std::string value;
    std::string message;
};

namespace detail {

enum class ParamKind { level, positive_int, positive_real, boolean };

struct ParamRule {
    ParamKind kind;
    std::vector<std::string> levels;
};

inline ParamRule rule_for(std::string_view name) {
    if (name == "criterion") return {ParamKind::level, {"gini", "entropy"}};
    if (name == "max_features") return {ParamKind::level, {"none", "sqrt", "log2"}};
    if (name == "class_weight") return {ParamKind::level, {"none", "balanced"}};
    if (name == "penalty") return {ParamKind::level, {"l2", "none"}};
    if (name == "kernel") return {ParamKind::level, {"linear", "poly", "rbf", "sigmoid"}};
    if (name == "min_samples_split" || name == "min_samples_leaf") return {ParamKind::positive_int, {}};
    if (name == "C") return {ParamKind::positive_real, {}};
    return {ParamKind::boolean, {}};
}

inline std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? ", " : "") + v[i];
    }
    return out;
}

} // namespace detail

/// Checks a space against its family's constraints. An empty result means
/// the space is feasible.
inline std::vector<Violation> validate_space(const HyperparamSpace& s) {
    std::vector<Violation> out;
    const auto names = family_param_names(s.family);
    std::set<std::string> present;
    for (const auto& p : s.params) {
        if (std::find(names.begin(), names.end(), p.name) == names.end()) {
            out.push_back({p.name, "", "unknown hyperparameter for " + std::string(to_string(s.family))});
            continue;
        }
        if (!present.insert(p.name).second) {
            out.push_back({p.name, "", "hyperparameter listed more than once"});
            continue;
        }
        if (p.values.empty()) {
            out.push_back({p.name, "", "empty range"});
            continue;
        }
        const auto rule = detail::rule_for(p.name);
        std::vector<std::string> seen;
        for (const auto& v : p.values) {
            const auto text = to_string(v);
            switch (rule.kind) {
            case detail::ParamKind::level:
                if (!std::holds_alternative<std::string>(v) ||
                    std::find(rule.levels.begin(), rule.levels.end(), text) == rule.levels.end()) {
                    out.push_back({p.name, text, "unknown value '" + text + "'; allowed: " + detail::join(rule.levels)});
                }
                break;
            case detail::ParamKind::positive_int: {
                const bool integral = std::holds_alternative<std::int64_t>(v) ||
                                      (std::holds_alternative<double>(v) &&
                                       std::get<double>(v) == std::floor(std::get<double>(v)));
                if (!integral) {
                    out.push_back({p.name, text, p.name + " must be an integer"});
                } else {
                    const double d = std::holds_alternative<std::int64_t>(v)
                                         ? static_cast<double>(std::get<std::int64_t>(v))
                                         : std::get<double>(v);
                    if (d < 1) {
                        out.push_back({p.name, text, p.name + " must be >= 1"});
                    }
                }
                break;
            }
            case detail::ParamKind::positive_real: {
                const bool numeric = std::holds_alternative<double>(v) || std::holds_alternative<std::int64_t>(v);
                const double d = std::holds_alternative<double>(v) ? std::get<double>(v)
                                 : numeric ? static_cast<double>(std::get<std::int64_t>(v))
                                           : 0.0;
                if (!numeric) {
                    out.push_back({p.name, text, p.name + " must be a number"});
                } else if (!(d > 0.0) || !std::isfinite(d)) {
                    out.push_back({p.name, text, p.name + " must be > 0"});
                }
                break;
            }
            case detail::ParamKind::boolean:
                if (!std::holds_alternative<bool>(v)) {
                    out.push_back({p.name, text, p.name + " must be true or false"});
                }
                break;
            }
            if (std::find(seen.begin(), seen.end(), text) != seen.end()) {
                out.push_back({p.name, text, "duplicate value"});
            }
            seen.push_back(text);
        }
    }
    for (const auto& n : names) {
        if (!present.count(n)) {
            out.push_back({n, "", "missing hyperparameter"});
        }
    }
    return out;
}

inline double grid_size(const HyperparamSpace& s) {
    double n = 1.0;
    for (const auto& p : s.params) {
        n *= static_cast<double>(p.values.size());
    }
    return n;
}

inline constexpr std::size_t kDefaultGridCap = 1'000'000;

/// Full factorial in lexicographic order: the first hyperparameter varies
/// slowest, values follow list order.
inline std::vector<Assignment> expand(const HyperparamSpace& s, std::size_t cap = kDefaultGridCap) {
    const double size = grid_size(s);
    if (size > static_cast<double>(cap)) {
        throw ValidationError(std::string(to_string(s.family)) + " grid has " + detail::format_number(size) +
                              " points, above the cap of " + std::to_string(cap) + "; reduce the hyperparameter ranges");
    }
    std::vector<Assignment> out;
    if (size == 0.0) {
        return out;
    }
    out.reserve(static_cast<std::size_t>(size));
    std::vector<std::size_t> pos(s.params.size(), 0);
    while (true) {
        Assignment a{s.family, {}};
        for (std::size_t k = 0; k < s.params.size(); ++k) {
            a.values.emplace_back(s.params[k].name, s.params[k].values[pos[k]]);
        }
        out.push_back(std::move(a));
        std::size_t k = s.params.size();
        while (k > 0) {
            --k;
            if (++pos[k] < s.params[k].values.size()) {
                break;
            }
            pos[k] = 0;
            if (k == 0) {
                return out;
            }
        }
        if (s.params.empty()) {
            return out;
        }
    }
}

/// Completed-task counter shared between grid workers and observers.
class ProgressCounter {
public:
    void add_total(std::size_t n) noexcept { total_.fetch_add(n, std::memory_order_relaxed); }
    void tick() noexcept { completed_.fetch_add(1, std::memory_order_relaxed); }

    std::size_t completed() const noexcept { return completed_.load(std::memory_order_relaxed); }
    std::size_t total() const noexcept { return total_.load(std::memory_order_relaxed); }

    double fraction() const noexcept {
        const auto t = total();
        return t == 0 ? 0.0 : std::min(1.0, static_cast<double>(completed()) / static_cast<double>(t));
    }

private:
    std::atomic<std::size_t> completed_{0};
    std::atomic<std::size_t> total_{0};
};

struct Stat {
    double mean = 0.0;
    double variance = 0.0;
};

struct MetricSummary {
    MetricId id;
    bool defined = true;
    std::size_t undefined_splits = 0;
    Stat gap;
    Stat score;
};

inline constexpr std::array<const char*, 5> kRateNames{"selection_rate", "tpr", "fpr", "ppv", "accuracy"};

/// Mean and population variance of every objective for one assignment
/// across the splits that trained successfully.
struct EvaluationRecord {
    Assignment assignment;
    std::size_t n_splits = 0;
    std::vector<std::size_t> failed_splits;
    std::string failure;
    bool usable = true;
    Stat accuracy;
    Stat balanced_accuracy;
    std::vector<MetricSummary> metrics;
    // [group][rate] means over splits where the rate is defined.
    std::array<std::array<std::optional<double>, 5>, 2> rates{};

    ModelFamily family() const noexcept { return assignment.family; }

    const MetricSummary* metric(MetricId id) const {
        for (const auto& m : metrics) {
            if (m.id == id) {
                return &m;
            }
        }
        return nullptr;
    }
};

struct GridOptions {
    std::size_t workers = 1; // 0 = hardware concurrency
    ProgressCounter* progress = nullptr;
    // When false the caller has already added this run's tasks to the
    // counter total (multi-family runs keep the fraction monotone that way).
    bool count_total = true;
    ModelOptions models;
    std::size_t max_grid_size = kDefaultGridCap;
    // Called after every successful training; may be invoked concurrently.
    std::function<void(const TrainedModel&)> on_model;
};

namespace detail {

inline Stat summarize(std::span<const double> xs) {
    Stat s;
    if (xs.empty()) {
        return s;
    }
    s.mean = mean_of(xs);
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - s.mean) * (x - s.mean);
    }
    s.variance = ss / static_cast<double>(xs.size());
    return s;
}

struct SplitData {
    Matrix train_x;
    std::vector<std::uint8_t> train_y;
    Matrix test_x;
    std::vector<std::uint8_t> test_y;
    std::vector<std::uint8_t> test_s;
};

inline std::vector<std::uint8_t> gather(std::span<const std::uint8_t> v, std::span<const std::size_t> idx) {
    std::vector<std::uint8_t> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out[i] = v[idx[i]];
    }
    return out;
}

inline std::array<std::optional<double>, 5> rate_array(const GroupRates& r) {
    return {r.selection, r.tpr, r.fpr, r.ppv, r.accuracy};
}

inline EvaluationRecord aggregate(const Assignment& a, std::span<const MetricId> metrics,
                                  std::span<const std::optional<MetricVector>> per_split,
                                  std::span<const std::string> errors) {
    EvaluationRecord rec;
    rec.assignment = a;
    std::vector<double> acc, bacc;
    for (std::size_t s = 0; s < per_split.size(); ++s) {
        if (!per_split[s]) {
            rec.failed_splits.push_back(s);
            if (rec.failure.empty()) {
                rec.failure = errors[s];
            }
            continue;
        }
        acc.push_back(per_split[s]->accuracy);
        bacc.push_back(per_split[s]->balanced_accuracy);
    }
    rec.n_splits = acc.size();
    rec.usable = rec.n_splits > 0;
    rec.accuracy = summarize(acc);
    rec.balanced_accuracy = summarize(bacc);

    for (std::size_t m = 0; m < metrics.size(); ++m) {
        MetricSummary ms;
        ms.id = metrics[m];
        std::vector<double> gaps, scores;
        for (const auto& v : per_split) {
            if (!v) {
                continue;
            }
            const auto& gap = v->metrics[m].gap;
            if (gap) {
                gaps.push_back(*gap);
                scores.push_back(1.0 - *gap);
            } else {
                ++ms.undefined_splits;
            }
        }
        ms.defined = rec.usable && ms.undefined_splits == 0;
        ms.gap = summarize(gaps);
        ms.score = summarize(scores);
        rec.metrics.push_back(ms);
    }

    for (int g = 0; g < 2; ++g) {
        for (std::size_t k = 0; k < kRateNames.size(); ++k) {
            std::vector<double> xs;
            for (const auto& v : per_split) {
                if (v) {
                    if (const auto r = rate_array(v->rates[static_cast<std::size_t>(g)])[k]) {
                        xs.push_back(*r);
                    }
                }
            }
            if (!xs.empty()) {
                rec.rates[static_cast<std::size_t>(g)][k] = mean_of(xs);
            }
        }
    }
    return rec;
}

} // namespace detail

/// Seed of one (family, assignment, split) task. Independent of worker
/// scheduling, so serial and parallel runs agree bit for bit.
inline std::uint64_t task_seed(std::uint64_t seed, ModelFamily f, std::size_t assignment, std::size_t split) {
    return derive_seed(seed, {static_cast<std::uint64_t>(f), assignment, split});
}

/// Trains and evaluates every assignment of `space` on every split and
/// returns one record per assignment, in expand order.
inline std::vector<EvaluationRecord> run_grid(const Dataset& d, const HyperparamSpace& space,
                                              std::span<const Split> splits, std::span<const MetricId> metrics,
                                              std::uint64_t seed, const GridOptions& opt = {}) {
    if (const auto v = validate_space(space); !v.empty()) {
        throw ValidationError(v.front().param + ": " + v.front().message);
    }
    const auto assignments = expand(space, opt.max_grid_size);
    const std::size_t n_splits = splits.size();

    std::vector<detail::SplitData> data;
    data.reserve(n_splits);
    for (const auto& sp : splits) {
        data.push_back({d.features.select_rows(sp.train), detail::gather(d.target, sp.train),
                        d.features.select_rows(sp.test), detail::gather(d.target, sp.test),
                        detail::gather(d.sensitive, sp.test)});
    }

    const std::size_t n_tasks = assignments.size() * n_splits;
    if (opt.progress && opt.count_total) {
        opt.progress->add_total(n_tasks);
    }
    std::vector<std::optional<MetricVector>> results(n_tasks);
    std::vector<std::string> errors(n_tasks);
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1, std::memory_order_relaxed);
            if (t >= n_tasks) {
                return;
            }
            const std::size_t a = t / n_splits, s = t % n_splits;
            const auto& sd = data[s];
            try {
                const auto model = train(sd.train_x, sd.train_y, assignments[a], task_seed(seed, space.family, a, s),
                                         opt.models);
                if (opt.on_model) {
                    opt.on_model(model);
                }
                const auto pred = predict(model, sd.test_x);
                results[t] = evaluate_predictions(sd.test_y, pred, sd.test_s, metrics);
            } catch (const std::exception& e) {
                errors[t] = "split " + std::to_string(s) + ": " + e.what();
            }
            if (opt.progress) {
                opt.progress->tick();
            }
        }
    };

    std::size_t workers = opt.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opt.workers;
    workers = std::min(workers, std::max<std::size_t>(1, n_tasks));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
    }

    std::vector<EvaluationRecord> out;
    out.reserve(assignments.size());
    for (std::size_t a = 0; a < assignments.size(); ++a) {
        const auto first = static_cast<std::ptrdiff_t>(a * n_splits);
        out.push_back(detail::aggregate(
            assignments[a], metrics,
            std::span<const std::optional<MetricVector>>(results.data() + first, n_splits),
            std::span<const std::string>(errors.data() + first, n_splits)));
    }
    return out;
}

inline std::vector<EvaluationRecord> run_grid(const Dataset& d, const HyperparamSpace& space, const SplitPlan& plan,
                                              std::span<const MetricId> metrics, std::uint64_t seed,
                                              const GridOptions& opt = {}) {
    const auto splits = make_splits(d, plan);
    return run_grid(d, space, splits, metrics, seed, opt);
}

} // namespace fairpilot

#endif
