#ifndef FAIRPILOT_CONFIG_HPP
#define FAIRPILOT_CONFIG_HPP

#include "fairpilot/data.hpp"
#include "fairpilot/error.hpp"
#include "fairpilot/grid.hpp"
#include "fairpilot/pareto.hpp"
#include "fairpilot/serialize.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fairpilot {

/// The exploration document shared by the CLI (`--config`) and the
/// service (`POST /explorations`). The CLI uses `data`, the service
/// `dataset_id`; every other field means the same in both.
struct ExplorationConfig {
    std::string data;
    std::string dataset_id;
    std::optional<PreprocessConfig> preprocess;
    std::optional<TaskEncoding> task;
    std::vector<HyperparamSpace> spaces; // one per selected family, in request order
    std::vector<MetricId> metrics{kDefaultMetrics.begin(), kDefaultMetrics.end()};
    std::size_t n_splits = 10;
    double test_fraction = 0.3;
    bool stratified = true;
    std::uint64_t seed = 0;
    Dominance mode = Dominance::weak;
    AccuracyObjective accuracy_objective = AccuracyObjective::accuracy;
    std::size_t workers = 1;
    std::size_t max_grid_size = kDefaultGridCap;
    ModelOptions model_options;

    SplitPlan split_plan() const { return {n_splits, test_fraction, stratified, seed}; }
};

struct FamilyViolation {
    ModelFamily family;
    Violation violation;
};

/// Infeasible hyperparameter ranges; carries every violation found.
class SpaceValidationError : public ValidationError {
public:
    explicit SpaceValidationError(std::vector<FamilyViolation> v)
        : ValidationError(summary(v)), violations_(std::move(v)) {}

    const std::vector<FamilyViolation>& violations() const noexcept { return violations_; }

private:
    static std::string summary(const std::vector<FamilyViolation>& v) {
        std::string s = "invalid hyperparameter space:";
        for (const auto& fv : v) {
            s += std::string(" [") + to_string(fv.family) + "] " + fv.violation.param;
            if (!fv.violation.value.empty()) {
                s += "=" + fv.violation.value;
            }
            s += ": " + fv.violation.message + ";";
        }
        return s;
    }

    std::vector<FamilyViolation> violations_;
};

inline Json to_json(const FamilyViolation& fv) {
    return Json{{"family", to_string(fv.family)},
                {"param", fv.violation.param},
                {"value", fv.violation.value},
                {"message", fv.violation.message}};
}

/// Coerces JSON-decoded values to the representation each hyperparameter
/// uses: C as double, min-sample counts as integers when integral.
inline void normalize_space(HyperparamSpace& s) {
    for (auto& p : s.params) {
        for (auto& v : p.values) {
            if (p.name == "C" && std::holds_alternative<std::int64_t>(v)) {
                v = static_cast<double>(std::get<std::int64_t>(v));
            } else if ((p.name == "min_samples_split" || p.name == "min_samples_leaf") &&
                       std::holds_alternative<double>(v)) {
                const double d = std::get<double>(v);
                if (d == std::floor(d) && std::abs(d) < 1e15) {
                    v = static_cast<std::int64_t>(d);
                }
            }
        }
    }
}

namespace detail {

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ValidationError(std::string("config field '") + key + "' has the wrong type");
    }
}

inline std::vector<std::string> string_list(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return {};
    }
    std::vector<std::string> out;
    const auto& v = j.at(key);
    if (!v.is_array()) {
        throw ValidationError(std::string("config field '") + key + "' must be an array");
    }
    for (const auto& e : v) {
        // Numeric codes like -9 may be given unquoted.
        out.push_back(e.is_string() ? e.get<std::string>() : e.dump());
    }
    return out;
}

} // namespace detail

inline PreprocessConfig preprocess_from_json(const Json& j) {
    PreprocessConfig c;
    c.missing_codes = detail::string_list(j, "missing_codes");
    c.row_missing_threshold = detail::get_or(j, "row_missing_threshold", 0.75);
    const auto impute = detail::get_or<std::string>(j, "impute", "none");
    if (impute == "none") c.impute = Impute::none;
    else if (impute == "mean") c.impute = Impute::mean;
    else if (impute == "median") c.impute = Impute::median;
    else throw ValidationError("impute must be none, mean or median");
    const auto std_ = detail::get_or<std::string>(j, "standardize", "none");
    if (std_ == "none") c.standardize = Standardize::none;
    else if (std_ == "zscore") c.standardize = Standardize::zscore;
    else throw ValidationError("standardize must be none or zscore");
    if (!(c.row_missing_threshold >= 0.0 && c.row_missing_threshold <= 1.0)) {
        throw ValidationError("row_missing_threshold must be in [0, 1]");
    }
    return c;
}

inline Json to_json(const PreprocessConfig& c) {
    const char* impute = c.impute == Impute::none ? "none" : c.impute == Impute::mean ? "mean" : "median";
    return Json{{"missing_codes", c.missing_codes},
                {"row_missing_threshold", c.row_missing_threshold},
                {"impute", impute},
                {"standardize", c.standardize == Standardize::zscore ? "zscore" : "none"}};
}

inline TaskEncoding task_from_json(const Json& j) {
    TaskEncoding t;
    t.target = detail::get_or<std::string>(j, "target", "");
    t.sensitive = detail::get_or<std::string>(j, "sensitive", "");
    t.positive_values = detail::string_list(j, "positive");
    t.group0_values = detail::string_list(j, "group0");
    t.negative_values = detail::string_list(j, "negative");
    t.group1_values = detail::string_list(j, "group1");
    if (t.target.empty()) {
        throw ValidationError("task.target is required");
    }
    if (t.sensitive.empty()) {
        throw ValidationError("task.sensitive is required");
    }
    return t;
}

inline Json to_json(const TaskEncoding& t) {
    Json j{{"target", t.target}, {"positive", t.positive_values}, {"sensitive", t.sensitive}, {"group0", t.group0_values}};
    if (!t.negative_values.empty()) {
        j["negative"] = t.negative_values;
    }
    if (!t.group1_values.empty()) {
        j["group1"] = t.group1_values;
    }
    return j;
}

inline Json to_json(const HyperparamSpace& s) {
    Json j = Json::object();
    for (const auto& p : s.params) {
        Json arr = Json::array();
        for (const auto& v : p.values) {
            arr.push_back(param_to_json(v));
        }
        j[p.name] = std::move(arr);
    }
    return j;
}

/// Parses a config document. Spaces given under `spaces.<family>` replace
/// the default range of each listed hyperparameter; unlisted ones keep
/// their defaults. Throws SpaceValidationError listing every violation.
inline ExplorationConfig config_from_json(const Json& j) {
    if (!j.is_object()) {
        throw ValidationError("config must be a JSON object");
    }
    ExplorationConfig c;
    c.data = detail::get_or<std::string>(j, "data", "");
    c.dataset_id = detail::get_or<std::string>(j, "dataset_id", "");
    if (j.contains("preprocess") && !j["preprocess"].is_null()) {
        c.preprocess = preprocess_from_json(j["preprocess"]);
    }
    if (j.contains("task") && !j["task"].is_null()) {
        c.task = task_from_json(j["task"]);
    }

    std::vector<ModelFamily> families;
    if (j.contains("models") && !j["models"].is_null()) {
        for (const auto& m : detail::string_list(j, "models")) {
            const auto f = parse_family(m);
            if (!f) {
                throw ValidationError("unknown model '" + m + "'");
            }
            if (std::find(families.begin(), families.end(), *f) == families.end()) {
                families.push_back(*f);
            }
        }
    } else {
        families.assign(kAllFamilies.begin(), kAllFamilies.end());
    }
    if (families.empty()) {
        throw ValidationError("no models selected");
    }

    const Json spaces = j.contains("spaces") && j["spaces"].is_object() ? j["spaces"] : Json::object();
    for (const auto& [key, _] : spaces.items()) {
        const auto f = parse_family(key);
        if (!f || std::find(families.begin(), families.end(), *f) == families.end()) {
            throw ValidationError("spaces given for '" + key + "', which is not a selected model");
        }
    }
    std::vector<FamilyViolation> violations;
    for (auto f : families) {
        auto space = default_space(f);
        const Json* user = nullptr;
        for (const auto& [key, val] : spaces.items()) {
            if (parse_family(key) == f) {
                user = &val;
            }
        }
        if (user) {
            if (!user->is_object()) {
                throw ValidationError(std::string("spaces.") + to_string(f) + " must be an object");
            }
            for (const auto& [name, vals] : user->items()) {
                std::vector<ParamValue> values;
                if (vals.is_array()) {
                    for (const auto& v : vals) {
                        values.push_back(param_from_json(v));
                    }
                } else {
                    values.push_back(param_from_json(vals));
                }
                if (auto* p = space.find(name)) {
                    p->values = std::move(values);
                } else {
                    space.params.push_back({name, std::move(values)});
                }
            }
        }
        normalize_space(space);
        for (auto& v : validate_space(space)) {
            violations.push_back({f, std::move(v)});
        }
        c.spaces.push_back(std::move(space));
    }
    if (!violations.empty()) {
        throw SpaceValidationError(std::move(violations));
    }

    if (j.contains("metrics") && !j["metrics"].is_null()) {
        c.metrics.clear();
        for (const auto& m : detail::string_list(j, "metrics")) {
            const auto id = parse_metric(m);
            if (!id) {
                throw ValidationError("unknown metric '" + m + "'");
            }
            if (std::find(c.metrics.begin(), c.metrics.end(), *id) == c.metrics.end()) {
                c.metrics.push_back(*id);
            }
        }
        if (c.metrics.empty()) {
            throw ValidationError("no metrics selected");
        }
    }

    if (j.contains("splits") && j["splits"].is_object()) {
        const auto& s = j["splits"];
        const auto n = detail::get_or<std::int64_t>(s, "n_splits", 10);
        if (n < 1) {
            throw ValidationError("splits.n_splits must be >= 1");
        }
        c.n_splits = static_cast<std::size_t>(n);
        c.test_fraction = detail::get_or(s, "test_fraction", 0.3);
        c.stratified = detail::get_or(s, "stratified", true);
        if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) {
            throw ValidationError("splits.test_fraction must be in (0, 1)");
        }
    }
    c.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
    const auto mode = detail::get_or<std::string>(j, "mode", "weak");
    if (const auto m = parse_dominance(mode)) {
        c.mode = *m;
    } else {
        throw ValidationError("mode must be weak or strict");
    }
    const auto acc = detail::get_or<std::string>(j, "accuracy_objective", "accuracy");
    if (const auto a = parse_accuracy_objective(acc)) {
        c.accuracy_objective = *a;
    } else {
        throw ValidationError("accuracy_objective must be accuracy or balanced_accuracy");
    }
    c.workers = detail::get_or<std::size_t>(j, "workers", 1);
    c.max_grid_size = detail::get_or<std::size_t>(j, "max_grid_size", kDefaultGridCap);
    if (j.contains("model_options") && j["model_options"].is_object()) {
        const auto& mo = j["model_options"];
        c.model_options.rf_trees = detail::get_or<std::size_t>(mo, "rf_trees", 100);
        c.model_options.lr_max_iter = detail::get_or<std::size_t>(mo, "lr_max_iter", 1000);
        c.model_options.lr_tol = detail::get_or(mo, "lr_tol", 1e-6);
        c.model_options.svc_epochs = detail::get_or<std::size_t>(mo, "svc_epochs", 10);
        if (c.model_options.rf_trees < 1) {
            throw ValidationError("model_options.rf_trees must be >= 1");
        }
    }
    return c;
}

inline ExplorationConfig parse_config(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

inline Json to_json(const ExplorationConfig& c) {
    Json j;
    if (!c.data.empty()) {
        j["data"] = c.data;
    }
    if (!c.dataset_id.empty()) {
        j["dataset_id"] = c.dataset_id;
    }
    if (c.preprocess) {
        j["preprocess"] = to_json(*c.preprocess);
    }
    if (c.task) {
        j["task"] = to_json(*c.task);
    }
    j["models"] = Json::array();
    Json spaces = Json::object();
    for (const auto& s : c.spaces) {
        j["models"].push_back(to_string(s.family));
        spaces[to_string(s.family)] = to_json(s);
    }
    j["spaces"] = std::move(spaces);
    j["metrics"] = Json::array();
    for (auto m : c.metrics) {
        j["metrics"].push_back(to_string(m));
    }
    j["splits"] = Json{{"n_splits", c.n_splits}, {"test_fraction", c.test_fraction}, {"stratified", c.stratified}};
    j["seed"] = c.seed;
    j["mode"] = to_string(c.mode);
    j["accuracy_objective"] = to_string(c.accuracy_objective);
    j["workers"] = c.workers;
    j["max_grid_size"] = c.max_grid_size;
    j["model_options"] = Json{{"rf_trees", c.model_options.rf_trees},
                              {"lr_max_iter", c.model_options.lr_max_iter},
                              {"lr_tol", c.model_options.lr_tol},
                              {"svc_epochs", c.model_options.svc_epochs}};
    return j;
}

} // namespace fairpilot

#endif
