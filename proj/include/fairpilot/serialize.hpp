#ifndef FAIRPILOT_SERIALIZE_HPP
#define FAIRPILOT_SERIALIZE_HPP

#include "fairpilot/error.hpp"
#include "fairpilot/grid.hpp"
#include "fairpilot/metrics.hpp"
#include "fairpilot/models.hpp"
#include "fairpilot/pareto.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fairpilot {

using Json = nlohmann::ordered_json;

/// Everything a finished exploration produced, minus run metadata.
struct ExplorationResult {
    std::string id;
    std::vector<MetricId> metrics;
    std::vector<ModelFamily> families;
    std::vector<std::size_t> grid_sizes; // parallel to families
    std::size_t n_splits = 0;
    Dominance mode = Dominance::weak;
    AccuracyObjective accuracy_objective = AccuracyObjective::accuracy;
    std::vector<EvaluationRecord> records;
};

inline Json param_to_json(const ParamValue& v) {
    return std::visit([](const auto& x) { return Json(x); }, v);
}

inline ParamValue param_from_json(const Json& j) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    if (j.is_null()) return std::string("none");
    throw ParseError("unsupported hyperparameter value " + j.dump());
}

inline Json to_json(const Assignment& a) {
    Json j = Json::object();
    for (const auto& [k, v] : a.values) {
        j[k] = param_to_json(v);
    }
    return j;
}

namespace detail {

inline Json stat_json(const Stat& s) { return Json{{"mean", s.mean}, {"variance", s.variance}}; }

inline Stat stat_from(const Json& j) { return {j.at("mean").get<double>(), j.at("variance").get<double>()}; }

inline Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

} // namespace detail

inline Json to_json(const EvaluationRecord& r) {
    Json j;
    j["family"] = to_string(r.family());
    j["assignment"] = to_json(r.assignment);
    j["usable"] = r.usable;
    j["n_splits"] = r.n_splits;
    j["failed_splits"] = r.failed_splits;
    j["failure"] = r.failure;
    j["accuracy"] = detail::stat_json(r.accuracy);
    j["balanced_accuracy"] = detail::stat_json(r.balanced_accuracy);
    Json metrics = Json::object();
    for (const auto& m : r.metrics) {
        metrics[to_string(m.id)] = Json{{"defined", m.defined},
                                        {"undefined_splits", m.undefined_splits},
                                        {"gap", detail::stat_json(m.gap)},
                                        {"score", detail::stat_json(m.score)}};
    }
    j["metrics"] = std::move(metrics);
    Json rates = Json::object();
    for (std::size_t g = 0; g < 2; ++g) {
        Json gr = Json::object();
        for (std::size_t k = 0; k < kRateNames.size(); ++k) {
            gr[kRateNames[k]] = detail::optional_json(r.rates[g][k]);
        }
        rates["group" + std::to_string(g)] = std::move(gr);
    }
    j["group_rates"] = std::move(rates);
    return j;
}

inline EvaluationRecord record_from_json(const Json& j) {
    EvaluationRecord r;
    const auto fam = parse_family(j.at("family").get<std::string>());
    if (!fam) {
        throw ParseError("unknown family in record");
    }
    r.assignment.family = *fam;
    for (const auto& [k, v] : j.at("assignment").items()) {
        r.assignment.values.emplace_back(k, param_from_json(v));
    }
    r.usable = j.at("usable").get<bool>();
    r.n_splits = j.at("n_splits").get<std::size_t>();
    r.failed_splits = j.at("failed_splits").get<std::vector<std::size_t>>();
    r.failure = j.at("failure").get<std::string>();
    r.accuracy = detail::stat_from(j.at("accuracy"));
    r.balanced_accuracy = detail::stat_from(j.at("balanced_accuracy"));
    for (const auto& [k, v] : j.at("metrics").items()) {
        const auto id = parse_metric(k);
        if (!id) {
            throw ParseError("unknown metric '" + k + "' in record");
        }
        r.metrics.push_back({*id, v.at("defined").get<bool>(), v.at("undefined_splits").get<std::size_t>(),
                             detail::stat_from(v.at("gap")), detail::stat_from(v.at("score"))});
    }
    const auto& rates = j.at("group_rates");
    for (std::size_t g = 0; g < 2; ++g) {
        const auto& gr = rates.at("group" + std::to_string(g));
        for (std::size_t k = 0; k < kRateNames.size(); ++k) {
            const auto& v = gr.at(kRateNames[k]);
            if (!v.is_null()) {
                r.rates[g][k] = v.get<double>();
            }
        }
    }
    return r;
}

/// The persisted records document. Contains no run id or timestamps so
/// identical configurations produce identical bytes.
inline Json to_json(const ExplorationResult& res) {
    Json j;
    j["metrics"] = Json::array();
    for (auto m : res.metrics) {
        j["metrics"].push_back(to_string(m));
    }
    j["accuracy_objective"] = to_string(res.accuracy_objective);
    j["mode"] = to_string(res.mode);
    j["n_splits"] = res.n_splits;
    j["families"] = Json::array();
    for (std::size_t i = 0; i < res.families.size(); ++i) {
        j["families"].push_back(Json{{"family", to_string(res.families[i])}, {"grid_size", res.grid_sizes[i]}});
    }
    j["records"] = Json::array();
    for (const auto& r : res.records) {
        j["records"].push_back(to_json(r));
    }
    return j;
}

inline ExplorationResult result_from_json(const Json& j, std::string id = {}) {
    ExplorationResult res;
    res.id = std::move(id);
    for (const auto& m : j.at("metrics")) {
        const auto id_ = parse_metric(m.get<std::string>());
        if (!id_) {
            throw ParseError("unknown metric " + m.dump());
        }
        res.metrics.push_back(*id_);
    }
    res.accuracy_objective =
        parse_accuracy_objective(j.at("accuracy_objective").get<std::string>()).value_or(AccuracyObjective::accuracy);
    res.mode = parse_dominance(j.at("mode").get<std::string>()).value_or(Dominance::weak);
    res.n_splits = j.at("n_splits").get<std::size_t>();
    for (const auto& f : j.at("families")) {
        const auto fam = parse_family(f.at("family").get<std::string>());
        if (!fam) {
            throw ParseError("unknown family " + f.dump());
        }
        res.families.push_back(*fam);
        res.grid_sizes.push_back(f.at("grid_size").get<std::size_t>());
    }
    for (const auto& r : j.at("records")) {
        res.records.push_back(record_from_json(r));
    }
    return res;
}

inline std::string records_document(const ExplorationResult& res) { return to_json(res).dump(2) + "\n"; }

inline Json to_json(const ParetoSet& ps, std::span<const EvaluationRecord> records) {
    Json j;
    j["source"] = ps.source;
    j["x_objective"] = to_string(ps.pair.accuracy);
    j["y_objective"] = to_string(ps.pair.fairness);
    j["y_value"] = "score";
    j["mode"] = to_string(ps.mode);
    j["grouping"] = to_string(ps.grouping);
    j["family"] = ps.family ? Json(to_string(*ps.family)) : Json(nullptr);
    j["excluded"] = ps.excluded;
    j["members"] = Json::array();
    for (auto i : ps.members) {
        j["members"].push_back(to_json(records[i]));
    }
    return j;
}

} // namespace fairpilot

#endif
