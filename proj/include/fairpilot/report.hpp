#ifndef FAIRPILOT_REPORT_HPP
#define FAIRPILOT_REPORT_HPP

#include "fairpilot/error.hpp"
#include "fairpilot/grid.hpp"
#include "fairpilot/pareto.hpp"
#include "fairpilot/serialize.hpp"

#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fairpilot {

/// Pareto data frame: one row per frontier member in ascending accuracy.
///
/// Column order: accuracy objective, one `<metric>_score` column per
/// computed metric, the hyperparameters (the family's own for per-family
/// sets; the union in canonical family order otherwise), then `family`.
struct ParetoTable {
    using Cell = std::variant<std::monostate, double, std::string>;

    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

namespace detail {

inline std::vector<std::string> table_params(const ParetoSet& ps, std::span<const ModelFamily> families) {
    if (ps.family) {
        return family_param_names(*ps.family);
    }
    std::vector<std::string> out;
    for (auto f : kAllFamilies) {
        if (std::find(families.begin(), families.end(), f) == families.end()) {
            continue;
        }
        for (auto& n : family_param_names(f)) {
            if (std::find(out.begin(), out.end(), n) == out.end()) {
                out.push_back(std::move(n));
            }
        }
    }
    return out;
}

inline std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    std::string s(buf);
    // Avoid "-0.000000".
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') {
        s.erase(0, 1);
    }
    return s;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

inline std::string cell_text(const ParetoTable::Cell& c, int decimals) {
    if (std::holds_alternative<double>(c)) {
        return fixed(std::get<double>(c), decimals);
    }
    if (std::holds_alternative<std::string>(c)) {
        return std::get<std::string>(c);
    }
    return "";
}

} // namespace detail

inline ParetoTable pareto_table(const ParetoSet& ps, std::span<const EvaluationRecord> records,
                                std::span<const MetricId> metrics, std::span<const ModelFamily> families) {
    ParetoTable t;
    t.columns.push_back(to_string(ps.pair.accuracy));
    for (auto m : metrics) {
        t.columns.push_back(std::string(to_string(m)) + "_score");
    }
    const auto params = detail::table_params(ps, families);
    t.columns.insert(t.columns.end(), params.begin(), params.end());
    t.columns.push_back("family");

    for (auto i : ps.members) {
        const auto& r = records[i];
        std::vector<ParetoTable::Cell> row;
        row.emplace_back(ps.pair.accuracy == AccuracyObjective::accuracy ? r.accuracy.mean : r.balanced_accuracy.mean);
        for (auto m : metrics) {
            const auto* ms = r.metric(m);
            if (ms && ms->defined) {
                row.emplace_back(ms->score.mean);
            } else {
                row.emplace_back(std::monostate{});
            }
        }
        for (const auto& p : params) {
            if (const auto* v = r.assignment.get(p)) {
                row.emplace_back(to_string(*v));
            } else {
                row.emplace_back(std::monostate{});
            }
        }
        row.emplace_back(std::string(to_string(r.family())));
        t.rows.push_back(std::move(row));
    }
    return t;
}

/// RFC-4180 CSV with six-decimal numbers and CRLF-free line endings.
inline std::string to_csv(const ParetoTable& t) {
    std::string out;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        out += (c ? "," : "") + detail::csv_escape(t.columns[c]);
    }
    out += "\n";
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += (c ? "," : "") + detail::csv_escape(detail::cell_text(row[c], 6));
        }
        out += "\n";
    }
    return out;
}

inline Json to_json(const ParetoTable& t) {
    Json rows = Json::array();
    for (const auto& row : t.rows) {
        Json r = Json::object();
        for (std::size_t c = 0; c < row.size(); ++c) {
            const auto& cell = row[c];
            if (std::holds_alternative<double>(cell)) {
                r[t.columns[c]] = std::get<double>(cell);
            } else if (std::holds_alternative<std::string>(cell)) {
                r[t.columns[c]] = std::get<std::string>(cell);
            } else {
                r[t.columns[c]] = nullptr;
            }
        }
        rows.push_back(std::move(r));
    }
    return Json{{"columns", t.columns}, {"rows", std::move(rows)}};
}

/// Change in (accuracy, fairness score) when moving from the most accurate
/// frontier member to the fairest one.
struct EndpointDelta {
    double accuracy = 0.0;
    double fairness = 0.0;
};

inline std::optional<EndpointDelta> endpoint_delta(const ParetoSet& ps, std::span<const EvaluationRecord> records) {
    std::optional<ObjectivePoint> most_accurate, fairest;
    for (auto i : ps.members) {
        const auto p = objectives(records[i], ps.pair);
        if (!p) {
            continue;
        }
        if (!most_accurate || p->accuracy > most_accurate->accuracy ||
            (p->accuracy == most_accurate->accuracy && p->fairness > most_accurate->fairness)) {
            most_accurate = p;
        }
        if (!fairest || p->fairness > fairest->fairness ||
            (p->fairness == fairest->fairness && p->accuracy > fairest->accuracy)) {
            fairest = p;
        }
    }
    if (!most_accurate) {
        return std::nullopt;
    }
    return EndpointDelta{fairest->accuracy - most_accurate->accuracy, fairest->fairness - most_accurate->fairness};
}

inline std::string frontier_file_stem(std::optional<ModelFamily> family, MetricId metric) {
    return std::string(family ? to_string(*family) : "all_families") + "_" + to_string(metric) + "_frontier";
}

/// One exported frontier: its file stem, the set and its rendered table.
struct FrontierExport {
    std::string stem;
    ParetoSet set;
    ParetoTable table;
};

/// Every frontier a report covers: per metric, one per family and, when
/// more than one family ran, the combined multi-model frontier.
inline std::vector<FrontierExport> collect_frontiers(const ExplorationResult& res) {
    std::vector<FrontierExport> out;
    for (auto m : res.metrics) {
        const ObjectivePair pair{m, res.accuracy_objective};
        auto per_family = extract_frontier(res.records, pair, res.mode, Grouping::per_family, res.id);
        for (auto f : res.families) {
            auto it = std::find_if(per_family.begin(), per_family.end(), [&](const auto& ps) { return ps.family == f; });
            ParetoSet ps = it != per_family.end() ? *it : ParetoSet{pair, res.mode, Grouping::per_family, f, {}, 0, res.id};
            auto table = pareto_table(ps, res.records, res.metrics, res.families);
            out.push_back({frontier_file_stem(f, m), std::move(ps), std::move(table)});
        }
        if (res.families.size() > 1) {
            auto all = extract_frontier(res.records, pair, res.mode, Grouping::all_families, res.id).front();
            auto table = pareto_table(all, res.records, res.metrics, res.families);
            out.push_back({frontier_file_stem(std::nullopt, m), std::move(all), std::move(table)});
        }
    }
    return out;
}

namespace detail {

inline std::string signed3(double v) {
    std::string s = fixed(v, 3);
    return s.front() == '-' ? s : "+" + s;
}

inline std::string markdown_table(const ParetoTable& t) {
    std::string out = "|";
    for (const auto& c : t.columns) {
        out += " " + c + " |";
    }
    out += "\n|";
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        out += "---|";
    }
    out += "\n";
    for (const auto& row : t.rows) {
        out += "|";
        for (const auto& cell : row) {
            out += " " + cell_text(cell, 3) + " |";
        }
        out += "\n";
    }
    return out;
}

} // namespace detail

/// Markdown run report. Contains no timestamps, so regenerating it from
/// persisted records reproduces the same bytes.
inline std::string generate_report(const ExplorationResult& res, std::string_view config_text) {
    if (res.records.empty()) {
        throw ValidationError("cannot generate a report for an exploration with no records");
    }
    std::string out;
    out += "# Fairness exploration report\n\n";
    if (!res.id.empty()) {
        out += "Exploration: `" + res.id + "`\n\n";
    }
    out += "## Configuration\n\n```json\n";
    out += config_text;
    if (!config_text.empty() && config_text.back() != '\n') {
        out += "\n";
    }
    out += "```\n\n";

    out += "## Grid sizes\n\n| family | assignments | usable |\n|---|---|---|\n";
    for (std::size_t i = 0; i < res.families.size(); ++i) {
        const auto f = res.families[i];
        const auto usable = std::count_if(res.records.begin(), res.records.end(),
                                          [&](const auto& r) { return r.family() == f && r.usable; });
        out += "| " + std::string(to_string(f)) + " | " + std::to_string(res.grid_sizes[i]) + " | " +
               std::to_string(usable) + " |\n";
    }
    out += "\nEvaluation: " + std::to_string(res.n_splits) + " repeated holdout split(s); dominance mode `" +
           to_string(res.mode) + "`; x objective `" + to_string(res.accuracy_objective) +
           "`; fairness values are scores (1 - gap).\n\n";

    out += "## Warnings\n\n";
    std::size_t n_warnings = 0;
    for (auto f : res.families) {
        std::size_t failed = 0, unusable = 0;
        for (const auto& r : res.records) {
            if (r.family() == f) {
                failed += r.failed_splits.empty() ? 0 : 1;
                unusable += r.usable ? 0 : 1;
            }
        }
        if (failed) {
            out += "- " + std::string(to_string(f)) + ": " + std::to_string(failed) +
                   " assignment(s) with failed splits, " + std::to_string(unusable) + " unusable\n";
            ++n_warnings;
        }
        for (auto m : res.metrics) {
            std::size_t undefined = 0;
            for (const auto& r : res.records) {
                if (r.family() == f && r.usable) {
                    const auto* ms = r.metric(m);
                    undefined += (ms && !ms->defined) ? 1 : 0;
                }
            }
            if (undefined) {
                out += "- " + std::string(to_string(f)) + " / " + to_string(m) + ": " + std::to_string(undefined) +
                       " record(s) excluded from the frontier (undefined group rate)\n";
                ++n_warnings;
            }
        }
    }
    if (n_warnings == 0) {
        out += "None.\n";
    }
    out += "\n";

    const auto frontiers = collect_frontiers(res);
    for (auto m : res.metrics) {
        out += std::string("## Frontiers: ") + to_string(m) + "\n\n";
        for (const auto& fe : frontiers) {
            if (fe.set.pair.fairness != m) {
                continue;
            }
            if (fe.set.family) {
                out += std::string("### Individual frontier: ") + to_string(*fe.set.family) + " / " + to_string(m) + "\n\n";
            } else {
                out += std::string("### Multi-model frontier: ") + to_string(m) + "\n\n";
            }
            out += "Data: [" + fe.stem + ".json](" + fe.stem + ".json), [" + fe.stem + ".csv](" + fe.stem + ".csv)\n\n";
            out += std::to_string(fe.set.members.size()) + " member(s); " + std::to_string(fe.set.excluded) +
                   " record(s) excluded.\n\n";
            out += detail::markdown_table(fe.table);
            if (const auto d = endpoint_delta(fe.set, res.records)) {
                out += "\nMoving from the most-accurate to the fairest member changes accuracy by " +
                       detail::signed3(d->accuracy) + " and fairness score by " + detail::signed3(d->fairness) + ".\n";
            }
            out += "\n";
        }
    }
    return out;
}

} // namespace fairpilot

#endif
