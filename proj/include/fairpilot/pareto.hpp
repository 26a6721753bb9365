#ifndef FAIRPILOT_PARETO_HPP
#define FAIRPILOT_PARETO_HPP

#include "fairpilot/error.hpp"
#include "fairpilot/grid.hpp"
#include "fairpilot/metrics.hpp"
#include "fairpilot/models.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fairpilot {

enum class Dominance { weak, strict };
enum class Grouping { per_family, all_families };
enum class AccuracyObjective { accuracy, balanced_accuracy };

inline const char* to_string(Dominance d) { return d == Dominance::weak ? "weak" : "strict"; }
inline const char* to_string(Grouping g) { return g == Grouping::per_family ? "per_family" : "all_families"; }
inline const char* to_string(AccuracyObjective a) {
    return a == AccuracyObjective::accuracy ? "accuracy" : "balanced_accuracy";
}

inline std::optional<Dominance> parse_dominance(std::string_view s) {
    if (s == "weak") return Dominance::weak;
    if (s == "strict") return Dominance::strict;
    return std::nullopt;
}

inline std::optional<Grouping> parse_grouping(std::string_view s) {
    if (s == "per_family") return Grouping::per_family;
    if (s == "all_families") return Grouping::all_families;
    return std::nullopt;
}

inline std::optional<AccuracyObjective> parse_accuracy_objective(std::string_view s) {
    if (s == "accuracy") return AccuracyObjective::accuracy;
    if (s == "balanced_accuracy") return AccuracyObjective::balanced_accuracy;
    return std::nullopt;
}

/// x: accuracy mean (maximized); y: fairness score mean of one metric
/// (maximized, i.e. gap minimized).
struct ObjectivePair {
    MetricId fairness = MetricId::statistical_parity;
    AccuracyObjective accuracy = AccuracyObjective::accuracy;
};

struct ObjectivePoint {
    double accuracy = 0.0;
    double fairness = 0.0;
};

inline bool dominates(const ObjectivePoint& a, const ObjectivePoint& b, Dominance mode) {
    if (mode == Dominance::strict) {
        return a.accuracy > b.accuracy && a.fairness > b.fairness;
    }
    return a.accuracy >= b.accuracy && a.fairness >= b.fairness && (a.accuracy > b.accuracy || a.fairness > b.fairness);
}

/// The record's position on the pair, or nullopt when the record is
/// unusable or the fairness metric is undefined for it.
inline std::optional<ObjectivePoint> objectives(const EvaluationRecord& r, const ObjectivePair& pair) {
    const auto* m = r.metric(pair.fairness);
    if (!r.usable || !m || !m->defined) {
        return std::nullopt;
    }
    const double acc = pair.accuracy == AccuracyObjective::accuracy ? r.accuracy.mean : r.balanced_accuracy.mean;
    return ObjectivePoint{acc, m->score.mean};
}

inline bool dominates(const EvaluationRecord& a, const EvaluationRecord& b, const ObjectivePair& pair, Dominance mode) {
    const auto pa = objectives(a, pair);
    const auto pb = objectives(b, pair);
    if (!pa || !pb) {
        throw ValidationError(std::string("objective '") + to_string(pair.fairness) + "' undefined for a record");
    }
    return dominates(*pa, *pb, mode);
}

/// Indices of the non-dominated points, ordered by ascending accuracy,
/// then descending fairness, then index.
///
/// Sweeps groups of equal accuracy in descending order while tracking the
/// best fairness seen at strictly higher accuracy: O(n log n).
inline std::vector<std::size_t> frontier_indices(std::span<const ObjectivePoint> pts, Dominance mode) {
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (pts[a].accuracy != pts[b].accuracy) return pts[a].accuracy > pts[b].accuracy;
        if (pts[a].fairness != pts[b].fairness) return pts[a].fairness > pts[b].fairness;
        return a < b;
    });

    std::vector<std::size_t> keep;
    double best_above = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && pts[order[j]].accuracy == pts[order[i]].accuracy) {
            ++j;
        }
        // Group [i, j) shares one accuracy; its first element has the top fairness.
        const double group_best = pts[order[i]].fairness;
        for (std::size_t k = i; k < j; ++k) {
            const double f = pts[order[k]].fairness;
            const bool kept = mode == Dominance::weak ? (f == group_best && f > best_above) : (f >= best_above);
            if (kept) {
                keep.push_back(order[k]);
            }
        }
        best_above = std::max(best_above, group_best);
        i = j;
    }
    std::sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
        if (pts[a].accuracy != pts[b].accuracy) return pts[a].accuracy < pts[b].accuracy;
        if (pts[a].fairness != pts[b].fairness) return pts[a].fairness > pts[b].fairness;
        return a < b;
    });
    return keep;
}

struct ParetoSet {
    ObjectivePair pair;
    Dominance mode = Dominance::weak;
    Grouping grouping = Grouping::all_families;
    std::optional<ModelFamily> family; // set for per-family sets
    std::vector<std::size_t> members;  // indices into the source record list
    std::size_t excluded = 0;          // records dropped for undefined objectives
    std::string source;                // exploration id
};

/// Frontier(s) over `records`. Returns one set for all_families, or one
/// per family present (in canonical family order) for per_family.
inline std::vector<ParetoSet> extract_frontier(std::span<const EvaluationRecord> records, const ObjectivePair& pair,
                                               Dominance mode, Grouping grouping, std::string source = {}) {
    std::vector<std::optional<ModelFamily>> groups;
    if (grouping == Grouping::all_families) {
        groups.push_back(std::nullopt);
    } else {
        for (auto f : kAllFamilies) {
            if (std::any_of(records.begin(), records.end(), [&](const auto& r) { return r.family() == f; })) {
                groups.push_back(f);
            }
        }
    }
    std::vector<ParetoSet> out;
    for (const auto& g : groups) {
        ParetoSet ps{pair, mode, grouping, g, {}, 0, source};
        std::vector<ObjectivePoint> pts;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (g && records[i].family() != *g) {
                continue;
            }
            if (const auto p = objectives(records[i], pair)) {
                pts.push_back(*p);
                idx.push_back(i);
            } else {
                ++ps.excluded;
            }
        }
        for (auto k : frontier_indices(pts, mode)) {
            ps.members.push_back(idx[k]);
        }
        out.push_back(std::move(ps));
    }
    return out;
}

} // namespace fairpilot

#endif
