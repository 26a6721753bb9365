// Independent reference implementations used by the unit and acceptance
// suites. Deliberately naive: no shared code with the library beyond types.
#ifndef FAIRPILOT_TEST_ORACLES_HPP
#define FAIRPILOT_TEST_ORACLES_HPP

#include "fairpilot/metrics.hpp"
#include "fairpilot/pareto.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace oracle {

// P(event | condition) estimated by row counting; nullopt when no row
// satisfies the condition.
template <class Event, class Condition>
std::optional<double> conditional(std::size_t n, Event event, Condition condition) {
    double hit = 0.0, base = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (condition(i)) {
            base += 1.0;
            hit += event(i) ? 1.0 : 0.0;
        }
    }
    if (base == 0.0) {
        return std::nullopt;
    }
    return hit / base;
}

inline std::optional<double> abs_diff(std::optional<double> a, std::optional<double> b) {
    if (!a || !b) {
        return std::nullopt;
    }
    return std::fabs(*a - *b);
}

// Between-group gap computed straight from the rows.
inline std::optional<double> gap(const std::vector<std::uint8_t>& y, const std::vector<std::uint8_t>& p,
                                 const std::vector<std::uint8_t>& s, fairpilot::MetricId m) {
    using fairpilot::MetricId;
    const auto n = y.size();
    auto rate = [&](int g, auto event, auto cond) {
        return conditional(n, event, [&](std::size_t i) { return s[i] == g && cond(i); });
    };
    auto any = [](std::size_t) { return true; };
    auto pred1 = [&](std::size_t i) { return p[i] == 1; };
    auto true1 = [&](std::size_t i) { return y[i] == 1; };
    auto true0 = [&](std::size_t i) { return y[i] == 0; };
    auto correct = [&](std::size_t i) { return p[i] == y[i]; };
    auto tpr_gap = abs_diff(rate(0, pred1, true1), rate(1, pred1, true1));
    auto fpr_gap = abs_diff(rate(0, pred1, true0), rate(1, pred1, true0));
    switch (m) {
    case MetricId::statistical_parity: return abs_diff(rate(0, pred1, any), rate(1, pred1, any));
    case MetricId::predictive_parity: return abs_diff(rate(0, true1, pred1), rate(1, true1, pred1));
    case MetricId::predictive_equality: return fpr_gap;
    case MetricId::equal_opportunity: return tpr_gap;
    case MetricId::accuracy_equality: return abs_diff(rate(0, correct, any), rate(1, correct, any));
    case MetricId::equalized_odds:
        if (!tpr_gap || !fpr_gap) {
            return std::nullopt;
        }
        return std::max(*tpr_gap, *fpr_gap);
    }
    return std::nullopt;
}

// O(n^2) dominance filter.
inline bool dominates(const fairpilot::ObjectivePoint& a, const fairpilot::ObjectivePoint& b,
                      fairpilot::Dominance mode) {
    if (mode == fairpilot::Dominance::strict) {
        return a.accuracy > b.accuracy && a.fairness > b.fairness;
    }
    return a.accuracy >= b.accuracy && a.fairness >= b.fairness &&
           (a.accuracy > b.accuracy || a.fairness > b.fairness);
}

inline std::vector<std::size_t> frontier(const std::vector<fairpilot::ObjectivePoint>& pts, fairpilot::Dominance mode) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
            dominated = j != i && oracle::dominates(pts[j], pts[i], mode);
        }
        if (!dominated) {
            out.push_back(i);
        }
    }
    return out;
}

} // namespace oracle

#endif
