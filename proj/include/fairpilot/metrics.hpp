#ifndef FAIRPILOT_METRICS_HPP
#define FAIRPILOT_METRICS_HPP

#include "fairpilot/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fairpilot {

enum class MetricId {
    statistical_parity,
    predictive_parity,
    predictive_equality,
    equal_opportunity,
    accuracy_equality,
    equalized_odds,
};

inline constexpr std::array<MetricId, 6> kAllMetrics{
    MetricId::statistical_parity, MetricId::predictive_parity, MetricId::predictive_equality,
    MetricId::equal_opportunity,  MetricId::accuracy_equality, MetricId::equalized_odds,
};

/// The five metrics evaluated by default.
inline constexpr std::array<MetricId, 5> kDefaultMetrics{
    MetricId::predictive_parity, MetricId::predictive_equality, MetricId::equal_opportunity,
    MetricId::accuracy_equality, MetricId::equalized_odds,
};

inline const char* to_string(MetricId m) {
    switch (m) {
    case MetricId::statistical_parity: return "statistical_parity";
    case MetricId::predictive_parity: return "predictive_parity";
    case MetricId::predictive_equality: return "predictive_equality";
    case MetricId::equal_opportunity: return "equal_opportunity";
    case MetricId::accuracy_equality: return "accuracy_equality";
    case MetricId::equalized_odds: return "equalized_odds";
    }
    return "unknown";
}

inline std::optional<MetricId> parse_metric(std::string_view s) {
    for (auto m : kAllMetrics) {
        if (s == to_string(m)) {
            return m;
        }
    }
    return std::nullopt;
}

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::size_t total() const noexcept { return tp + fp + fn + tn; }
    bool operator==(const Confusion&) const = default;
};

/// Confusion counts per sensitive group (index = S).
struct GroupConfusion {
    std::array<Confusion, 2> group;

    bool operator==(const GroupConfusion&) const = default;
};

/// Per-group rates; nullopt where the denominator is zero.
struct GroupRates {
    std::optional<double> selection, tpr, fpr, ppv, accuracy;
};

inline GroupConfusion confusion_by_group(std::span<const std::uint8_t> y_true, std::span<const std::uint8_t> y_pred,
                                         std::span<const std::uint8_t> s) {
    if (y_true.size() != y_pred.size() || y_true.size() != s.size()) {
        throw ValidationError("y_true, y_pred and s must have equal length");
    }
    GroupConfusion c;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] > 1 || y_pred[i] > 1 || s[i] > 1) {
            throw ValidationError("value outside {0,1} at position " + std::to_string(i));
        }
        auto& g = c.group[s[i]];
        if (y_true[i]) {
            ++(y_pred[i] ? g.tp : g.fn);
        } else {
            ++(y_pred[i] ? g.fp : g.tn);
        }
    }
    return c;
}

namespace detail {
inline std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) {
        return std::nullopt;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}
} // namespace detail

inline GroupRates group_rates(const Confusion& c) {
    const auto n = c.total();
    return {
        detail::ratio(c.tp + c.fp, n),
        detail::ratio(c.tp, c.tp + c.fn),
        detail::ratio(c.fp, c.fp + c.tn),
        detail::ratio(c.tp, c.tp + c.fp),
        detail::ratio(c.tp + c.tn, n),
    };
}

/// Absolute between-group gap of a metric. Returns nullopt when a
/// required per-group rate is undefined (zero denominator). Throws when a
/// group has no rows at all.
inline std::optional<double> fairness_gap(const GroupConfusion& c, MetricId metric) {
    for (int g = 0; g < 2; ++g) {
        if (c.group[g].total() == 0) {
            throw ValidationError("sensitive group " + std::to_string(g) + " has no rows");
        }
    }
    const auto r0 = group_rates(c.group[0]);
    const auto r1 = group_rates(c.group[1]);
    auto gap = [](const std::optional<double>& a, const std::optional<double>& b) -> std::optional<double> {
        if (!a || !b) {
            return std::nullopt;
        }
        return std::abs(*a - *b);
    };
    switch (metric) {
    case MetricId::statistical_parity: return gap(r0.selection, r1.selection);
    case MetricId::predictive_parity: return gap(r0.ppv, r1.ppv);
    case MetricId::predictive_equality: return gap(r0.fpr, r1.fpr);
    case MetricId::equal_opportunity: return gap(r0.tpr, r1.tpr);
    case MetricId::accuracy_equality: return gap(r0.accuracy, r1.accuracy);
    case MetricId::equalized_odds: {
        const auto tpr = gap(r0.tpr, r1.tpr);
        const auto fpr = gap(r0.fpr, r1.fpr);
        if (!tpr || !fpr) {
            return std::nullopt;
        }
        return std::max(*tpr, *fpr);
    }
    }
    return std::nullopt;
}

struct MetricValue {
    MetricId id;
    std::optional<double> gap;

    std::optional<double> score() const {
        if (!gap) {
            return std::nullopt;
        }
        return 1.0 - *gap;
    }
};

struct MetricVector {
    double accuracy = 0.0;
    double balanced_accuracy = 0.0;
    std::vector<MetricValue> metrics;
    std::array<GroupRates, 2> rates;

    const MetricValue* find(MetricId id) const {
        for (const auto& m : metrics) {
            if (m.id == id) {
                return &m;
            }
        }
        return nullptr;
    }
};

inline MetricVector evaluate_predictions(std::span<const std::uint8_t> y_true, std::span<const std::uint8_t> y_pred,
                                         std::span<const std::uint8_t> s, std::span<const MetricId> metrics) {
    const auto c = confusion_by_group(y_true, y_pred, s);
    MetricVector v;
    Confusion all;
    for (const auto& g : c.group) {
        all.tp += g.tp;
        all.fp += g.fp;
        all.fn += g.fn;
        all.tn += g.tn;
    }
    const auto n = all.total();
    if (n == 0) {
        throw ValidationError("no rows to evaluate");
    }
    v.accuracy = static_cast<double>(all.tp + all.tn) / static_cast<double>(n);
    const auto tpr = detail::ratio(all.tp, all.tp + all.fn);
    const auto tnr = detail::ratio(all.tn, all.tn + all.fp);
    v.balanced_accuracy = (tpr.value_or(0.0) + tnr.value_or(0.0)) / ((tpr ? 1.0 : 0.0) + (tnr ? 1.0 : 0.0));
    v.rates = {group_rates(c.group[0]), group_rates(c.group[1])};
    for (auto m : metrics) {
        v.metrics.push_back({m, fairness_gap(c, m)});
    }
    return v;
}

} // namespace fairpilot

#endif
