#ifndef FAIRPILOT_SYNTHETIC_HPP
#define FAIRPILOT_SYNTHETIC_HPP

#include "fairpilot/data.hpp"
#include "fairpilot/rng.hpp"

#include <string>

namespace fairpilot {

struct SyntheticSpec {
    std::size_t n_rows = 2000;
    std::uint64_t seed = 1;
    double group1_share = 0.5;
    // P(label = 1 | group); unequal rates inject a group disparity.
    double base_rate_group0 = 0.3;
    double base_rate_group1 = 0.6;
    double noise = 1.0;
};

/// CSV with numeric features x0..x3, a categorical `region`, the
/// sensitive column `group` (values "a" / "b") and the target `outcome`
/// ("yes" / "no"). x1 and `region` act as group proxies, so the most
/// accurate models are not the fairest.
inline std::string synthetic_csv(const SyntheticSpec& spec) {
    Rng rng(spec.seed);
    std::string out = "x0,x1,x2,x3,region,group,outcome\n";
    for (std::size_t i = 0; i < spec.n_rows; ++i) {
        const int g = rng.uniform() < spec.group1_share ? 1 : 0;
        const double rate = g ? spec.base_rate_group1 : spec.base_rate_group0;
        const int y = rng.uniform() < rate ? 1 : 0;
        const double x0 = 1.2 * y + spec.noise * rng.normal();
        const double x1 = 1.0 * g + 0.3 * y + 0.6 * spec.noise * rng.normal();
        const double x2 = spec.noise * rng.normal();
        const double x3 = 0.6 * y + 0.6 * g + spec.noise * rng.normal();
        const double u = rng.uniform();
        const char* region = g ? (u < 0.6 ? "north" : (u < 0.85 ? "east" : "south"))
                               : (u < 0.2 ? "north" : (u < 0.5 ? "east" : "south"));
        out += detail::format_number(x0) + "," + detail::format_number(x1) + "," + detail::format_number(x2) + "," +
               detail::format_number(x3) + "," + region + "," + (g ? "b" : "a") + "," + (y ? "yes" : "no") + "\n";
    }
    return out;
}

/// Task encoding matching synthetic_csv: outcome=yes is positive, group a
/// is group 0.
inline TaskEncoding synthetic_task() { return {"outcome", {"yes"}, "group", {"a"}, {}, {}}; }

} // namespace fairpilot

#endif
