#pragma once

// Brute-force OPF reference for cases whose only free control is the slack
// voltage magnitude: sweep the setpoint, run a power flow at each point and
// keep the cheapest feasible dispatch.

#include <cmath>
#include <optional>

#include "loadopf/errors.hpp"
#include "loadopf/opf.hpp"
#include "loadopf/powerflow.hpp"

namespace loadopf::testing {

struct GridSearchResult {
    double objective = 0.0;
    double v_slack = 0.0;
    std::vector<OperatingVoltage> v;
};

/// Cost of the power flow at slack setpoint vs, or nothing if the point
/// violates any bound.
inline std::optional<GridSearchResult> evaluate_setpoint(GridCase c, double vs) {
    const BusIndex index(c);
    c.buses[index.slack()].v_set = vs;
    PFOptions opts;
    opts.tol = 1e-11;
    opts.enforce_q_limits = false;
    PFSolution pf;
    try {
        pf = solve_pf(c, opts);
    } catch (const Error&) {
        return std::nullopt;
    }
    if (pf.low_voltage) return std::nullopt;
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        const double m = pf.v[i].magnitude();
        if (m < c.buses[i].v_min - 1e-12 || m > c.buses[i].v_max + 1e-12) return std::nullopt;
    }
    for (std::size_t k = 0; k < c.generators.size(); ++k) {
        const auto& g = c.generators[k];
        if (pf.gen_p[k] < g.p_min - 1e-12 || pf.gen_p[k] > g.p_max + 1e-12) return std::nullopt;
        if (pf.gen_q[k] < g.q_min - 1e-12 || pf.gen_q[k] > g.q_max + 1e-12) return std::nullopt;
    }
    return GridSearchResult{generation_cost(c, pf.gen_p), vs, pf.v};
}

/// Grid over [v_min, v_max] of the slack bus. Where feasibility flips between
/// neighbouring points the boundary is located by bisection and also scored.
inline std::optional<GridSearchResult> grid_search_opf(const GridCase& c, double step = 1e-3) {
    const auto& slack = c.buses[BusIndex(c).slack()];
    std::optional<GridSearchResult> best;
    const auto consider = [&](const std::optional<GridSearchResult>& r) {
        if (r && (!best || r->objective < best->objective)) best = r;
    };
    const int n = static_cast<int>(std::floor((slack.v_max - slack.v_min) / step + 1e-9));
    double prev_v = slack.v_min;
    auto prev = evaluate_setpoint(c, prev_v);
    consider(prev);
    for (int k = 1; k <= n + 1; ++k) {
        const double v = std::min(slack.v_min + k * step, slack.v_max);
        if (v <= prev_v) break;
        auto cur = evaluate_setpoint(c, v);
        consider(cur);
        if (prev.has_value() != cur.has_value()) {
            double feasible = prev ? prev_v : v;
            double infeasible = prev ? v : prev_v;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (feasible + infeasible);
                if (auto r = evaluate_setpoint(c, mid)) {
                    feasible = mid;
                    consider(r);
                } else {
                    infeasible = mid;
                }
            }
        }
        prev = cur;
        prev_v = v;
    }
    return best;
}

}  // namespace loadopf::testing
