#include "loadopf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "loadopf/errors.hpp"

namespace loadopf {

namespace {

[[noreturn]] void invalid(const std::string& message) { throw Error(ErrorCode::ValidationError, message); }

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool within(double x, double lo, double hi, double tol) { return x >= lo - tol && x <= hi + tol; }

bool operating_point_feasible(const GridCase& grid, const PFSolution& pf, double tol) {
    for (std::size_t i = 0; i < grid.buses.size(); ++i) {
        if (!within(pf.v[i].magnitude(), grid.buses[i].v_min, grid.buses[i].v_max, tol)) return false;
    }
    for (std::size_t k = 0; k < grid.generators.size(); ++k) {
        const auto& g = grid.generators[k];
        if (!within(pf.gen_p[k], g.p_min, g.p_max, tol) || !within(pf.gen_q[k], g.q_min, g.q_max, tol)) return false;
    }
    return true;
}

}  // namespace

std::size_t SegmentedCase::segment_count() const {
    return families.empty() ? 0 : families.begin()->second.size();
}

GridCase SegmentedCase::apply(LoadKind kind, std::size_t index) const {
    const auto it = families.find(kind);
    if (it == families.end()) invalid(fmt::format("no {} family in the segmented case", to_string(kind)));
    if (index >= it->second.size()) {
        invalid(fmt::format("segment {} out of range ({} segments)", index + 1, it->second.size()));
    }
    GridCase grid = base;
    grid.loads = it->second[index];
    return grid;
}

SegmentedCase validate_segmented(SegmentedCase seg) {
    seg.base = validate_case(std::move(seg.base));
    std::vector<int> load_buses;
    for (const auto& l : seg.base.loads) {
        if (std::find(load_buses.begin(), load_buses.end(), l.bus) != load_buses.end()) {
            invalid(fmt::format("base case has more than one load on bus {}", l.bus));
        }
        load_buses.push_back(l.bus);
    }
    if (seg.families.empty()) invalid("segmented case has no load families");
    const auto count = seg.segment_count();
    for (auto& [kind, segments] : seg.families) {
        const auto name = to_string(kind);
        if (segments.size() != count) {
            invalid(fmt::format("family {} has {} segments, family {} has {}", name, segments.size(),
                                to_string(seg.families.begin()->first), count));
        }
        for (std::size_t s = 0; s < segments.size(); ++s) {
            SegmentLoads ordered;
            for (int bus : load_buses) {
                const auto matches = std::count_if(segments[s].begin(), segments[s].end(),
                                                   [&](const Load& l) { return l.bus == bus; });
                if (matches == 0) invalid(fmt::format("family {}: segment {} missing load bus {}", name, s + 1, bus));
                if (matches > 1) {
                    invalid(fmt::format("family {}: segment {} has more than one load on bus {}", name, s + 1, bus));
                }
                const auto& l = *std::find_if(segments[s].begin(), segments[s].end(),
                                              [&](const Load& x) { return x.bus == bus; });
                if (kind_of(l.model) != kind) {
                    invalid(fmt::format("family {}: segment {} bus {} holds a {} model", name, s + 1, bus,
                                        to_string(kind_of(l.model))));
                }
                ordered.push_back(l);
            }
            for (const auto& l : segments[s]) {
                if (std::find(load_buses.begin(), load_buses.end(), l.bus) == load_buses.end()) {
                    invalid(fmt::format("family {}: segment {} has a load on bus {}, which carries no load in the "
                                        "base case",
                                        name, s + 1, l.bus));
                }
            }
            segments[s] = std::move(ordered);
        }
    }
    return seg;
}

bool SweepReport::has_errors() const {
    return std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.ok(); });
}

bool GapReport::has_errors() const {
    return std::any_of(rows.begin(), rows.end(), [](const GapRow& r) { return !r.ok(); });
}

SweepReport experiment_sweep(const SegmentedCase& seg, std::span<const LoadKind> kinds, const OPFOptions& options) {
    const std::set<LoadKind> sorted(kinds.begin(), kinds.end());
    for (auto kind : sorted) {
        if (!seg.families.count(kind)) invalid(fmt::format("no {} family in the segmented case", to_string(kind)));
    }
    SweepReport report;
    for (const auto& b : seg.base.buses) report.bus_ids.push_back(b.id);
    for (const auto& g : seg.base.generators) report.generator_buses.push_back(g.bus);
    for (const auto& l : seg.base.loads) report.load_buses.push_back(l.bus);
    const BusIndex index(seg.base);

    for (std::size_t s = 0; s < seg.segment_count(); ++s) {
        for (auto kind : sorted) {
            SweepRow row;
            row.segment = static_cast<int>(s) + 1;
            row.kind = kind;
            const auto grid = seg.apply(kind, s);
            try {
                const auto sol = solve_opf(grid, options);
                row.objective = sol.objective;
                row.iterations = sol.iterations;
                row.kkt_residual = sol.kkt_residual;
                row.v = sol.x.v;
                row.v_activity = sol.v_activity;
                row.p_g = sol.x.p_g;
                row.q_g = sol.x.q_g;
                row.p_activity = sol.p_activity;
                row.q_activity = sol.q_activity;
                for (const auto& l : grid.loads) {
                    row.loads.push_back({l.bus, kind, classify(l.model, sol.x.v[index.at(l.bus)])});
                }
            } catch (const NonConvergenceError& e) {
                row.status = to_string(e.code());
                row.error = e.what();
                row.iterations = e.iterations();
                row.objective = kNaN;
                row.kkt_residual = e.residual();
            } catch (const Error& e) {
                row.status = to_string(e.code());
                row.error = e.what();
                row.objective = kNaN;
                row.kkt_residual = kNaN;
            }
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

GridCase freeze_setpoints(const GridCase& grid, const OPFSolution& solved, FreezeMode freeze) {
    GridCase out = grid;
    const BusIndex index(out);
    for (std::size_t k = 0; k < out.generators.size(); ++k) {
        auto& gen = out.generators[k];
        auto& bus = out.buses[index.at(gen.bus)];
        if (bus.kind == BusKind::Load) bus.kind = BusKind::Generator;
        bus.v_set = solved.x.v[index.at(gen.bus)].magnitude();
        if (bus.kind != BusKind::Slack && freeze == FreezeMode::All) gen.p_set = solved.x.p_g[k];
    }
    return out;
}

GapReport experiment_gap(const SegmentedCase& seg, LoadKind from, LoadKind to, const GapOptions& options) {
    for (auto kind : {from, to}) {
        if (!seg.families.count(kind)) invalid(fmt::format("no {} family in the segmented case", to_string(kind)));
    }
    GapReport report;
    report.from = from;
    report.to = to;
    report.freeze = options.freeze;
    for (std::size_t s = 0; s < seg.segment_count(); ++s) {
        GapRow row;
        row.segment = static_cast<int>(s) + 1;
        row.objective_a = row.generation_a = row.generation_b = row.delta = kNaN;
        OPFSolution a;
        try {
            a = solve_opf(seg.apply(from, s), options.opf);
        } catch (const Error& e) {
            row.status = to_string(e.code());
            row.error = fmt::format("OPF under {}: {}", to_string(from), e.what());
            report.rows.push_back(std::move(row));
            continue;
        }
        row.objective_a = a.objective;
        row.generation_a = 0.0;
        for (double p : a.x.p_g) row.generation_a += p;

        const auto b_grid = freeze_setpoints(seg.apply(to, s), a, options.freeze);
        auto pf_options = options.pf;
        pf_options.enforce_q_limits = false;
        pf_options.initial = a.x.v;
        try {
            const auto pf = solve_pf(b_grid, pf_options);
            row.pf_converged = true;
            row.generation_b = pf.total_generation();
            row.delta = row.generation_b - row.generation_a;
            row.feasible_b = operating_point_feasible(b_grid, pf, options.feasibility_tol);
        } catch (const Error& e) {
            row.status = to_string(e.code());
            row.error = fmt::format("power flow under {}: {}", to_string(to), e.what());
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace loadopf
