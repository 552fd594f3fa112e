#include "loadopf/network.hpp"

#include <cmath>
#include <queue>
#include <unordered_set>

#include <fmt/format.h>

#include "loadopf/errors.hpp"

namespace loadopf {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidParameter, what);
}

bool finite(double x) { return std::isfinite(x); }

bool finite_model(const LoadModel& model) {
    return std::visit(
        [](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, PQParams>) return finite(m.p) && finite(m.q);
            if constexpr (std::is_same_v<M, ZIPParams>)
                return finite(m.p0) && finite(m.q0) && finite(m.i_p) && finite(m.i_q) &&
                       finite(m.g_z) && finite(m.b_z);
            if constexpr (std::is_same_v<M, BIGParams>)
                return finite(m.alpha_r) && finite(m.alpha_i) && finite(m.g_b) && finite(m.b_b);
            if constexpr (std::is_same_v<M, YParams>) return finite(m.g) && finite(m.b);
        },
        model);
}

}  // namespace

std::string_view to_string(BusKind kind) {
    switch (kind) {
        case BusKind::Slack: return "slack";
        case BusKind::Generator: return "generator";
        case BusKind::Load: return "load";
    }
    return "?";
}

BusKind parse_bus_kind(std::string_view name) {
    if (name == "slack") return BusKind::Slack;
    if (name == "generator") return BusKind::Generator;
    if (name == "load") return BusKind::Load;
    throw Error(ErrorCode::ParseError, fmt::format("unknown bus kind '{}'", name));
}

BusIndex::BusIndex(const GridCase& grid) {
    for (std::size_t i = 0; i < grid.buses.size(); ++i) {
        index_.emplace(grid.buses[i].id, i);
        if (grid.buses[i].kind == BusKind::Slack) slack_ = i;
    }
}

std::size_t BusIndex::at(int id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) {
        throw Error(ErrorCode::DanglingReference, fmt::format("reference to missing bus {}", id));
    }
    return it->second;
}

GridCase validate_case(GridCase grid) {
    if (grid.buses.empty()) throw Error(ErrorCode::NoSlack, "case has no buses (0 slack buses)");

    std::unordered_set<int> ids;
    int slack_count = 0;
    for (const auto& bus : grid.buses) {
        if (!ids.insert(bus.id).second) {
            throw Error(ErrorCode::DuplicateBusId, fmt::format("duplicate bus id {}", bus.id));
        }
        require(bus.v_min > 0.0 && bus.v_min <= bus.v_max,
                fmt::format("bus {}: need 0 < v_min <= v_max, got [{}, {}]", bus.id, bus.v_min,
                            bus.v_max));
        require(bus.v_set > 0.0 && finite(bus.v_set),
                fmt::format("bus {}: voltage setpoint must be positive", bus.id));
        if (bus.kind == BusKind::Slack) ++slack_count;
    }
    if (slack_count != 1) {
        throw Error(ErrorCode::NoSlack,
                    fmt::format("case must have exactly one slack bus, found {}", slack_count));
    }

    const BusIndex index(grid);
    const std::size_t n = grid.buses.size();
    std::vector<std::vector<std::size_t>> adjacency(n);
    for (std::size_t k = 0; k < grid.branches.size(); ++k) {
        const auto& br = grid.branches[k];
        const std::size_t f = index.at(br.from);
        const std::size_t t = index.at(br.to);
        require(br.from != br.to, fmt::format("branch {}: both ends on bus {}", k, br.from));
        require(br.r >= 0.0, fmt::format("branch {}-{}: negative resistance", br.from, br.to));
        require(br.r != 0.0 || br.x != 0.0,
                fmt::format("branch {}-{}: zero series impedance", br.from, br.to));
        require(finite(br.r) && finite(br.x) && finite(br.b_sh),
                fmt::format("branch {}-{}: non-finite parameter", br.from, br.to));
        adjacency[f].push_back(t);
        adjacency[t].push_back(f);
    }

    std::vector<int> generators_at(n, 0);
    for (const auto& gen : grid.generators) {
        const std::size_t i = index.at(gen.bus);
        require(gen.p_min <= gen.p_max, fmt::format("generator at bus {}: p_min > p_max", gen.bus));
        require(gen.q_min <= gen.q_max, fmt::format("generator at bus {}: q_min > q_max", gen.bus));
        require(gen.cost.c2 >= 0.0, fmt::format("generator at bus {}: negative c2", gen.bus));
        require(grid.buses[i].kind != BusKind::Load,
                fmt::format("generator placed on load bus {}", gen.bus));
        ++generators_at[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
        require(grid.buses[i].kind != BusKind::Generator || generators_at[i] > 0,
                fmt::format("generator bus {} hosts no generator", grid.buses[i].id));
    }

    for (const auto& load : grid.loads) {
        const std::size_t i = index.at(load.bus);
        require(finite_model(load.model), fmt::format("load at bus {}: non-finite parameter", load.bus));
        if (adjacency[i].empty() && n > 1) {
            throw Error(ErrorCode::Disconnected,
                        fmt::format("load bus {} has no incident branch", load.bus));
        }
    }

    std::vector<bool> seen(n, false);
    std::queue<std::size_t> frontier;
    frontier.push(index.slack());
    seen[index.slack()] = true;
    while (!frontier.empty()) {
        const std::size_t i = frontier.front();
        frontier.pop();
        for (std::size_t j : adjacency[i]) {
            if (!seen[j]) {
                seen[j] = true;
                frontier.push(j);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!seen[i]) {
            throw Error(ErrorCode::Disconnected,
                        fmt::format("bus {} is not connected to the slack bus", grid.buses[i].id));
        }
    }
    return grid;
}

std::complex<double> series_admittance(const Branch& branch) {
    return 1.0 / std::complex<double>(branch.r, branch.x);
}

AdmittanceMatrix build_admittance(const GridCase& grid) {
    const BusIndex index(grid);
    const auto n = static_cast<Eigen::Index>(grid.buses.size());
    std::vector<Eigen::Triplet<double>> g;
    std::vector<Eigen::Triplet<double>> b;
    for (const auto& br : grid.branches) {
        const auto f = static_cast<Eigen::Index>(index.at(br.from));
        const auto t = static_cast<Eigen::Index>(index.at(br.to));
        const auto y = series_admittance(br);
        const double half_shunt = 0.5 * br.b_sh;
        g.emplace_back(f, f, y.real());
        g.emplace_back(t, t, y.real());
        g.emplace_back(f, t, -y.real());
        g.emplace_back(t, f, -y.real());
        b.emplace_back(f, f, y.imag() + half_shunt);
        b.emplace_back(t, t, y.imag() + half_shunt);
        b.emplace_back(f, t, -y.imag());
        b.emplace_back(t, f, -y.imag());
    }
    AdmittanceMatrix y{Eigen::SparseMatrix<double>(n, n), Eigen::SparseMatrix<double>(n, n)};
    y.g.setFromTriplets(g.begin(), g.end());
    y.b.setFromTriplets(b.begin(), b.end());
    return y;
}

}  // namespace loadopf
