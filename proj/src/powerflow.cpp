#include "loadopf/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "loadopf/errors.hpp"

namespace loadopf {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

/// Bus-level view of a case shared by residual(), jacobian() and the solver.
struct NodalModel {
    const GridCase& grid;
    BusIndex index;
    AdmittanceMatrix y;
    std::vector<std::vector<std::size_t>> loads_at;
    std::vector<std::vector<std::size_t>> gens_at;
    std::vector<int> row_of;  // first residual row of each bus, -1 for slack

    explicit NodalModel(const GridCase& g)
        : grid(g), index(g), y(build_admittance(g)), loads_at(g.buses.size()),
          gens_at(g.buses.size()), row_of(g.buses.size(), -1) {
        for (std::size_t k = 0; k < g.loads.size(); ++k) loads_at[index.at(g.loads[k].bus)].push_back(k);
        for (std::size_t k = 0; k < g.generators.size(); ++k)
            gens_at[index.at(g.generators[k].bus)].push_back(k);
        int row = 0;
        for (std::size_t i = 0; i < g.buses.size(); ++i) {
            if (i == index.slack()) continue;
            row_of[i] = row;
            row += 2;
        }
    }

    std::size_t size() const { return grid.buses.size(); }
    int rows() const { return 2 * static_cast<int>(size() - 1); }

    /// Network current (Y V) at bus i.
    std::pair<double, double> network_current(std::span<const OperatingVoltage> v,
                                              std::size_t i) const {
        double ir = 0.0;
        double ii = 0.0;
        // Y is structurally symmetric, so the column of i enumerates row i.
        const auto col = static_cast<Eigen::Index>(i);
        Eigen::SparseMatrix<double>::InnerIterator itb(y.b, col);
        for (Eigen::SparseMatrix<double>::InnerIterator itg(y.g, col); itg; ++itg, ++itb) {
            const auto& vj = v[static_cast<std::size_t>(itg.row())];
            const double g = itg.value();
            const double b = itb.value();
            ir += g * vj.v_r - b * vj.v_i;
            ii += g * vj.v_i + b * vj.v_r;
        }
        return {ir, ii};
    }

    std::pair<double, double> load_current(std::span<const OperatingVoltage> v, std::size_t i) const {
        double ir = 0.0;
        double ii = 0.0;
        for (std::size_t k : loads_at[i]) {
            const auto e = eval(grid.loads[k].model, v[i]);
            ir += e.i_r;
            ii += e.i_i;
        }
        return {ir, ii};
    }

    /// Mismatch rows with the bus-total generator output (p, q) at bus i.
    std::pair<double, double> mismatch(std::span<const OperatingVoltage> v, std::size_t i,
                                       double p_gen, double q_gen) const {
        auto [nr, ni] = network_current(v, i);
        auto [lr, li] = load_current(v, i);
        double gr = 0.0;
        double gi = 0.0;
        if (!gens_at[i].empty()) {
            const auto e = eval(PQParams{p_gen, q_gen}, v[i]);
            gr = e.i_r;
            gi = e.i_i;
        }
        return {nr + lr - gr, ni + li - gi};
    }

    /// Appends d(mismatch)/d(v) for bus i, excluding slack columns.
    void add_jacobian(std::span<const OperatingVoltage> v, std::size_t i, double p_gen,
                      double q_gen, Triplets& out) const {
        const int r = row_of[i];
        const auto col = static_cast<Eigen::Index>(i);
        Eigen::SparseMatrix<double>::InnerIterator itb(y.b, col);
        for (Eigen::SparseMatrix<double>::InnerIterator itg(y.g, col); itg; ++itg, ++itb) {
            const int c = row_of[static_cast<std::size_t>(itg.row())];
            if (c < 0) continue;
            const double g = itg.value();
            const double b = itb.value();
            out.emplace_back(r, c, g);
            out.emplace_back(r, c + 1, -b);
            out.emplace_back(r + 1, c, b);
            out.emplace_back(r + 1, c + 1, g);
        }
        Block2 block{};
        for (std::size_t k : loads_at[i]) {
            const auto e = eval(grid.loads[k].model, v[i]);
            for (int a = 0; a < 2; ++a)
                for (int c = 0; c < 2; ++c) block[a][c] += e.d_i[a][c];
        }
        if (!gens_at[i].empty()) {
            const auto e = eval(PQParams{p_gen, q_gen}, v[i]);
            for (int a = 0; a < 2; ++a)
                for (int c = 0; c < 2; ++c) block[a][c] -= e.d_i[a][c];
        }
        for (int a = 0; a < 2; ++a)
            for (int c = 0; c < 2; ++c)
                if (block[a][c] != 0.0) out.emplace_back(r + a, r + c, block[a][c]);
    }

    std::pair<double, double> bus_generation(std::size_t i, std::span<const double> gen_q) const {
        double p = 0.0;
        double q = 0.0;
        for (std::size_t k : gens_at[i]) {
            p += grid.generators[k].p_set;
            if (!gen_q.empty()) q += gen_q[k];
        }
        return {p, q};
    }
};

void check_sizes(const GridCase& grid, std::span<const OperatingVoltage> v,
                 std::span<const double> gen_q) {
    if (v.size() != grid.buses.size() || (!gen_q.empty() && gen_q.size() != grid.generators.size())) {
        throw Error(ErrorCode::InvalidParameter, "voltage or generator vector does not match the case");
    }
}

enum class BusMode { Slack, Voltage, Fixed };

/// Newton state: non-slack voltages then one reactive unknown per
/// voltage-controlled bus.
class NewtonSystem {
  public:
    NewtonSystem(const NodalModel& model, std::vector<BusMode> modes, std::vector<double> fixed_q)
        : model_(model), modes_(std::move(modes)), fixed_q_(std::move(fixed_q)),
          q_col_(model.size(), -1) {
        int col = model_.rows();
        for (std::size_t i = 0; i < model_.size(); ++i) {
            if (modes_[i] == BusMode::Voltage) q_col_[i] = col++;
        }
        dim_ = col;
    }

    int dim() const { return dim_; }

    Eigen::VectorXd pack(const std::vector<OperatingVoltage>& v, const std::vector<double>& q) const {
        Eigen::VectorXd x(dim_);
        for (std::size_t i = 0; i < model_.size(); ++i) {
            const int r = model_.row_of[i];
            if (r < 0) continue;
            x[r] = v[i].v_r;
            x[r + 1] = v[i].v_i;
            if (q_col_[i] >= 0) x[q_col_[i]] = q[i];
        }
        return x;
    }

    void unpack(const Eigen::VectorXd& x, std::vector<OperatingVoltage>& v,
                std::vector<double>& q) const {
        for (std::size_t i = 0; i < model_.size(); ++i) {
            const int r = model_.row_of[i];
            if (r < 0) continue;
            v[i] = {x[r], x[r + 1]};
            q[i] = q_col_[i] >= 0 ? x[q_col_[i]] : fixed_q_[i];
        }
    }

    Eigen::VectorXd residual(const std::vector<OperatingVoltage>& v,
                             const std::vector<double>& q) const {
        Eigen::VectorXd f(dim_);
        for (std::size_t i = 0; i < model_.size(); ++i) {
            const int r = model_.row_of[i];
            if (r < 0) continue;
            const double p_gen = model_.bus_generation(i, {}).first;
            const auto [mr, mi] = model_.mismatch(v, i, p_gen, q[i]);
            f[r] = mr;
            f[r + 1] = mi;
            if (q_col_[i] >= 0) {
                const double vs = model_.grid.buses[i].v_set;
                f[q_col_[i]] = v[i].magnitude_sq() - vs * vs;
            }
        }
        return f;
    }

    Eigen::SparseMatrix<double> jacobian(const std::vector<OperatingVoltage>& v,
                                         const std::vector<double>& q) const {
        Triplets t;
        for (std::size_t i = 0; i < model_.size(); ++i) {
            const int r = model_.row_of[i];
            if (r < 0) continue;
            const double p_gen = model_.bus_generation(i, {}).first;
            model_.add_jacobian(v, i, p_gen, q[i], t);
            if (q_col_[i] >= 0) {
                const int c = q_col_[i];
                const double m2 = v[i].magnitude_sq();
                // d(-I_gen)/dQ with I_gen = (P - jQ) V / |V|^2.
                t.emplace_back(r, c, -v[i].v_i / m2);
                t.emplace_back(r + 1, c, v[i].v_r / m2);
                t.emplace_back(c, r, 2.0 * v[i].v_r);
                t.emplace_back(c, r + 1, 2.0 * v[i].v_i);
            }
        }
        Eigen::SparseMatrix<double> j(dim_, dim_);
        j.setFromTriplets(t.begin(), t.end());
        return j;
    }

  private:
    const NodalModel& model_;
    std::vector<BusMode> modes_;
    std::vector<double> fixed_q_;
    std::vector<int> q_col_;
    int dim_ = 0;
};

struct NewtonResult {
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
};

NewtonResult newton(const NewtonSystem& system, std::vector<OperatingVoltage>& v,
                    std::vector<double>& q, const PFOptions& options) {
    NewtonResult out;
    Eigen::VectorXd x = system.pack(v, q);
    Eigen::VectorXd f = system.residual(v, q);
    double norm = inf_norm(f);
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;

    for (int iter = 1; iter <= options.max_iter; ++iter) {
        Eigen::SparseMatrix<double> j = system.jacobian(v, q);
        j.makeCompressed();
        lu.compute(j);
        if (lu.info() != Eigen::Success) {
            throw NonConvergenceError(iter, norm, "power flow Jacobian is singular");
        }
        const Eigen::VectorXd dx = lu.solve(-f);

        // Halve the step up to six times while the residual norm grows.
        double step = 1.0;
        Eigen::VectorXd trial_f;
        double trial_norm = 0.0;
        for (int halving = 0;; ++halving) {
            system.unpack(x + step * dx, v, q);
            trial_f = system.residual(v, q);
            trial_norm = inf_norm(trial_f);
            if (trial_norm <= norm || halving == 6) break;
            step *= 0.5;
        }
        x += step * dx;
        f = std::move(trial_f);
        norm = trial_norm;
        out.iterations = iter;
        out.residual = norm;
        if (norm <= options.tol) {
            out.converged = true;
            return out;
        }
    }
    return out;
}

}  // namespace

double PFSolution::total_generation() const {
    return std::accumulate(gen_p.begin(), gen_p.end(), 0.0);
}

std::vector<double> residual(const GridCase& grid, std::span<const OperatingVoltage> v,
                             std::span<const double> gen_q) {
    check_sizes(grid, v, gen_q);
    const NodalModel model(grid);
    std::vector<double> f(static_cast<std::size_t>(model.rows()));
    for (std::size_t i = 0; i < model.size(); ++i) {
        const int r = model.row_of[i];
        if (r < 0) continue;
        const auto [p, q] = model.bus_generation(i, gen_q);
        const auto [mr, mi] = model.mismatch(v, i, p, q);
        f[static_cast<std::size_t>(r)] = mr;
        f[static_cast<std::size_t>(r) + 1] = mi;
    }
    return f;
}

Eigen::SparseMatrix<double> jacobian(const GridCase& grid, std::span<const OperatingVoltage> v,
                                     std::span<const double> gen_q) {
    check_sizes(grid, v, gen_q);
    const NodalModel model(grid);
    Triplets t;
    for (std::size_t i = 0; i < model.size(); ++i) {
        if (model.row_of[i] < 0) continue;
        const auto [p, q] = model.bus_generation(i, gen_q);
        model.add_jacobian(v, i, p, q, t);
    }
    Eigen::SparseMatrix<double> j(model.rows(), model.rows());
    j.setFromTriplets(t.begin(), t.end());
    return j;
}

PFSolution solve_pf(const GridCase& grid, const PFOptions& options) {
    if (!(options.tol > 0.0) || options.max_iter < 1) {
        throw Error(ErrorCode::InvalidParameter, "power flow needs tol > 0 and max_iter >= 1");
    }
    const NodalModel model(grid);
    const std::size_t n = model.size();
    const std::size_t slack = model.index.slack();

    std::vector<OperatingVoltage> v(n);
    std::vector<BusMode> modes(n, BusMode::Fixed);
    std::vector<double> q(n, 0.0);
    std::vector<double> q_lo(n, 0.0);
    std::vector<double> q_hi(n, 0.0);
    std::vector<int> switches(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& bus = grid.buses[i];
        if (!options.initial.empty()) {
            if (options.initial.size() != n) {
                throw Error(ErrorCode::InvalidParameter, "initial voltage vector does not match the case");
            }
            v[i] = options.initial[i];
        } else {
            v[i] = {bus.kind == BusKind::Load ? options.v_init : bus.v_set, 0.0};
        }
        if (bus.kind == BusKind::Generator) modes[i] = BusMode::Voltage;
        for (std::size_t k : model.gens_at[i]) {
            q_lo[i] += grid.generators[k].q_min;
            q_hi[i] += grid.generators[k].q_max;
        }
    }
    modes[slack] = BusMode::Slack;
    v[slack] = {grid.buses[slack].v_set, 0.0};

    PFSolution sol;
    NewtonResult result;
    // Each bus may switch to its limit and back at most once; after that the
    // mode is frozen.
    for (int round = 0;; ++round) {
        const NewtonSystem system(model, modes, q);
        result = newton(system, v, q, options);
        sol.iterations += result.iterations;
        if (!result.converged) {
            throw NonConvergenceError(sol.iterations, result.residual,
                                      fmt::format("power flow did not converge in {} iterations "
                                                  "(residual {:.3e})",
                                                  sol.iterations, result.residual));
        }
        if (!options.enforce_q_limits || round > 2 * static_cast<int>(n)) break;

        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (switches[i] >= 2) continue;
            if (modes[i] == BusMode::Voltage) {
                if (q[i] > q_hi[i] + options.q_limit_tol) {
                    q[i] = q_hi[i];
                } else if (q[i] < q_lo[i] - options.q_limit_tol) {
                    q[i] = q_lo[i];
                } else {
                    continue;
                }
                modes[i] = BusMode::Fixed;
                ++switches[i];
                changed = true;
            } else if (modes[i] == BusMode::Fixed && switches[i] == 1) {
                const double vm = v[i].magnitude();
                const double vs = grid.buses[i].v_set;
                const bool back = (q[i] >= q_hi[i] && vm > vs) || (q[i] <= q_lo[i] && vm < vs);
                if (back) {
                    modes[i] = BusMode::Voltage;
                    ++switches[i];
                    changed = true;
                }
            }
        }
        if (!changed) break;
    }

    sol.v = v;
    sol.residual = result.residual;
    for (std::size_t i = 0; i < n; ++i) {
        if (grid.buses[i].kind == BusKind::Generator && modes[i] != BusMode::Voltage) {
            sol.q_limited_buses.push_back(grid.buses[i].id);
        }
        if (v[i].magnitude() < 0.5) sol.low_voltage = true;
    }

    const auto [nr, ni] = model.network_current(v, slack);
    const auto [lr, li] = model.load_current(v, slack);
    const double ir = nr + lr;
    const double ii = ni + li;
    sol.slack_p = v[slack].v_r * ir + v[slack].v_i * ii;
    sol.slack_q = v[slack].v_i * ir - v[slack].v_r * ii;

    sol.gen_p.assign(grid.generators.size(), 0.0);
    sol.gen_q.assign(grid.generators.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& gens = model.gens_at[i];
        if (gens.empty()) continue;
        const double share = 1.0 / static_cast<double>(gens.size());
        for (std::size_t k : gens) {
            if (i == slack) {
                sol.gen_p[k] = sol.slack_p * share;
                sol.gen_q[k] = sol.slack_q * share;
            } else {
                sol.gen_p[k] = grid.generators[k].p_set;
                sol.gen_q[k] = q[i] * share;
            }
        }
    }
    return sol;
}

}  // namespace loadopf
