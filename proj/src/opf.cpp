#include "loadopf/opf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "loadopf/detail/current.hpp"
#include "loadopf/errors.hpp"
#include "loadopf/interior_point.hpp"

namespace loadopf {

namespace {

using detail::Jet;

/// A quantity that is either an optimization variable or pinned to a value.
struct Slot {
    int index = -1;
    double fixed = 0.0;

    double read(const Eigen::VectorXd& x) const { return index >= 0 ? x[index] : fixed; }
};

/// AC OPF in rectangular current-balance form.
///
/// Variables: v_r of every bus, v_i of every non-slack bus, (p, q) of each
/// generator, and s = |V|^2 of every bus. Constraints per bus: real and
/// imaginary current balance, then v_r^2 + v_i^2 - s = 0. Bounds live on p,
/// q and s.
class OpfNlp final : public Nlp {
  public:
    explicit OpfNlp(const GridCase& grid)
        : grid_(grid), index_(grid), y_(build_admittance(grid)), n_bus_(grid.buses.size()),
          loads_at_(n_bus_), gens_at_(n_bus_) {
        for (std::size_t k = 0; k < grid.loads.size(); ++k) loads_at_[index_.at(grid.loads[k].bus)].push_back(k);
        for (std::size_t k = 0; k < grid.generators.size(); ++k)
            gens_at_[index_.at(grid.generators[k].bus)].push_back(k);

        const auto add = [&](double lo, double hi) {
            Slot s;
            if (std::isfinite(lo) && std::isfinite(hi) && hi - lo <= 1e-12) {
                s.fixed = lo;
                return s;
            }
            s.index = static_cast<int>(lower_.size());
            lower_.push_back(lo);
            upper_.push_back(hi);
            return s;
        };
        for (std::size_t i = 0; i < n_bus_; ++i) vr_.push_back(add(-kInf, kInf));
        for (std::size_t i = 0; i < n_bus_; ++i) vi_.push_back(i == index_.slack() ? Slot{} : add(-kInf, kInf));
        for (const auto& g : grid.generators) {
            p_.push_back(add(g.p_min, g.p_max));
            q_.push_back(add(g.q_min, g.q_max));
        }
        for (const auto& b : grid.buses) s_.push_back(add(b.v_min * b.v_min, b.v_max * b.v_max));
    }

    int num_variables() const override { return static_cast<int>(lower_.size()); }
    int num_constraints() const override { return static_cast<int>(3 * n_bus_); }
    Eigen::VectorXd lower_bounds() const override {
        return Eigen::Map<const Eigen::VectorXd>(lower_.data(), num_variables());
    }
    Eigen::VectorXd upper_bounds() const override {
        return Eigen::Map<const Eigen::VectorXd>(upper_.data(), num_variables());
    }

    Eigen::VectorXd initial_point() const override {
        StateVector st;
        st.v.resize(n_bus_);
        for (std::size_t i = 0; i < n_bus_; ++i) {
            const auto& b = grid_.buses[i];
            st.v[i] = {std::clamp(1.0, b.v_min, b.v_max), 0.0};
        }
        double p_load = 0.0;
        double q_load = 0.0;
        for (const auto& l : grid_.loads) {
            const auto e = eval(l.model, st.v[index_.at(l.bus)]);
            p_load += e.p;
            q_load += e.q;
        }
        // Dispatch split in proportion to capacity.
        double p_cap = 0.0;
        double q_cap = 0.0;
        const auto ng = grid_.generators.size();
        for (const auto& g : grid_.generators) {
            p_cap += std::isfinite(g.p_max) ? std::max(g.p_max, 0.0) : 0.0;
            q_cap += std::isfinite(g.q_max) ? std::max(g.q_max, 0.0) : 0.0;
        }
        for (const auto& g : grid_.generators) {
            const double pw = p_cap > 0 && std::isfinite(g.p_max) ? std::max(g.p_max, 0.0) / p_cap
                                                                 : 1.0 / static_cast<double>(ng);
            const double qw = q_cap > 0 && std::isfinite(g.q_max) ? std::max(g.q_max, 0.0) / q_cap
                                                                 : 1.0 / static_cast<double>(ng);
            st.p_g.push_back(std::clamp(p_load * pw, g.p_min, g.p_max));
            st.q_g.push_back(std::clamp(q_load * qw, g.q_min, g.q_max));
        }
        return encode(st);
    }

    Eigen::VectorXd encode(const StateVector& st) const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(num_variables());
        const auto put = [&](const Slot& s, double v) {
            if (s.index >= 0) x[s.index] = v;
        };
        for (std::size_t i = 0; i < n_bus_; ++i) {
            put(vr_[i], st.v[i].v_r);
            put(vi_[i], st.v[i].v_i);
            put(s_[i], st.v[i].magnitude_sq());
        }
        for (std::size_t k = 0; k < p_.size(); ++k) {
            put(p_[k], st.p_g[k]);
            put(q_[k], st.q_g[k]);
        }
        return x;
    }

    StateVector decode(const Eigen::VectorXd& x) const {
        StateVector st;
        for (std::size_t i = 0; i < n_bus_; ++i) st.v.push_back({vr_[i].read(x), vi_[i].read(x)});
        for (std::size_t k = 0; k < p_.size(); ++k) {
            st.p_g.push_back(p_[k].read(x));
            st.q_g.push_back(q_[k].read(x));
        }
        return st;
    }

    double objective(const Eigen::VectorXd& x) const override {
        double f = 0.0;
        for (std::size_t k = 0; k < p_.size(); ++k) f += grid_.generators[k].cost(p_[k].read(x));
        return f;
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(num_variables());
        for (std::size_t k = 0; k < p_.size(); ++k) {
            if (p_[k].index < 0) continue;
            const auto& c = grid_.generators[k].cost;
            g[p_[k].index] = 2.0 * c.c2 * x[p_[k].index] + c.c1;
        }
        return g;
    }

    Eigen::VectorXd constraints(const Eigen::VectorXd& x) const override {
        Eigen::VectorXd c(num_constraints());
        const auto st = decode(x);
        for (std::size_t i = 0; i < n_bus_; ++i) {
            double cr = 0.0;
            double ci = 0.0;
            for_each_neighbor(i, [&](std::size_t j, double g, double b) {
                cr += g * st.v[j].v_r - b * st.v[j].v_i;
                ci += g * st.v[j].v_i + b * st.v[j].v_r;
            });
            for (std::size_t k : loads_at_[i]) {
                const auto [ir, ii] = detail::drawn_current(grid_.loads[k].model, st.v[i].v_r, st.v[i].v_i);
                cr += ir;
                ci += ii;
            }
            for (std::size_t k : gens_at_[i]) {
                const auto [ir, ii] = detail::power_to_current(st.p_g[k], st.q_g[k], st.v[i].v_r, st.v[i].v_i);
                cr -= ir;
                ci -= ii;
            }
            c[static_cast<Eigen::Index>(2 * i)] = cr;
            c[static_cast<Eigen::Index>(2 * i + 1)] = ci;
            c[static_cast<Eigen::Index>(2 * n_bus_ + i)] = st.v[i].magnitude_sq() - s_[i].read(x);
        }
        return c;
    }

    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const override {
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(num_constraints(), num_variables());
        const auto st = decode(x);
        const auto add = [&](std::size_t row, const Slot& s, double v) {
            if (s.index >= 0) jac(static_cast<Eigen::Index>(row), s.index) += v;
        };
        for (std::size_t i = 0; i < n_bus_; ++i) {
            const std::size_t rr = 2 * i;
            const std::size_t ri = 2 * i + 1;
            for_each_neighbor(i, [&](std::size_t j, double g, double b) {
                add(rr, vr_[j], g);
                add(rr, vi_[j], -b);
                add(ri, vr_[j], b);
                add(ri, vi_[j], g);
            });
            for (std::size_t k : loads_at_[i]) {
                const auto [ir, ii] = load_jets(k, st.v[i]);
                add(rr, vr_[i], ir.g[0]);
                add(rr, vi_[i], ir.g[1]);
                add(ri, vr_[i], ii.g[0]);
                add(ri, vi_[i], ii.g[1]);
            }
            for (std::size_t k : gens_at_[i]) {
                const auto [ir, ii] = gen_jets(st, i, k);
                const Slot* slots[4] = {&vr_[i], &vi_[i], &p_[k], &q_[k]};
                for (int a = 0; a < 4; ++a) {
                    add(rr, *slots[a], -ir.g[a]);
                    add(ri, *slots[a], -ii.g[a]);
                }
            }
            const std::size_t rm = 2 * n_bus_ + i;
            add(rm, vr_[i], 2.0 * st.v[i].v_r);
            add(rm, vi_[i], 2.0 * st.v[i].v_i);
            add(rm, s_[i], -1.0);
        }
        return jac;
    }

    Eigen::MatrixXd hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda) const override {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(num_variables(), num_variables());
        const auto st = decode(x);
        const auto add = [&](const Slot& a, const Slot& b, double v) {
            if (a.index >= 0 && b.index >= 0) h(a.index, b.index) += v;
        };
        for (std::size_t k = 0; k < p_.size(); ++k) add(p_[k], p_[k], 2.0 * grid_.generators[k].cost.c2);

        for (std::size_t i = 0; i < n_bus_; ++i) {
            const double lr = lambda[static_cast<Eigen::Index>(2 * i)];
            const double li = lambda[static_cast<Eigen::Index>(2 * i + 1)];
            const double lm = lambda[static_cast<Eigen::Index>(2 * n_bus_ + i)];
            const Slot* v_slots[2] = {&vr_[i], &vi_[i]};
            for (std::size_t k : loads_at_[i]) {
                const auto [ir, ii] = load_jets(k, st.v[i]);
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b)
                        add(*v_slots[a], *v_slots[b], lr * ir.hess(a, b) + li * ii.hess(a, b));
            }
            for (std::size_t k : gens_at_[i]) {
                const auto [ir, ii] = gen_jets(st, i, k);
                const Slot* slots[4] = {&vr_[i], &vi_[i], &p_[k], &q_[k]};
                for (int a = 0; a < 4; ++a)
                    for (int b = 0; b < 4; ++b)
                        add(*slots[a], *slots[b], -(lr * ir.hess(a, b) + li * ii.hess(a, b)));
            }
            add(vr_[i], vr_[i], 2.0 * lm);
            add(vi_[i], vi_[i], 2.0 * lm);
        }
        return h;
    }

    const Slot& vr(std::size_t i) const { return vr_[i]; }
    const Slot& vi(std::size_t i) const { return vi_[i]; }
    const Slot& s(std::size_t i) const { return s_[i]; }
    const Slot& p(std::size_t k) const { return p_[k]; }
    const Slot& q(std::size_t k) const { return q_[k]; }
    std::size_t slack() const { return index_.slack(); }

  private:
    template <class F>
    void for_each_neighbor(std::size_t i, F&& f) const {
        const auto col = static_cast<Eigen::Index>(i);
        Eigen::SparseMatrix<double>::InnerIterator itb(y_.b, col);
        for (Eigen::SparseMatrix<double>::InnerIterator itg(y_.g, col); itg; ++itg, ++itb) {
            f(static_cast<std::size_t>(itg.row()), itg.value(), itb.value());
        }
    }

    std::pair<Jet<2>, Jet<2>> load_jets(std::size_t k, const OperatingVoltage& v) const {
        return detail::drawn_current(grid_.loads[k].model, Jet<2>::variable(v.v_r, 0),
                                     Jet<2>::variable(v.v_i, 1));
    }

    std::pair<Jet<4>, Jet<4>> gen_jets(const StateVector& st, std::size_t i, std::size_t k) const {
        return detail::power_to_current(Jet<4>::variable(st.p_g[k], 2), Jet<4>::variable(st.q_g[k], 3),
                                        Jet<4>::variable(st.v[i].v_r, 0),
                                        Jet<4>::variable(st.v[i].v_i, 1));
    }

    const GridCase& grid_;
    BusIndex index_;
    AdmittanceMatrix y_;
    std::size_t n_bus_;
    std::vector<std::vector<std::size_t>> loads_at_;
    std::vector<std::vector<std::size_t>> gens_at_;
    std::vector<Slot> vr_, vi_, p_, q_, s_;
    std::vector<double> lower_, upper_;
};

double dual_of(const Slot& s, const Eigen::VectorXd& z) { return s.index >= 0 ? z[s.index] : 0.0; }

BoundActivity activity(const Slot& s, const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                       const Eigen::VectorXd& hi, const Eigen::VectorXd& zl,
                       const Eigen::VectorXd& zu) {
    if (s.index < 0) return BoundActivity::Lower;
    const auto i = s.index;
    // A bound is active when its multiplier dominates the remaining gap.
    if (std::isfinite(lo[i]) && zl[i] > x[i] - lo[i]) return BoundActivity::Lower;
    if (std::isfinite(hi[i]) && zu[i] > hi[i] - x[i]) return BoundActivity::Upper;
    return BoundActivity::Interior;
}

/// Re-creates the solver's variable and dual vectors from a candidate.
void encode_candidate(const OpfNlp& nlp, const OPFSolution& sol, std::size_t n_bus, Eigen::VectorXd& x,
                      Eigen::VectorXd& lambda, Eigen::VectorXd& zl, Eigen::VectorXd& zu) {
    x = nlp.encode(sol.x);
    const auto& mu = sol.multipliers;
    lambda = Eigen::VectorXd::Zero(nlp.num_constraints());
    zl = Eigen::VectorXd::Zero(nlp.num_variables());
    zu = Eigen::VectorXd::Zero(nlp.num_variables());
    const auto at = [](const std::vector<double>& v, std::size_t i) { return i < v.size() ? v[i] : 0.0; };
    for (std::size_t i = 0; i < n_bus; ++i) {
        lambda[static_cast<Eigen::Index>(2 * i)] = at(mu.current_r, i);
        lambda[static_cast<Eigen::Index>(2 * i + 1)] = at(mu.current_i, i);
        lambda[static_cast<Eigen::Index>(2 * n_bus + i)] = at(mu.magnitude, i);
        if (nlp.s(i).index >= 0) {
            zl[nlp.s(i).index] = at(mu.v_lower, i);
            zu[nlp.s(i).index] = at(mu.v_upper, i);
        }
    }
    for (std::size_t k = 0; k < sol.x.p_g.size(); ++k) {
        if (nlp.p(k).index >= 0) {
            zl[nlp.p(k).index] = at(mu.p_lower, k);
            zu[nlp.p(k).index] = at(mu.p_upper, k);
        }
        if (nlp.q(k).index >= 0) {
            zl[nlp.q(k).index] = at(mu.q_lower, k);
            zu[nlp.q(k).index] = at(mu.q_upper, k);
        }
    }
}

}  // namespace

std::string_view to_string(BoundActivity a) {
    switch (a) {
        case BoundActivity::Lower: return "lower";
        case BoundActivity::Upper: return "upper";
        case BoundActivity::Interior: return "interior";
    }
    return "?";
}

double KKTBlocks::max() const { return std::max({stationarity, primal, dual, complementarity}); }

double generation_cost(const GridCase& grid, const std::vector<double>& p_g) {
    double total = 0.0;
    for (std::size_t k = 0; k < grid.generators.size(); ++k) total += grid.generators[k].cost(p_g.at(k));
    return total;
}

OPFSolution solve_opf(const GridCase& grid, const OPFOptions& options) {
    if (!(options.kkt_tol > 0.0) || !(options.mu_shrink > 0.0 && options.mu_shrink < 1.0) ||
        options.max_iter < 1) {
        throw Error(ErrorCode::InvalidParameter, "OPF needs kkt_tol > 0, 0 < mu_shrink < 1, max_iter >= 1");
    }
    if (grid.generators.empty()) throw Error(ErrorCode::InvalidParameter, "OPF needs at least one generator");

    const OpfNlp nlp(grid);
    IpmOptions ipm;
    ipm.kkt_tol = options.kkt_tol;
    ipm.max_iter = options.max_iter;
    ipm.mu0 = options.mu0;
    ipm.mu_shrink = options.mu_shrink;
    ipm.mu_min = std::min(options.mu_min, options.mu0);
    const IpmResult r = solve_interior_point(nlp, ipm);

    if (r.status != IpmStatus::Converged) {
        const auto msg = fmt::format("OPF stopped after {} iterations: KKT {:.3e}, primal infeasibility {:.3e}",
                                     r.iterations, r.kkt, r.primal_infeasibility);
        if (r.primal_infeasibility > std::max(1e-4, options.kkt_tol)) throw Error(ErrorCode::Infeasible, msg);
        throw NonConvergenceError(r.iterations, r.kkt, msg);
    }

    OPFSolution sol;
    sol.x = nlp.decode(r.x);
    sol.objective = generation_cost(grid, sol.x.p_g);
    sol.kkt_residual = r.kkt;
    sol.iterations = r.iterations;
    sol.history = r.history;

    const std::size_t n = grid.buses.size();
    const Eigen::VectorXd lo = nlp.lower_bounds();
    const Eigen::VectorXd hi = nlp.upper_bounds();
    auto& m = sol.multipliers;
    for (std::size_t i = 0; i < n; ++i) {
        m.current_r.push_back(r.lambda[static_cast<Eigen::Index>(2 * i)]);
        m.current_i.push_back(r.lambda[static_cast<Eigen::Index>(2 * i + 1)]);
        m.magnitude.push_back(r.lambda[static_cast<Eigen::Index>(2 * n + i)]);
        m.v_lower.push_back(dual_of(nlp.s(i), r.z_lower));
        m.v_upper.push_back(dual_of(nlp.s(i), r.z_upper));
        sol.v_activity.push_back(activity(nlp.s(i), r.x, lo, hi, r.z_lower, r.z_upper));
    }
    for (std::size_t k = 0; k < grid.generators.size(); ++k) {
        m.p_lower.push_back(dual_of(nlp.p(k), r.z_lower));
        m.p_upper.push_back(dual_of(nlp.p(k), r.z_upper));
        m.q_lower.push_back(dual_of(nlp.q(k), r.z_lower));
        m.q_upper.push_back(dual_of(nlp.q(k), r.z_upper));
        sol.p_activity.push_back(activity(nlp.p(k), r.x, lo, hi, r.z_lower, r.z_upper));
        sol.q_activity.push_back(activity(nlp.q(k), r.x, lo, hi, r.z_lower, r.z_upper));
    }
    return sol;
}

KKTBlocks kkt_blocks(const GridCase& grid, const OPFSolution& candidate) {
    const std::size_t n = grid.buses.size();
    if (candidate.x.v.size() != n || candidate.x.p_g.size() != grid.generators.size() ||
        candidate.x.q_g.size() != grid.generators.size()) {
        throw Error(ErrorCode::InvalidParameter, "candidate dimensions do not match the case");
    }
    const OpfNlp nlp(grid);
    Eigen::VectorXd x, lambda, zl, zu;
    encode_candidate(nlp, candidate, n, x, lambda, zl, zu);
    KKTBlocks blocks = nlp_kkt_blocks(nlp, x, lambda, zl, zu, 0.0);

    double direct = std::abs(candidate.x.v[nlp.slack()].v_i);
    for (std::size_t i = 0; i < n; ++i) {
        const double vm = candidate.x.v[i].magnitude();
        direct = std::max({direct, vm - grid.buses[i].v_max, grid.buses[i].v_min - vm});
    }
    for (std::size_t k = 0; k < grid.generators.size(); ++k) {
        const auto& g = grid.generators[k];
        direct = std::max({direct, candidate.x.p_g[k] - g.p_max, g.p_min - candidate.x.p_g[k],
                           candidate.x.q_g[k] - g.q_max, g.q_min - candidate.x.q_g[k]});
    }
    blocks.primal = std::max(blocks.primal, direct);
    return blocks;
}

double kkt_residual(const GridCase& grid, const OPFSolution& candidate) {
    return kkt_blocks(grid, candidate).max();
}

}  // namespace loadopf
