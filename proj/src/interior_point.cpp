#include "loadopf/interior_point.hpp"

#include <algorithm>
#include <utility>
#include <vector>
#include <cmath>
#include <limits>

#include <lapacke.h>

namespace loadopf {

namespace {

constexpr double kKappaSigma = 1e10;
constexpr double kMinStep = 1e-14;
// Filter line-search constants.
constexpr double kGammaTheta = 1e-5;
constexpr double kGammaPhi = 1e-8;
constexpr double kEtaPhi = 1e-8;
constexpr double kSPhi = 2.3;
constexpr double kSTheta = 1.1;
constexpr double kSoftRestoration = 0.9999;
constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kRoundoff = 10.0 * kEps;

double norm_inf(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

/// Finite-bound bookkeeping for one problem.
struct Bounds {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    Eigen::Array<bool, Eigen::Dynamic, 1> has_lo;
    Eigen::Array<bool, Eigen::Dynamic, 1> has_hi;

    explicit Bounds(const Nlp& nlp, double relax = 0.0) : lo(nlp.lower_bounds()), hi(nlp.upper_bounds()) {
        has_lo = lo.array().isFinite();
        has_hi = hi.array().isFinite();
        for (Eigen::Index i = 0; i < lo.size(); ++i) {
            if (has_lo[i]) lo[i] -= relax * std::max(1.0, std::abs(lo[i]));
            if (has_hi[i]) hi[i] += relax * std::max(1.0, std::abs(hi[i]));
        }
    }

    Eigen::VectorXd gap_lo(const Eigen::VectorXd& x) const {
        return has_lo.select(x - lo, Eigen::VectorXd::Ones(x.size()));
    }
    Eigen::VectorXd gap_hi(const Eigen::VectorXd& x) const {
        return has_hi.select(hi - x, Eigen::VectorXd::Ones(x.size()));
    }

    double barrier(const Eigen::VectorXd& x) const {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (has_lo[i]) sum -= std::log(x[i] - lo[i]);
            if (has_hi[i]) sum -= std::log(hi[i] - x[i]);
        }
        return sum;
    }

    /// Pushes x strictly inside its bounds.
    void make_interior(Eigen::VectorXd& x) const {
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double width = hi[i] - lo[i];
            if (has_lo[i]) {
                double push = 1e-2 * std::max(1.0, std::abs(lo[i]));
                if (has_hi[i]) push = std::min(push, 1e-2 * width);
                x[i] = std::max(x[i], lo[i] + push);
            }
            if (has_hi[i]) {
                double push = 1e-2 * std::max(1.0, std::abs(hi[i]));
                if (has_lo[i]) push = std::min(push, 1e-2 * width);
                x[i] = std::min(x[i], hi[i] - push);
            }
        }
    }
};

/// Largest step in (0, 1] keeping v + a dv >= (1 - tau) v for the masked entries.
double fraction_to_boundary(const Eigen::VectorXd& v, const Eigen::VectorXd& dv,
                            const Eigen::Array<bool, Eigen::Dynamic, 1>& mask, double tau) {
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (mask[i] && dv[i] < 0.0) alpha = std::min(alpha, -tau * v[i] / dv[i]);
    }
    return alpha;
}

/// Pairs (infeasibility, barrier objective) that later iterates must improve on.
class Filter {
  public:
    void clear() { entries_.clear(); }
    void add(double theta, double phi) { entries_.emplace_back(theta, phi); }
    bool blocks(double theta, double phi) const {
        return std::any_of(entries_.begin(), entries_.end(),
                           [&](const auto& e) { return theta >= e.first && phi >= e.second; });
    }

  private:
    std::vector<std::pair<double, double>> entries_;
};

struct KktSystem {
    SymmetricIndefiniteSolver solver;
    double delta_w = 0.0;
    double delta_c = 0.0;
};

/// Assembles [[W + Sigma + dw I, J'], [J, -dc I]] and factorizes it until the
/// inertia is (n, m, 0). Returns false if no regularization succeeds.
bool factorize_kkt(const Eigen::MatrixXd& w, const Eigen::VectorXd& sigma, const Eigen::MatrixXd& jac,
                   double& delta_w_last, KktSystem& kkt) {
    const auto n = w.rows();
    const auto m = jac.rows();
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n + m, n + m);
    k.topLeftCorner(n, n) = w;
    k.topLeftCorner(n, n).diagonal() += sigma;
    k.bottomLeftCorner(m, n) = jac;
    k.topRightCorner(n, m) = jac.transpose();

    // Pivot size below which the factor counts as singular. Sigma is left out
    // of the scale because it grows without bound near active bounds.
    double scale = 1.0;
    if (w.size() > 0) scale = std::max(scale, w.cwiseAbs().maxCoeff());
    if (jac.size() > 0) scale = std::max(scale, jac.cwiseAbs().maxCoeff());
    const double zero_tol = 1e-14 * scale;

    const auto attempt = [&](double dw, double dc) {
        Eigen::MatrixXd kk = k;
        kk.topLeftCorner(n, n).diagonal().array() += dw;
        kk.bottomRightCorner(m, m).diagonal().array() -= dc;
        const bool ok = kkt.solver.factorize(kk, zero_tol);
        return ok && kkt.solver.positive() == n && kkt.solver.negative() == m && kkt.solver.zero() == 0;
    };

    kkt.delta_w = 0.0;
    kkt.delta_c = 0.0;
    if (attempt(0.0, 0.0)) return true;
    if (kkt.solver.zero() > 0) kkt.delta_c = 1e-8;
    if (kkt.delta_c > 0.0 && attempt(0.0, kkt.delta_c)) return true;

    double dw = delta_w_last == 0.0 ? 1e-4 : std::max(1e-20, delta_w_last / 3.0);
    const double growth = delta_w_last == 0.0 ? 100.0 : 8.0;
    while (dw <= 1e40) {
        if (attempt(dw, kkt.delta_c)) {
            kkt.delta_w = dw;
            delta_w_last = dw;
            return true;
        }
        // Heavy primal regularization that still fails points at dependent
        // constraints rather than negative curvature.
        if (dw > 1e8 && kkt.delta_c == 0.0) {
            kkt.delta_c = 1e-8;
            continue;
        }
        dw *= growth;
    }
    return false;
}

}  // namespace

bool SymmetricIndefiniteSolver::factorize(const Eigen::MatrixXd& a, double zero_tol) {
    const auto n = static_cast<lapack_int>(a.rows());
    factor_ = a;
    pivots_.assign(static_cast<std::size_t>(n), 0);
    const lapack_int info =
        LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', n, factor_.data(), n, pivots_.data());
    positive_ = negative_ = zero_ = 0;
    if (info < 0) return false;

    const auto count = [&](double eig) {
        if (std::abs(eig) <= zero_tol) ++zero_;
        else if (eig > 0) ++positive_;
        else ++negative_;
    };
    for (lapack_int k = 0; k < n;) {
        if (pivots_[static_cast<std::size_t>(k)] > 0) {
            count(factor_(k, k));
            k += 1;
        } else {
            const double p = factor_(k, k);
            const double q = factor_(k + 1, k);
            const double r = factor_(k + 1, k + 1);
            const double mid = 0.5 * (p + r);
            const double rad = std::hypot(0.5 * (p - r), q);
            count(mid + rad);
            count(mid - rad);
            k += 2;
        }
    }
    return info == 0;
}

Eigen::VectorXd SymmetricIndefiniteSolver::solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = rhs;
    const auto n = static_cast<lapack_int>(factor_.rows());
    LAPACKE_dsytrs(LAPACK_COL_MAJOR, 'L', n, 1, factor_.data(), n, pivots_.data(), x.data(), n);
    return x;
}

namespace {

KKTBlocks kkt_blocks_within(const Nlp& nlp, const Bounds& b, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                            const Eigen::VectorXd& z_lower, const Eigen::VectorXd& z_upper, double mu) {
    KKTBlocks out;
    const Eigen::VectorXd c = nlp.constraints(x);
    Eigen::VectorXd stat = nlp.gradient(x) - z_lower + z_upper;
    if (c.size() > 0) stat += nlp.jacobian(x).transpose() * lambda;
    out.stationarity = norm_inf(stat);

    double bound_violation = 0.0;
    double comp = 0.0;
    double dual = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (b.has_lo[i]) {
            bound_violation = std::max(bound_violation, b.lo[i] - x[i]);
            comp = std::max(comp, std::abs((x[i] - b.lo[i]) * z_lower[i] - mu));
            dual = std::max(dual, -z_lower[i]);
        }
        if (b.has_hi[i]) {
            bound_violation = std::max(bound_violation, x[i] - b.hi[i]);
            comp = std::max(comp, std::abs((b.hi[i] - x[i]) * z_upper[i] - mu));
            dual = std::max(dual, -z_upper[i]);
        }
    }
    out.primal = std::max(norm_inf(c), bound_violation);
    out.dual = dual;
    out.complementarity = comp;
    return out;
}

}  // namespace

KKTBlocks nlp_kkt_blocks(const Nlp& nlp, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                         const Eigen::VectorXd& z_lower, const Eigen::VectorXd& z_upper, double mu) {
    return kkt_blocks_within(nlp, Bounds(nlp), x, lambda, z_lower, z_upper, mu);
}

IpmResult solve_interior_point(const Nlp& nlp, const IpmOptions& opt) {
    const int n = nlp.num_variables();
    const int m = nlp.num_constraints();
    const Bounds bounds(nlp, opt.bound_relax);

    IpmResult res;
    Eigen::VectorXd x = nlp.initial_point();
    bounds.make_interior(x);
    Eigen::VectorXd zl = bounds.has_lo.select(Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n));
    Eigen::VectorXd zu = bounds.has_hi.select(Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n));
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);

    // Least-squares equality multipliers; discarded when implausibly large.
    if (m > 0) {
        const Eigen::MatrixXd jac = nlp.jacobian(x);
        KktSystem ls;
        double unused = 0.0;
        if (factorize_kkt(Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n), jac, unused, ls)) {
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);
            rhs.head(n) = -(nlp.gradient(x) - zl + zu);
            const Eigen::VectorXd sol = ls.solver.solve(rhs);
            if (norm_inf(sol.tail(m)) <= 1e3) lambda = sol.tail(m);
        }
    }

    const auto infeasibility = [&](const Eigen::VectorXd& y) {
        return m > 0 ? nlp.constraints(y).lpNorm<1>() : 0.0;
    };
    const double theta_start = std::max(1.0, infeasibility(x));
    const double theta_max = 1e4 * theta_start;
    const double theta_min = 1e-4 * theta_start;

    double mu = opt.mu0;
    double delta_w_last = 0.0;
    int stalled = 0;
    Filter filter;

    for (int iter = 1;; ++iter) {
        const KKTBlocks e0 = kkt_blocks_within(nlp, bounds, x, lambda, zl, zu, 0.0);
        res.kkt = e0.max();
        res.primal_infeasibility = e0.primal;
        if (res.kkt <= opt.kkt_tol && (mu <= opt.mu_min || res.kkt <= 1e-2 * opt.kkt_tol)) {
            res.status = IpmStatus::Converged;
            break;
        }
        if (iter > opt.max_iter) {
            res.status = IpmStatus::MaxIterations;
            break;
        }
        while (mu > opt.mu_min && kkt_blocks_within(nlp, bounds, x, lambda, zl, zu, mu).max() < mu) {
            mu = std::max(opt.mu_min, opt.mu_shrink * mu);
            filter.clear();
        }

        const Eigen::VectorXd gl = bounds.gap_lo(x);
        const Eigen::VectorXd gu = bounds.gap_hi(x);
        const Eigen::VectorXd grad = nlp.gradient(x);
        const Eigen::VectorXd c = nlp.constraints(x);
        const Eigen::MatrixXd jac = nlp.jacobian(x);
        const Eigen::VectorXd sigma = zl.cwiseQuotient(gl) + zu.cwiseQuotient(gu);
        const Eigen::VectorXd barrier_grad =
            grad - bounds.has_lo.select(mu * gl.cwiseInverse(), 0.0).matrix() +
            bounds.has_hi.select(mu * gu.cwiseInverse(), 0.0).matrix();

        KktSystem kkt;
        const Eigen::MatrixXd w = nlp.hessian(x, lambda);
        if (!factorize_kkt(w, sigma, jac, delta_w_last, kkt)) {
            res.status = IpmStatus::FactorizationFailure;
            break;
        }
        Eigen::VectorXd rhs(n + m);
        rhs.head(n) = -(barrier_grad + jac.transpose() * lambda);
        rhs.tail(m) = -c;
        const Eigen::VectorXd step = kkt.solver.solve(rhs);
        const Eigen::VectorXd dx = step.head(n);
        const Eigen::VectorXd dlambda = step.tail(m);
        const Eigen::VectorXd dzl = bounds.has_lo.select(
            mu * gl.cwiseInverse() - zl - zl.cwiseQuotient(gl).cwiseProduct(dx), 0.0);
        const Eigen::VectorXd dzu = bounds.has_hi.select(
            mu * gu.cwiseInverse() - zu + zu.cwiseQuotient(gu).cwiseProduct(dx), 0.0);

        const double alpha_max = std::min(fraction_to_boundary(gl, dx, bounds.has_lo, opt.tau),
                                          fraction_to_boundary(gu, -dx, bounds.has_hi, opt.tau));
        const double alpha_z = std::min(fraction_to_boundary(zl, dzl, bounds.has_lo, opt.tau),
                                        fraction_to_boundary(zu, dzu, bounds.has_hi, opt.tau));

        // Filter line search on (infeasibility, barrier objective).
        const auto barrier_objective = [&](const Eigen::VectorXd& y) {
            return nlp.objective(y) + mu * bounds.barrier(y);
        };
        const double theta0 = c.lpNorm<1>();
        const double phi0 = barrier_objective(x);
        const double slope = barrier_grad.dot(dx);
        bool objective_step = false;
        const auto acceptable = [&](const Eigen::VectorXd& y, double alpha) {
            const double th = infeasibility(y);
            const double ph = barrier_objective(y);
            if (!std::isfinite(ph) || th > theta_max || filter.blocks(th, ph)) return false;
            const bool switching = slope < 0.0 && alpha * std::pow(-slope, kSPhi) > std::pow(theta0, kSTheta);
            if (switching && theta0 <= theta_min) {
                objective_step = true;
                return ph <= phi0 + kEtaPhi * alpha * slope + kRoundoff * std::abs(phi0);
            }
            objective_step = false;
            return th <= (1.0 - kGammaTheta) * theta0 || ph <= phi0 - kGammaPhi * theta0 + kRoundoff * std::abs(phi0);
        };

        double alpha = alpha_max;
        Eigen::VectorXd x_new = x + alpha * dx;
        // Steps at roundoff level carry no information for the line search.
        const bool tiny = (dx.array().abs() / (1.0 + x.array().abs())).maxCoeff() < 10.0 * kEps;
        bool accepted = tiny || acceptable(x_new, alpha);
        if (tiny) objective_step = true;
        if (!accepted && m > 0 && infeasibility(x_new) >= theta0) {
            // Second-order correction against the Maratos effect.
            Eigen::VectorXd soc_rhs(n + m);
            soc_rhs.head(n) = rhs.head(n);
            soc_rhs.tail(m) = -(alpha * c + nlp.constraints(x_new));
            const Eigen::VectorXd dx_soc = kkt.solver.solve(soc_rhs).head(n);
            const double alpha_soc = std::min(fraction_to_boundary(gl, dx_soc, bounds.has_lo, opt.tau),
                                              fraction_to_boundary(gu, -dx_soc, bounds.has_hi, opt.tau));
            const Eigen::VectorXd x_soc = x + alpha_soc * dx_soc;
            if (acceptable(x_soc, alpha)) {
                x_new = x_soc;
                accepted = true;
            }
        }
        const double alpha_first = alpha;
        while (!accepted && alpha > kMinStep) {
            alpha *= 0.5;
            x_new = x + alpha * dx;
            accepted = acceptable(x_new, alpha);
        }
        if (!accepted) {
            // Soft restoration: take the full step if it reduces the
            // primal-dual error of the barrier problem.
            const Eigen::VectorXd xt = x + alpha_first * dx;
            const double before = kkt_blocks_within(nlp, bounds, x, lambda, zl, zu, mu).max();
            const double after = kkt_blocks_within(nlp, bounds, xt, lambda + alpha_first * dlambda,
                                                   zl + alpha_z * dzl, zu + alpha_z * dzu, mu)
                                     .max();
            if (std::isfinite(after) && after <= kSoftRestoration * before) {
                alpha = alpha_first;
                x_new = xt;
                accepted = true;
                objective_step = true;
            }
        }
        if (!accepted) {
            if (++stalled > 5) {
                res.status = IpmStatus::LineSearchFailure;
                break;
            }
        } else {
            stalled = 0;
            if (!objective_step) filter.add((1.0 - kGammaTheta) * theta0, phi0 - kGammaPhi * theta0);
        }

        x = x_new;
        lambda += alpha * dlambda;
        zl += alpha_z * dzl;
        zu += alpha_z * dzu;
        // Keep the duals within a factor of the primal-dual central path.
        const Eigen::VectorXd ngl = bounds.gap_lo(x);
        const Eigen::VectorXd ngu = bounds.gap_hi(x);
        for (int i = 0; i < n; ++i) {
            if (bounds.has_lo[i])
                zl[i] = std::clamp(zl[i], mu / (kKappaSigma * ngl[i]), kKappaSigma * mu / ngl[i]);
            if (bounds.has_hi[i])
                zu[i] = std::clamp(zu[i], mu / (kKappaSigma * ngu[i]), kKappaSigma * mu / ngu[i]);
        }

        IterationRecord rec;
        rec.iteration = iter;
        rec.mu = mu;
        rec.objective = nlp.objective(x);
        rec.barrier_before = phi0;
        rec.barrier = barrier_objective(x);
        rec.infeasibility_before = theta0;
        rec.infeasibility = infeasibility(x);
        rec.objective_step = accepted && objective_step;
        rec.accepted = accepted;
        rec.primal_infeasibility = m > 0 ? norm_inf(nlp.constraints(x)) : 0.0;
        rec.step = alpha;
        rec.regularization = kkt.delta_w;
        res.history.push_back(rec);
        res.iterations = iter;
    }

    res.x = x;
    res.lambda = lambda;
    res.z_lower = zl;
    res.z_upper = zu;
    return res;
}

}  // namespace loadopf
