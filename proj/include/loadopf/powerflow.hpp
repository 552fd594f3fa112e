#pragma once

#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "loadopf/load_models.hpp"
#include "loadopf/network.hpp"

namespace loadopf {

struct PFOptions {
    double tol = 1e-8;   ///< infinity norm of the Newton residual
    int max_iter = 30;
    double v_init = 1.0; ///< flat-start magnitude at load buses
    /// Optional starting phasors for every bus (case order). The slack entry
    /// is ignored and replaced by its setpoint.
    std::vector<OperatingVoltage> initial;
    bool enforce_q_limits = true;
    /// Slack applied before a reactive limit counts as violated.
    double q_limit_tol = 1e-6;
};

struct PFSolution {
    std::vector<OperatingVoltage> v;
    double slack_p = 0.0;
    double slack_q = 0.0;
    std::vector<double> gen_p;  ///< per generator, case order
    std::vector<double> gen_q;
    int iterations = 0;
    double residual = 0.0;
    /// Some bus magnitude fell below 0.5 p.u.; the root may not be the operable one.
    bool low_voltage = false;
    std::vector<int> q_limited_buses;

    double total_generation() const;
};

/// Nodal current mismatch sum(Y V) + I_load - I_gen, two rows (real, imaginary)
/// per non-slack bus in case order. gen_q holds per-generator reactive output;
/// empty means zero.
std::vector<double> residual(const GridCase& grid, std::span<const OperatingVoltage> v,
                             std::span<const double> gen_q = {});

/// Analytic derivative of residual() with respect to (v_r, v_i) of every
/// non-slack bus, same row/column ordering.
Eigen::SparseMatrix<double> jacobian(const GridCase& grid, std::span<const OperatingVoltage> v,
                                     std::span<const double> gen_q = {});

/// Damped Newton-Raphson in rectangular coordinates. Generator buses hold
/// their magnitude setpoint with reactive output free until a Q limit binds.
/// Throws NonConvergenceError or Error(VoltageCollapse).
PFSolution solve_pf(const GridCase& grid, const PFOptions& options = {});

}  // namespace loadopf
