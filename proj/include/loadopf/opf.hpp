#pragma once

#include <string_view>
#include <vector>

#include "loadopf/load_models.hpp"
#include "loadopf/network.hpp"

namespace loadopf {

struct OPFOptions {
    double kkt_tol = 1e-6;
    int max_iter = 300;
    double mu0 = 0.1;
    double mu_shrink = 0.2;
    /// Barrier parameter below which the solver stops lowering it. Keeps
    /// active bounds well inside kkt_tol of their limit.
    double mu_min = 1e-10;
};

/// Optimization unknowns: every bus phasor plus each generator's output.
struct StateVector {
    std::vector<OperatingVoltage> v;
    std::vector<double> p_g;
    std::vector<double> q_g;
};

enum class BoundActivity { Lower, Upper, Interior };
std::string_view to_string(BoundActivity activity);

/// Lagrange multipliers. Equality duals are per bus: the real and imaginary
/// current balance and the squared-magnitude definition. Voltage bound duals
/// refer to the bounds on |V|^2.
struct OPFMultipliers {
    std::vector<double> current_r;
    std::vector<double> current_i;
    std::vector<double> magnitude;
    std::vector<double> v_lower;
    std::vector<double> v_upper;
    std::vector<double> p_lower;
    std::vector<double> p_upper;
    std::vector<double> q_lower;
    std::vector<double> q_upper;
};

struct KKTBlocks {
    double stationarity = 0.0;
    double primal = 0.0;
    double dual = 0.0;
    double complementarity = 0.0;

    double max() const;
};

struct IterationRecord {
    int iteration = 0;
    double mu = 0.0;
    double objective = 0.0;
    double barrier = 0.0;         ///< objective plus mu times the log barrier, after the step
    double barrier_before = 0.0;  ///< same, before the step
    double infeasibility = 0.0;   ///< l1 norm of the equality residual, after the step
    double infeasibility_before = 0.0;
    bool objective_step = false;  ///< accepted on barrier-objective decrease alone
    bool accepted = true;
    double primal_infeasibility = 0.0;  ///< infinity norm after the step
    double step = 0.0;
    double regularization = 0.0;
};

struct OPFSolution {
    StateVector x;
    double objective = 0.0;
    double kkt_residual = 0.0;
    OPFMultipliers multipliers;
    std::vector<BoundActivity> v_activity;  ///< per bus
    std::vector<BoundActivity> p_activity;  ///< per generator
    std::vector<BoundActivity> q_activity;  ///< per generator
    int iterations = 0;
    std::vector<IterationRecord> history;
};

/// Minimizes total generator cost subject to nodal current balance with the
/// case's load models, bus voltage magnitude limits and generator output
/// limits. Primal-dual interior point with log barriers on every finite bound.
/// Throws Error(Infeasible) or NonConvergenceError.
OPFSolution solve_opf(const GridCase& grid, const OPFOptions& options = {});

/// First-order optimality blocks of a candidate (infinity norms). Voltage
/// bound violation is measured directly on |V|.
KKTBlocks kkt_blocks(const GridCase& grid, const OPFSolution& candidate);
double kkt_residual(const GridCase& grid, const OPFSolution& candidate);

/// Total generator cost of a dispatch.
double generation_cost(const GridCase& grid, const std::vector<double>& p_g);

}  // namespace loadopf
