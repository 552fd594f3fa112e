#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loadopf/opf.hpp"

namespace loadopf {

/// Smooth equality-constrained program with simple bounds:
///   min f(x)  s.t.  c(x) = 0,  lower <= x <= upper.
/// Infinite bounds are allowed and carry no barrier term.
class Nlp {
  public:
    virtual ~Nlp() = default;

    virtual int num_variables() const = 0;
    virtual int num_constraints() const = 0;
    virtual Eigen::VectorXd lower_bounds() const = 0;
    virtual Eigen::VectorXd upper_bounds() const = 0;
    virtual Eigen::VectorXd initial_point() const = 0;

    virtual double objective(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::VectorXd gradient(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::VectorXd constraints(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const = 0;
    /// Hessian of f(x) + lambda' c(x).
    virtual Eigen::MatrixXd hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda) const = 0;
};

struct IpmOptions {
    double kkt_tol = 1e-6;
    int max_iter = 300;
    double mu0 = 0.1;
    double mu_shrink = 0.2;
    double mu_min = 1e-10;
    double tau = 0.995;  ///< fraction-to-boundary
    /// Bounds are widened by this relative amount inside the barrier so that
    /// problems whose optimum pins a variable without interior slack stay solvable.
    double bound_relax = 1e-8;
};

enum class IpmStatus { Converged, MaxIterations, LineSearchFailure, FactorizationFailure };

struct IpmResult {
    IpmStatus status = IpmStatus::MaxIterations;
    Eigen::VectorXd x;
    Eigen::VectorXd lambda;
    Eigen::VectorXd z_lower;
    Eigen::VectorXd z_upper;
    int iterations = 0;
    double kkt = 0.0;
    double primal_infeasibility = 0.0;
    std::vector<IterationRecord> history;
};

/// Primal-dual barrier method: Newton steps on the perturbed KKT conditions,
/// inertia-corrected through a Bunch-Kaufman factorization, fraction-to-
/// boundary rule, filter line search with one second-order correction.
IpmResult solve_interior_point(const Nlp& nlp, const IpmOptions& options);

/// Infinity-norm KKT blocks of (x, lambda, z) at barrier parameter mu.
KKTBlocks nlp_kkt_blocks(const Nlp& nlp, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                         const Eigen::VectorXd& z_lower, const Eigen::VectorXd& z_upper, double mu);

/// Dense symmetric indefinite factorization that reports inertia.
class SymmetricIndefiniteSolver {
  public:
    /// Factorizes a (lower triangle read). Pivot blocks with magnitude at or
    /// below zero_tol count as zero eigenvalues. Returns false when LAPACK
    /// reports an exactly singular factor.
    bool factorize(const Eigen::MatrixXd& a, double zero_tol = 1e-14);
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

    int positive() const { return positive_; }
    int negative() const { return negative_; }
    int zero() const { return zero_; }

  private:
    Eigen::MatrixXd factor_;
    std::vector<int> pivots_;
    int positive_ = 0;
    int negative_ = 0;
    int zero_ = 0;
};

}  // namespace loadopf
