#include <doctest.h>

#include <random>

#include "loadopf/errors.hpp"
#include "loadopf/interior_point.hpp"
#include "loadopf/opf.hpp"
#include "opf_oracle.hpp"
#include "test_support.hpp"

using namespace loadopf;
using namespace loadopf::testing;
using doctest::Approx;

namespace {

/// min (x0 - 2)^2 + (x1 - 1)^2  s.t.  x0 + x1 = 1,  0 <= x <= 0.8
class BoxedQuadratic final : public Nlp {
  public:
    int num_variables() const override { return 2; }
    int num_constraints() const override { return 1; }
    Eigen::VectorXd lower_bounds() const override { return Eigen::Vector2d(0.0, 0.0); }
    Eigen::VectorXd upper_bounds() const override { return Eigen::Vector2d(0.8, 0.8); }
    Eigen::VectorXd initial_point() const override { return Eigen::Vector2d(0.5, 0.5); }
    double objective(const Eigen::VectorXd& x) const override {
        return (x[0] - 2) * (x[0] - 2) + (x[1] - 1) * (x[1] - 1);
    }
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override {
        return Eigen::Vector2d(2 * (x[0] - 2), 2 * (x[1] - 1));
    }
    Eigen::VectorXd constraints(const Eigen::VectorXd& x) const override {
        return Eigen::VectorXd::Constant(1, x[0] + x[1] - 1);
    }
    Eigen::MatrixXd jacobian(const Eigen::VectorXd&) const override { return Eigen::MatrixXd::Ones(1, 2); }
    Eigen::MatrixXd hessian(const Eigen::VectorXd&, const Eigen::VectorXd&) const override {
        return 2.0 * Eigen::MatrixXd::Identity(2, 2);
    }
};

/// min -x0 x1  s.t.  x0^2 + x1^2 = 2: indefinite Hessian at the start.
class Circle final : public Nlp {
  public:
    int num_variables() const override { return 2; }
    int num_constraints() const override { return 1; }
    Eigen::VectorXd lower_bounds() const override { return Eigen::Vector2d(0.0, 0.0); }
    Eigen::VectorXd upper_bounds() const override { return Eigen::Vector2d(kInf, kInf); }
    Eigen::VectorXd initial_point() const override { return Eigen::Vector2d(1.3, 0.2); }
    double objective(const Eigen::VectorXd& x) const override { return -x[0] * x[1]; }
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override { return Eigen::Vector2d(-x[1], -x[0]); }
    Eigen::VectorXd constraints(const Eigen::VectorXd& x) const override {
        return Eigen::VectorXd::Constant(1, x.squaredNorm() - 2);
    }
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const override { return 2.0 * x.transpose(); }
    Eigen::MatrixXd hessian(const Eigen::VectorXd&, const Eigen::VectorXd& l) const override {
        Eigen::Matrix2d h;
        h << 2 * l[0], -1, -1, 2 * l[0];
        return h;
    }
};

double max_load_bus_magnitude_gap(const GridCase& c, const OPFSolution& a, const OPFSolution& b) {
    double gap = kInf;
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        if (c.buses[i].kind != BusKind::Load) continue;
        gap = std::min(gap, a.x.v[i].magnitude() - b.x.v[i].magnitude());
    }
    return gap;
}

}  // namespace

TEST_CASE("interior point: active bound with an equality") {
    const auto r = solve_interior_point(BoxedQuadratic{}, IpmOptions{});
    REQUIRE(r.status == IpmStatus::Converged);
    CHECK(r.x[0] == Approx(0.8).epsilon(1e-8));
    CHECK(r.x[1] == Approx(0.2).epsilon(1e-8));
    // Multiplier of x0 <= 0.8: 2(x0 - 2) + lambda + z_u = 0 with lambda = -2(x1 - 1).
    CHECK(r.lambda[0] == Approx(1.6).epsilon(1e-6));
    CHECK(r.z_upper[0] == Approx(0.8).epsilon(1e-6));
    CHECK(r.kkt <= 1e-6);
}

TEST_CASE("interior point: nonconvex objective on a circle") {
    const auto r = solve_interior_point(Circle{}, IpmOptions{});
    REQUIRE(r.status == IpmStatus::Converged);
    CHECK(r.x[0] == Approx(1.0).epsilon(1e-7));
    CHECK(r.x[1] == Approx(1.0).epsilon(1e-7));
}

TEST_CASE("symmetric indefinite solver reports inertia") {
    Eigen::Matrix3d a;
    a << 2, 1, 0, 1, -3, 0, 0, 0, 0;
    SymmetricIndefiniteSolver s;
    s.factorize(a);
    CHECK(s.positive() == 1);
    CHECK(s.negative() == 1);
    CHECK(s.zero() == 1);

    a(2, 2) = 5;
    REQUIRE(s.factorize(a));
    CHECK(s.positive() == 2);
    const Eigen::Vector3d x = s.solve(Eigen::Vector3d(1, 2, 3));
    CHECK((a * x - Eigen::Vector3d(1, 2, 3)).norm() <= 1e-12);
}

TEST_CASE("solve_opf: admittance load settles at the lower voltage bound") {
    const auto c = two_bus(1e-6, 0.05, YParams{1.0, 0.0});
    const auto sol = solve_opf(c);
    CHECK(sol.x.v[1].magnitude() == Approx(0.94).epsilon(1e-6));
    CHECK(sol.objective == Approx(0.8836).epsilon(1e-4));
    CHECK(sol.v_activity[1] == BoundActivity::Lower);
    CHECK(sol.kkt_residual <= 1e-6);

    const auto oracle = grid_search_opf(c);
    REQUIRE(oracle);
    CHECK(std::abs(sol.objective - oracle->objective) <= 1e-3);
}

TEST_CASE("solve_opf: constant-power load settles at the upper voltage bound") {
    const auto c = two_bus(0.05, 0.1, PQParams{1.0, 0.3});
    const auto sol = solve_opf(c);
    CHECK(sol.x.v[1].magnitude() <= 1.06 + 1e-9);
    CHECK(std::max(sol.x.v[0].magnitude(), sol.x.v[1].magnitude()) == Approx(1.06).epsilon(1e-6));
    CHECK(sol.v_activity[0] == BoundActivity::Upper);
}

TEST_CASE("solve_opf: no load means no generation") {
    const auto sol = solve_opf(two_bus(0.02, 0.2, PQParams{0.0, 0.0}));
    CHECK(std::abs(sol.x.p_g[0]) <= 1e-6);
    CHECK(std::abs(sol.objective) <= 1e-6);
}

TEST_CASE("solve_opf: objective matches the brute-force setpoint sweep") {
    const std::vector<LoadModel> loads = {PQParams{1.2, 0.4}, YParams{1.1, -0.35}, BIGParams{0.6, -0.2, 0.6, -0.2},
                                          ZIPParams{0.5, 0.1, 0.3, 0.1, 0.4, 0.1}};
    for (const auto& l : loads) {
        CAPTURE(to_string(kind_of(l)));
        const auto c = two_bus(0.04, 0.12, l, 0.02);
        const auto sol = solve_opf(c);
        const auto oracle = grid_search_opf(c);
        REQUIRE(oracle);
        CHECK(std::abs(sol.objective - oracle->objective) <= 1e-3);
        CHECK(sol.objective <= oracle->objective + 1e-7);
        CHECK(sol.x.v[0].magnitude() == Approx(oracle->v_slack).epsilon(2e-3));
    }
}

TEST_CASE("solve_opf: constant-power loads sit above admittance loads of equal nominal power") {
    const auto pq = three_bus(PQParams{0.9, 0.3}, PQParams{0.6, 0.2});
    const auto y = three_bus(equivalent_admittance(0.9, 0.3), equivalent_admittance(0.6, 0.2));
    const auto a = solve_opf(pq);
    const auto b = solve_opf(y);
    CHECK(max_load_bus_magnitude_gap(pq, a, b) > 0.0);
    CHECK(a.v_activity[0] == BoundActivity::Upper);
    CHECK(b.v_activity[2] == BoundActivity::Lower);
    for (const auto* s : {&a, &b}) {
        const auto& c = s == &a ? pq : y;
        const auto oracle = grid_search_opf(c);
        REQUIRE(oracle);
        CHECK(std::abs(s->objective - oracle->objective) <= 1e-3);
    }
}

TEST_CASE("kkt_residual: solution passes, perturbed dispatch fails") {
    auto c = two_bus(0.04, 0.12, ZIPParams{0.5, 0.1, 0.3, 0.1, 0.4, 0.1});
    c.generators[0].cost = {0.5, 2.0, 0.1};
    const auto sol = solve_opf(c);
    CHECK(kkt_residual(c, sol) <= 1e-6);
    CHECK(sol.objective == Approx(generation_cost(c, sol.x.p_g)));

    auto bumped = sol;
    bumped.x.p_g[0] += 0.1;
    const auto blocks = kkt_blocks(c, bumped);
    CHECK(blocks.stationarity > 1e-6);
    CHECK(blocks.primal > 1e-6);

    auto high = sol;
    for (auto& v : high.x.v) {
        v.v_r *= 1.1;
        v.v_i *= 1.1;
    }
    CHECK(kkt_blocks(c, high).primal >= 0.01);
}

TEST_CASE("solve_opf: errors") {
    OPFOptions bad;
    bad.mu_shrink = 1.0;
    CHECK_THROWS_AS(solve_opf(two_bus(0.04, 0.12, PQParams{1, 0}), bad), Error);

    // Demand far beyond what the line can carry inside the voltage band.
    try {
        solve_opf(two_bus(0.1, 0.3, PQParams{8.0, 2.0}));
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK((e.code() == ErrorCode::Infeasible || e.code() == ErrorCode::NonConvergence));
    }
}

TEST_CASE("property: random networks solve to a certified optimum") {
    std::mt19937_64 rng(53);
    for (int trial = 0; trial < 15; ++trial) {
        CAPTURE(trial);
        auto c = validate_case(random_case(rng, trial % 3 == 0));
        for (auto& g : c.generators) g.cost = {0.2, 1.0 + 0.5 * static_cast<double>(g.bus), 0.0};
        const auto sol = solve_opf(c);
        CHECK(kkt_residual(c, sol) <= 1e-6);
        for (std::size_t i = 0; i < c.buses.size(); ++i) {
            const double m = sol.x.v[i].magnitude();
            CHECK(m >= c.buses[i].v_min - 1e-7);
            CHECK(m <= c.buses[i].v_max + 1e-7);
        }
        // Every accepted step improves feasibility or the barrier objective.
        for (const auto& rec : sol.history) {
            if (!rec.accepted) continue;
            const double slack = 1e-14 * std::abs(rec.barrier_before);
            if (rec.objective_step) CHECK(rec.barrier <= rec.barrier_before + slack);
            else CHECK((rec.infeasibility < rec.infeasibility_before || rec.barrier <= rec.barrier_before + slack));
        }

        // A feasible power-flow point can never beat the optimum.
        PFOptions opts;
        opts.enforce_q_limits = false;
        const auto pf = solve_pf(c, opts);
        bool feasible = true;
        for (std::size_t i = 0; i < c.buses.size(); ++i) {
            const double m = pf.v[i].magnitude();
            feasible = feasible && m >= c.buses[i].v_min && m <= c.buses[i].v_max;
        }
        if (feasible) CHECK(sol.objective <= generation_cost(c, pf.gen_p) + 1e-7);
    }
}
