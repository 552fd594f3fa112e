#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "loadopf/errors.hpp"
#include "loadopf/network.hpp"
#include "test_support.hpp"

using namespace loadopf;
using namespace loadopf::testing;
using doctest::Approx;

namespace {

ErrorCode code_of(const GridCase& c, std::string* message = nullptr) {
    try {
        validate_case(c);
    } catch (const Error& e) {
        if (message) *message = e.what();
        return e.code();
    }
    FAIL("validation unexpectedly succeeded");
    return ErrorCode::ValidationError;
}

}  // namespace

TEST_CASE("validate_case accepts a minimal case") {
    const auto c = validate_case(two_bus(0.01, 0.1, PQParams{1, 0}));
    CHECK(c.buses.size() == 2);
}

TEST_CASE("validate_case names the offending element") {
    std::string msg;

    auto dangling = two_bus(0.01, 0.1, PQParams{1, 0});
    dangling.branches.push_back({1, 99, 0.01, 0.1, 0.0});
    CHECK(code_of(dangling, &msg) == ErrorCode::DanglingReference);
    CHECK(msg.find("99") != std::string::npos);

    auto two_slack = two_bus(0.01, 0.1, PQParams{1, 0});
    two_slack.buses[1].kind = BusKind::Slack;
    CHECK(code_of(two_slack, &msg) == ErrorCode::NoSlack);
    CHECK(msg.find("2") != std::string::npos);

    auto no_slack = two_bus(0.01, 0.1, PQParams{1, 0});
    no_slack.buses[0].kind = BusKind::Generator;
    CHECK(code_of(no_slack) == ErrorCode::NoSlack);

    auto duplicate = two_bus(0.01, 0.1, PQParams{1, 0});
    duplicate.buses[1].id = 1;
    CHECK(code_of(duplicate, &msg) == ErrorCode::DuplicateBusId);

    auto island = two_bus(0.01, 0.1, PQParams{1, 0});
    island.buses.push_back({3, BusKind::Load, 0.9, 1.1, 1.0});
    island.buses.push_back({4, BusKind::Load, 0.9, 1.1, 1.0});
    island.branches.push_back({3, 4, 0.01, 0.1, 0.0});
    CHECK(code_of(island, &msg) == ErrorCode::Disconnected);
    CHECK(msg.find("bus 3") != std::string::npos);

    auto bad_branch = two_bus(0.0, 0.0, PQParams{1, 0});
    CHECK(code_of(bad_branch) == ErrorCode::InvalidParameter);

    auto bad_bounds = two_bus(0.01, 0.1, PQParams{1, 0});
    bad_bounds.buses[1].v_min = 1.2;
    CHECK(code_of(bad_bounds) == ErrorCode::InvalidParameter);

    auto gen_on_load = two_bus(0.01, 0.1, PQParams{1, 0});
    gen_on_load.generators.push_back(Generator{2});
    CHECK(code_of(gen_on_load) == ErrorCode::InvalidParameter);
}

TEST_CASE("build_admittance: single branch entries") {
    const auto pure_x = build_admittance(two_bus(0.0, 0.1, PQParams{}));
    CHECK(pure_x.at(0, 1).real() == Approx(0.0));
    CHECK(pure_x.at(0, 1).imag() == Approx(10.0));
    CHECK(pure_x.at(0, 0).imag() == Approx(-10.0));

    const auto pure_r = build_admittance(two_bus(1.0, 0.0, PQParams{}));
    CHECK(pure_r.at(0, 1) == std::complex<double>(-1.0, 0.0));
    CHECK(pure_r.at(0, 0) == std::complex<double>(1.0, 0.0));

    const auto plain = build_admittance(two_bus(0.01, 0.1, PQParams{}));
    const auto charged = build_admittance(two_bus(0.01, 0.1, PQParams{}, 0.02));
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(charged.at(i, i).imag() - plain.at(i, i).imag() == Approx(0.01));
        CHECK(charged.at(i, i).real() == plain.at(i, i).real());
    }
    CHECK(charged.at(0, 1) == plain.at(0, 1));
}

TEST_CASE("property: admittance rows sum to the bus shunt") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const auto c = validate_case(random_case(rng, trial % 2 == 0));
        const auto y = build_admittance(c);
        const BusIndex index(c);
        std::vector<double> shunt(c.buses.size(), 0.0);
        for (const auto& br : c.branches) {
            shunt[index.at(br.from)] += br.b_sh / 2;
            shunt[index.at(br.to)] += br.b_sh / 2;
        }
        for (std::size_t i = 0; i < y.size(); ++i) {
            std::complex<double> sum = 0.0;
            for (std::size_t j = 0; j < y.size(); ++j) sum += y.at(i, j);
            CHECK(std::abs(sum.real()) <= 1e-9);
            CHECK(std::abs(sum.imag() - shunt[i]) <= 1e-9);
            CHECK(y.at(i, 0) == y.at(0, i));
        }
    }
}

TEST_CASE("property: admittance assembly is permutation-equivariant") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 30; ++trial) {
        const auto c = validate_case(random_case(rng, false));
        std::vector<std::size_t> perm(c.buses.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        GridCase shuffled = c;
        for (std::size_t k = 0; k < perm.size(); ++k) shuffled.buses[k] = c.buses[perm[k]];
        const auto y = build_admittance(c);
        const auto ys = build_admittance(shuffled);
        for (std::size_t a = 0; a < perm.size(); ++a)
            for (std::size_t b = 0; b < perm.size(); ++b) CHECK(ys.at(a, b) == y.at(perm[a], perm[b]));
    }
}
