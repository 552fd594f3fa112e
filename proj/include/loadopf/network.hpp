#pragma once

#include <complex>
#include <cstddef>
#include <limits>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/SparseCore>

#include "loadopf/load_models.hpp"

namespace loadopf {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class BusKind { Slack, Generator, Load };

std::string_view to_string(BusKind kind);
BusKind parse_bus_kind(std::string_view name);

struct Bus {
    int id = 0;
    BusKind kind = BusKind::Load;
    double v_min = 0.94;
    double v_max = 1.06;
    /// Voltage magnitude setpoint used by power flow at slack and generator buses.
    double v_set = 1.0;
};

/// Pi-model line.
struct Branch {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double b_sh = 0.0;  ///< total line charging, split evenly between both ends
};

/// c2 p^2 + c1 p + c0 in $/h with p in p.u.
struct CostCurve {
    double c2 = 0.0;
    double c1 = 1.0;
    double c0 = 0.0;

    double operator()(double p) const { return (c2 * p + c1) * p + c0; }
};

struct Generator {
    int bus = 0;
    double p_min = 0.0;
    double p_max = kInf;
    double q_min = -kInf;
    double q_max = kInf;
    CostCurve cost;
    /// Real power dispatch used by power flow at non-slack generator buses.
    double p_set = 0.0;
};

struct Load {
    int bus = 0;
    LoadModel model;
};

struct GridCase {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::vector<Load> loads;
};

/// Maps bus ids to positions in GridCase::buses.
class BusIndex {
  public:
    explicit BusIndex(const GridCase& grid);

    /// Throws Error(DanglingReference) for an unknown id.
    std::size_t at(int id) const;
    bool contains(int id) const { return index_.count(id) != 0; }
    std::size_t slack() const { return slack_; }

  private:
    std::unordered_map<int, std::size_t> index_;
    std::size_t slack_ = 0;
};

/// Returns the case unchanged when every structural invariant holds.
/// Throws Error with DuplicateBusId, DanglingReference, NoSlack, Disconnected
/// or InvalidParameter otherwise.
GridCase validate_case(GridCase grid);

/// Nodal admittance Y = G + jB, rows and columns in GridCase::buses order.
struct AdmittanceMatrix {
    Eigen::SparseMatrix<double> g;
    Eigen::SparseMatrix<double> b;

    std::complex<double> at(std::size_t i, std::size_t j) const {
        return {g.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                b.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))};
    }
    std::size_t size() const { return static_cast<std::size_t>(g.rows()); }
};

AdmittanceMatrix build_admittance(const GridCase& grid);

/// Series admittance 1 / (r + jx) of a branch.
std::complex<double> series_admittance(const Branch& branch);

}  // namespace loadopf
