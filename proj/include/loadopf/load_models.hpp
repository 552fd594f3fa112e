#pragma once

#include <array>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace loadopf {

// Load parameter records. Every value is in p.u. on the system base.

/// Constant power demand.
struct PQParams {
    double p = 0.0;
    double q = 0.0;
};

/// Polynomial in |V|: P = p0 + ip|V| + g|V|^2, Q = q0 + iq|V| + b|V|^2.
struct ZIPParams {
    double p0 = 0.0;
    double q0 = 0.0;
    double i_p = 0.0;
    double i_q = 0.0;
    double g_z = 0.0;
    double b_z = 0.0;
};

/// Constant current source in parallel with an admittance, affine in the
/// rectangular voltage: I = alpha + (g + jb) V.
struct BIGParams {
    double alpha_r = 0.0;
    double alpha_i = 0.0;
    double g_b = 0.0;
    double b_b = 0.0;
};

/// Constant admittance y = g + jb (absorbs g|V|^2 - jb|V|^2).
struct YParams {
    double g = 0.0;
    double b = 0.0;
};

using LoadModel = std::variant<PQParams, ZIPParams, BIGParams, YParams>;

enum class LoadKind { PQ, ZIP, BIG, Y };

LoadKind kind_of(const LoadModel& model);
std::string_view to_string(LoadKind kind);
/// Parses "pq", "zip", "big" or "y". Throws Error(ParseError) otherwise.
LoadKind parse_load_kind(std::string_view name);

/// Parameter keys of a kind as used in case files, in declaration order.
std::vector<std::string_view> parameter_names(LoadKind kind);
/// Parameter values in the order of parameter_names.
std::vector<double> parameter_values(const LoadModel& model);
/// Inverse of parameter_values. Throws Error(InvalidParameter) on a size mismatch.
LoadModel make_model(LoadKind kind, const std::vector<double>& values);

/// Rectangular bus voltage phasor.
struct OperatingVoltage {
    double v_r = 1.0;
    double v_i = 0.0;

    double magnitude() const;
    double magnitude_sq() const { return v_r * v_r + v_i * v_i; }
};

/// Row-major 2x2 block: d(row)/d(v_r), d(row)/d(v_i).
using Block2 = std::array<std::array<double, 2>, 2>;

struct LoadEvaluation {
    double i_r = 0.0;  ///< drawn current, real part
    double i_i = 0.0;  ///< drawn current, imaginary part
    double p = 0.0;    ///< absorbed real power
    double q = 0.0;    ///< absorbed reactive power
    std::array<double, 2> d_p{};  ///< (dP/dv_r, dP/dv_i)
    std::array<double, 2> d_q{};  ///< (dQ/dv_r, dQ/dv_i)
    Block2 d_i{};                 ///< [[di_r/dv_r, di_r/dv_i], [di_i/dv_r, di_i/dv_i]]
};

/// Minimum voltage magnitude at which PQ and ZIP loads may be evaluated.
inline constexpr double kMinEvalVoltage = 1e-4;

/// Drawn current, absorbed power and their voltage sensitivities.
/// Throws Error(VoltageCollapse) for PQ/ZIP when |V| <= kMinEvalVoltage.
LoadEvaluation eval(const LoadModel& model, const OperatingVoltage& v);

enum class LoadType { PowerType, ImpedanceType, Mixed };
std::string_view to_string(LoadType type);

struct Margin {
    std::string name;
    double value = 0.0;
};

/// Power-type / impedance-type verdict at one operating voltage. A margin is
/// the value of a sensitivity condition; margin <= 0 satisfies the power-type
/// inequality.
struct ClassificationReport {
    OperatingVoltage at;
    LoadType p_class = LoadType::PowerType;
    LoadType q_class = LoadType::PowerType;
    LoadType joint = LoadType::PowerType;
    std::vector<Margin> p_margins;
    std::vector<Margin> q_margins;
};

ClassificationReport classify(const LoadModel& model, const OperatingVoltage& v = {});

/// Largest real-power sensitivity margin; <= 0 iff the model is power-type in P.
double mpt_margin(const LoadModel& model, const OperatingVoltage& v = {});

/// Admittance absorbing exactly (p, q) at v_nom. Throws Error(ZeroVoltage).
YParams equivalent_admittance(double p, double q, const OperatingVoltage& v_nom = {});

}  // namespace loadopf
