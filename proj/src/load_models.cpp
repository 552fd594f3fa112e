#include "loadopf/load_models.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include <fmt/format.h>

#include "loadopf/errors.hpp"

namespace loadopf {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double checked_magnitude(const OperatingVoltage& v) {
    const double m = v.magnitude();
    if (!(m > kMinEvalVoltage)) {
        throw Error(ErrorCode::VoltageCollapse,
                    fmt::format("voltage magnitude {:.3g} p.u. is below the evaluation floor {:.1g}",
                                m, kMinEvalVoltage));
    }
    return m;
}

// Load described by P(|V|), Q(|V|) and drawn through I = (P - jQ) V / |V|^2.
LoadEvaluation eval_power_polynomial(double p0, double i_p, double g, double q0, double i_q,
                                     double b, const OperatingVoltage& v) {
    const double m = checked_magnitude(v);
    const double m2 = m * m;
    const double vr = v.v_r;
    const double vi = v.v_i;

    const double p = p0 + i_p * m + g * m2;
    const double q = q0 + i_q * m + b * m2;
    const double dp_dm = i_p + 2.0 * g * m;
    const double dq_dm = i_q + 2.0 * b * m;

    LoadEvaluation e;
    e.p = p;
    e.q = q;
    e.d_p = {dp_dm * vr / m, dp_dm * vi / m};
    e.d_q = {dq_dm * vr / m, dq_dm * vi / m};
    e.i_r = (p * vr + q * vi) / m2;
    e.i_i = (p * vi - q * vr) / m2;

    // Quotient rule on numerator / |V|^2.
    const double num_r[2] = {e.d_p[0] * vr + p + e.d_q[0] * vi, e.d_p[1] * vr + e.d_q[1] * vi + q};
    const double num_i[2] = {e.d_p[0] * vi - e.d_q[0] * vr - q, e.d_p[1] * vi + p - e.d_q[1] * vr};
    const double vk[2] = {vr, vi};
    for (int k = 0; k < 2; ++k) {
        e.d_i[0][k] = (num_r[k] - 2.0 * vk[k] * e.i_r) / m2;
        e.d_i[1][k] = (num_i[k] - 2.0 * vk[k] * e.i_i) / m2;
    }
    return e;
}

LoadEvaluation eval_affine(double alpha_r, double alpha_i, double g, double b,
                           const OperatingVoltage& v) {
    const double vr = v.v_r;
    const double vi = v.v_i;
    LoadEvaluation e;
    e.i_r = alpha_r + g * vr - b * vi;
    e.i_i = alpha_i + g * vi + b * vr;
    e.p = vr * e.i_r + vi * e.i_i;
    e.q = vi * e.i_r - vr * e.i_i;
    e.d_p = {alpha_r + 2.0 * g * vr, alpha_i + 2.0 * g * vi};
    e.d_q = {-alpha_i - 2.0 * b * vr, alpha_r - 2.0 * b * vi};
    e.d_i = {{{g, -b}, {b, g}}};
    return e;
}

LoadType verdict(const std::vector<Margin>& margins) {
    const bool power = std::all_of(margins.begin(), margins.end(),
                                   [](const Margin& m) { return m.value <= 0.0; });
    return power ? LoadType::PowerType : LoadType::ImpedanceType;
}

}  // namespace

double OperatingVoltage::magnitude() const { return std::hypot(v_r, v_i); }

LoadKind kind_of(const LoadModel& model) { return static_cast<LoadKind>(model.index()); }

std::string_view to_string(LoadKind kind) {
    switch (kind) {
        case LoadKind::PQ: return "pq";
        case LoadKind::ZIP: return "zip";
        case LoadKind::BIG: return "big";
        case LoadKind::Y: return "y";
    }
    return "?";
}

std::vector<std::string_view> parameter_names(LoadKind kind) {
    switch (kind) {
        case LoadKind::PQ: return {"p", "q"};
        case LoadKind::ZIP: return {"p0", "q0", "ip", "iq", "g", "b"};
        case LoadKind::BIG: return {"alpha_r", "alpha_i", "g", "b"};
        case LoadKind::Y: return {"g", "b"};
    }
    return {};
}

std::vector<double> parameter_values(const LoadModel& model) {
    return std::visit(
        [](const auto& m) -> std::vector<double> {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, PQParams>) return {m.p, m.q};
            else if constexpr (std::is_same_v<T, ZIPParams>) return {m.p0, m.q0, m.i_p, m.i_q, m.g_z, m.b_z};
            else if constexpr (std::is_same_v<T, BIGParams>) return {m.alpha_r, m.alpha_i, m.g_b, m.b_b};
            else return {m.g, m.b};
        },
        model);
}

LoadModel make_model(LoadKind kind, const std::vector<double>& v) {
    const auto expected = parameter_names(kind).size();
    if (v.size() != expected) {
        throw Error(ErrorCode::InvalidParameter,
                    fmt::format("{} model takes {} parameters, got {}", to_string(kind), expected, v.size()));
    }
    switch (kind) {
        case LoadKind::PQ: return PQParams{v[0], v[1]};
        case LoadKind::ZIP: return ZIPParams{v[0], v[1], v[2], v[3], v[4], v[5]};
        case LoadKind::BIG: return BIGParams{v[0], v[1], v[2], v[3]};
        case LoadKind::Y: return YParams{v[0], v[1]};
    }
    return PQParams{};
}

LoadKind parse_load_kind(std::string_view name) {
    if (name == "pq") return LoadKind::PQ;
    if (name == "zip") return LoadKind::ZIP;
    if (name == "big") return LoadKind::BIG;
    if (name == "y") return LoadKind::Y;
    throw Error(ErrorCode::ParseError, fmt::format("unknown load model '{}'", name));
}

std::string_view to_string(LoadType type) {
    switch (type) {
        case LoadType::PowerType: return "power-type";
        case LoadType::ImpedanceType: return "impedance-type";
        case LoadType::Mixed: return "mixed";
    }
    return "?";
}

LoadEvaluation eval(const LoadModel& model, const OperatingVoltage& v) {
    return std::visit(
        overloaded{
            [&](const PQParams& m) { return eval_power_polynomial(m.p, 0, 0, m.q, 0, 0, v); },
            [&](const ZIPParams& m) {
                return eval_power_polynomial(m.p0, m.i_p, m.g_z, m.q0, m.i_q, m.b_z, v);
            },
            [&](const BIGParams& m) { return eval_affine(m.alpha_r, m.alpha_i, m.g_b, m.b_b, v); },
            [&](const YParams& m) { return eval_affine(0.0, 0.0, m.g, m.b, v); },
        },
        model);
}

ClassificationReport classify(const LoadModel& model, const OperatingVoltage& v) {
    ClassificationReport r;
    r.at = v;
    const double m = v.magnitude();
    std::visit(
        overloaded{
            [&](const PQParams&) {
                r.p_margins = {{"dP/d|V|", 0.0}};
                r.q_margins = {{"dQ/d|V|", 0.0}};
            },
            [&](const ZIPParams& z) {
                r.p_margins = {{"i_p + 2 g_z |V|", z.i_p + 2.0 * z.g_z * m}};
                r.q_margins = {{"i_q + 2 b_z |V|", z.i_q + 2.0 * z.b_z * m}};
            },
            [&](const BIGParams& b) {
                r.p_margins = {{"alpha_r + 2 g_b v_r", b.alpha_r + 2.0 * b.g_b * v.v_r},
                               {"alpha_i + 2 g_b v_i", b.alpha_i + 2.0 * b.g_b * v.v_i}};
                r.q_margins = {{"-alpha_i - 2 b_b v_r", -b.alpha_i - 2.0 * b.b_b * v.v_r},
                               {"alpha_r - 2 b_b v_i", b.alpha_r - 2.0 * b.b_b * v.v_i}};
            },
            [&](const YParams& y) {
                r.p_margins = {{"2 g |V|", 2.0 * y.g * m}};
                r.q_margins = {{"-2 b |V|", -2.0 * y.b * m}};
            },
        },
        model);
    r.p_class = verdict(r.p_margins);
    r.q_class = verdict(r.q_margins);
    r.joint = r.p_class == r.q_class ? r.p_class : LoadType::Mixed;
    return r;
}

double mpt_margin(const LoadModel& model, const OperatingVoltage& v) {
    const auto report = classify(model, v);
    double worst = report.p_margins.front().value;
    for (const auto& m : report.p_margins) worst = std::max(worst, m.value);
    return worst;
}

YParams equivalent_admittance(double p, double q, const OperatingVoltage& v_nom) {
    const double m = v_nom.magnitude();
    if (!(m > kMinEvalVoltage)) {
        throw Error(ErrorCode::ZeroVoltage,
                    fmt::format("cannot size an admittance at |V| = {:.3g} p.u.", m));
    }
    const double m2 = m * m;
    return {p / m2, -q / m2};
}

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DuplicateBusId: return "DuplicateBusId";
        case ErrorCode::DanglingReference: return "DanglingReference";
        case ErrorCode::NoSlack: return "NoSlack";
        case ErrorCode::Disconnected: return "Disconnected";
        case ErrorCode::InvalidParameter: return "InvalidParameter";
        case ErrorCode::VoltageCollapse: return "VoltageCollapse";
        case ErrorCode::ZeroVoltage: return "ZeroVoltage";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::Infeasible: return "Infeasible";
        case ErrorCode::EmptySeries: return "EmptySeries";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::TooShort: return "TooShort";
        case ErrorCode::ZeroCurrentNormalization: return "ZeroCurrentNormalization";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ValidationError: return "ValidationError";
    }
    return "Unknown";
}

}  // namespace loadopf
