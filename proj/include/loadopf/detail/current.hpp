#pragma once

#include <utility>
#include <variant>

#include "loadopf/detail/jet.hpp"
#include "loadopf/load_models.hpp"

namespace loadopf::detail {

// Scalar-generic current expressions. Instantiated with double for values and
// with Jet<N> wherever exact second derivatives are needed.

/// Current corresponding to complex power p + jq at voltage v:
/// I = (p - jq) V / |V|^2. Drawn for loads, injected for generators.
template <class T>
std::pair<T, T> power_to_current(const T& p, const T& q, const T& vr, const T& vi) {
    const T m2 = vr * vr + vi * vi;
    const T inv = 1.0 / m2;
    return {(p * vr + q * vi) * inv, (p * vi - q * vr) * inv};
}

template <class T>
std::pair<T, T> drawn_current(const LoadModel& model, const T& vr, const T& vi) {
    return std::visit(
        [&](const auto& m) -> std::pair<T, T> {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, PQParams>) {
                return power_to_current(T(m.p), T(m.q), vr, vi);
            } else if constexpr (std::is_same_v<M, ZIPParams>) {
                const T m2 = vr * vr + vi * vi;
                const T mag = sqrt(m2);
                const T p = m.p0 + m.i_p * mag + m.g_z * m2;
                const T q = m.q0 + m.i_q * mag + m.b_z * m2;
                return power_to_current(p, q, vr, vi);
            } else if constexpr (std::is_same_v<M, BIGParams>) {
                return {m.alpha_r + m.g_b * vr - m.b_b * vi, m.alpha_i + m.g_b * vi + m.b_b * vr};
            } else {
                return {m.g * vr - m.b * vi, m.g * vi + m.b * vr};
            }
        },
        model);
}

}  // namespace loadopf::detail
