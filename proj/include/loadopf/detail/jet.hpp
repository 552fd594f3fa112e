#pragma once

#include <array>
#include <cmath>

namespace loadopf::detail {

/// Forward-mode number carrying value, gradient and Hessian with respect to N
/// independent variables. Used to obtain exact second derivatives of the
/// small per-bus current expressions that enter the OPF Lagrangian.
template <int N>
struct Jet {
    double v = 0.0;
    std::array<double, N> g{};
    std::array<double, N * N> h{};

    Jet() = default;
    Jet(double value) : v(value) {}  // NOLINT: implicit constant promotion

    static Jet variable(double value, int index) {
        Jet j(value);
        j.g[index] = 1.0;
        return j;
    }

    double hess(int r, int c) const { return h[r * N + c]; }
};

namespace jet_ops {

// Applies a scalar function with derivatives (d1, d2) at x.v.
template <int N>
Jet<N> chain(const Jet<N>& x, double f, double d1, double d2) {
    Jet<N> out(f);
    for (int i = 0; i < N; ++i) out.g[i] = d1 * x.g[i];
    for (int r = 0; r < N; ++r)
        for (int c = 0; c < N; ++c)
            out.h[r * N + c] = d1 * x.h[r * N + c] + d2 * x.g[r] * x.g[c];
    return out;
}

}  // namespace jet_ops

template <int N>
Jet<N> operator+(const Jet<N>& a, const Jet<N>& b) {
    Jet<N> out(a.v + b.v);
    for (int i = 0; i < N; ++i) out.g[i] = a.g[i] + b.g[i];
    for (int i = 0; i < N * N; ++i) out.h[i] = a.h[i] + b.h[i];
    return out;
}

template <int N>
Jet<N> operator-(const Jet<N>& a) {
    Jet<N> out(-a.v);
    for (int i = 0; i < N; ++i) out.g[i] = -a.g[i];
    for (int i = 0; i < N * N; ++i) out.h[i] = -a.h[i];
    return out;
}

template <int N>
Jet<N> operator-(const Jet<N>& a, const Jet<N>& b) {
    return a + (-b);
}

template <int N>
Jet<N> operator*(const Jet<N>& a, const Jet<N>& b) {
    Jet<N> out(a.v * b.v);
    for (int i = 0; i < N; ++i) out.g[i] = a.v * b.g[i] + b.v * a.g[i];
    for (int r = 0; r < N; ++r)
        for (int c = 0; c < N; ++c)
            out.h[r * N + c] = a.v * b.h[r * N + c] + b.v * a.h[r * N + c] + a.g[r] * b.g[c] +
                               b.g[r] * a.g[c];
    return out;
}

template <int N>
Jet<N> inverse(const Jet<N>& x) {
    const double inv = 1.0 / x.v;
    return jet_ops::chain(x, inv, -inv * inv, 2.0 * inv * inv * inv);
}

template <int N>
Jet<N> operator/(const Jet<N>& a, const Jet<N>& b) {
    return a * inverse(b);
}

template <int N>
Jet<N> sqrt(const Jet<N>& x) {
    const double s = std::sqrt(x.v);
    return jet_ops::chain(x, s, 0.5 / s, -0.25 / (s * x.v));
}

template <int N>
Jet<N> operator+(const Jet<N>& a, double b) { return a + Jet<N>(b); }
template <int N>
Jet<N> operator+(double a, const Jet<N>& b) { return Jet<N>(a) + b; }
template <int N>
Jet<N> operator-(const Jet<N>& a, double b) { return a + Jet<N>(-b); }
template <int N>
Jet<N> operator*(const Jet<N>& a, double b) {
    Jet<N> out(a.v * b);
    for (int i = 0; i < N; ++i) out.g[i] = a.g[i] * b;
    for (int i = 0; i < N * N; ++i) out.h[i] = a.h[i] * b;
    return out;
}
template <int N>
Jet<N> operator*(double a, const Jet<N>& b) { return b * a; }
template <int N>
Jet<N> operator-(double a, const Jet<N>& b) { return Jet<N>(a) - b; }
template <int N>
Jet<N> operator/(double a, const Jet<N>& b) { return inverse(b) * a; }

inline double sqrt(double x) { return std::sqrt(x); }

}  // namespace loadopf::detail
