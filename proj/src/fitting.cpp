#include "loadopf/fitting.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "loadopf/errors.hpp"

namespace loadopf {

namespace {

double power_p(const MeasurementSample& s) { return s.v_r * s.i_r + s.v_i * s.i_i; }
double power_q(const MeasurementSample& s) { return s.v_i * s.i_r - s.v_r * s.i_i; }
double magnitude(const MeasurementSample& s) { return std::hypot(s.v_r, s.v_i); }

void require_samples(Samples samples, const char* what) {
    if (samples.empty()) throw Error(ErrorCode::EmptySeries, fmt::format("{} needs at least one sample", what));
}

/// Minimum-norm least squares; equals the ordinary solution at full rank.
Eigen::MatrixXd least_squares(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.completeOrthogonalDecomposition().solve(b);
}

std::size_t distinct_magnitudes(Samples samples) {
    std::vector<double> m;
    m.reserve(samples.size());
    for (const auto& s : samples) m.push_back(magnitude(s));
    std::sort(m.begin(), m.end());
    const double tol = 1e-12 * std::max(1.0, m.back());
    std::size_t count = 1;
    for (std::size_t k = 1; k < m.size(); ++k) {
        if (m[k] - m[k - 1] > tol) ++count;
    }
    return count;
}

bool phasors_vary(Samples samples) {
    const auto& first = samples.front();
    const double tol = 1e-12 * std::max(1.0, magnitude(first));
    return std::any_of(samples.begin(), samples.end(), [&](const MeasurementSample& s) {
        return std::hypot(s.v_r - first.v_r, s.v_i - first.v_i) > tol;
    });
}

/// Power-domain least squares. With current_weighted set, each sample is
/// weighted by 1/|V|^2, which makes the fit minimize the current-domain error
/// since |dI| = |dS| / |V|.
ZIPParams solve_zip(Samples samples, bool current_weighted) {
    const auto n = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd a(n, 3);
    Eigen::MatrixXd rhs(n, 2);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& s = samples[static_cast<std::size_t>(k)];
        const double m = magnitude(s);
        const double w = current_weighted ? 1.0 / m : 1.0;
        a.row(k) << w, w * m, w * m * m;
        rhs.row(k) << w * power_p(s), w * power_q(s);
    }
    const Eigen::MatrixXd x = least_squares(a, rhs);
    return {x(0, 0), x(0, 1), x(1, 0), x(1, 1), x(2, 0), x(2, 1)};
}

BIGParams solve_big(Samples samples) {
    const auto n = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd a(2 * n, 4);
    Eigen::VectorXd rhs(2 * n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& s = samples[static_cast<std::size_t>(k)];
        a.row(2 * k) << 1.0, 0.0, s.v_r, -s.v_i;
        a.row(2 * k + 1) << 0.0, 1.0, s.v_i, s.v_r;
        rhs[2 * k] = s.i_r;
        rhs[2 * k + 1] = s.i_i;
    }
    const Eigen::VectorXd x = least_squares(a, rhs);
    return {x[0], x[1], x[2], x[3]};
}

PQParams weighted_pq(Samples samples) {
    double p = 0.0;
    double q = 0.0;
    double w = 0.0;
    for (const auto& s : samples) {
        const double wk = 1.0 / (s.v_r * s.v_r + s.v_i * s.v_i);
        p += wk * power_p(s);
        q += wk * power_q(s);
        w += wk;
    }
    return {p / w, q / w};
}

/// Least-squares fit in the current domain, used by the segmentation search
/// so that its objective and the per-segment fits agree. Never throws on rank.
LoadModel current_fit(LoadKind kind, Samples samples) {
    switch (kind) {
        case LoadKind::PQ: return weighted_pq(samples);
        case LoadKind::ZIP: return solve_zip(samples, true);
        case LoadKind::BIG: return solve_big(samples);
        case LoadKind::Y: return fit_y(samples);
    }
    return PQParams{};
}

/// Least squares grown one row at a time by Givens rotations. Tracks the
/// residual sum of squares of the current rows exactly, for several
/// right-hand sides sharing one design.
class IncrementalLeastSquares {
  public:
    IncrementalLeastSquares(std::size_t p, std::size_t m)
        : p_(p), m_(m), r_(p * p, 0.0), d_(p * m, 0.0), scale_(p, 0.0) {}

    void add(std::span<double> a, std::span<double> y) {
        for (std::size_t j = 0; j < p_; ++j) scale_[j] = std::max(scale_[j], std::abs(a[j]));
        for (std::size_t j = 0; j < p_; ++j) {
            double& rjj = r_[j * p_ + j];
            // A column that is dependent on earlier ones leaves roundoff here.
            if (rjj == 0.0 && std::abs(a[j]) <= 1e-12 * scale_[j]) a[j] = 0.0;
            if (a[j] == 0.0) continue;
            const double h = std::hypot(rjj, a[j]);
            const double c = rjj / h;
            const double s = a[j] / h;
            rjj = h;
            for (std::size_t k = j + 1; k < p_; ++k) {
                const double t = r_[j * p_ + k];
                r_[j * p_ + k] = c * t + s * a[k];
                a[k] = c * a[k] - s * t;
            }
            for (std::size_t k = 0; k < m_; ++k) {
                const double t = d_[j * m_ + k];
                d_[j * m_ + k] = c * t + s * y[k];
                y[k] = c * y[k] - s * t;
            }
        }
        for (std::size_t k = 0; k < m_; ++k) sse_ += y[k] * y[k];
    }

    double sse() const { return sse_; }

  private:
    std::size_t p_;
    std::size_t m_;
    std::vector<double> r_;
    std::vector<double> d_;
    std::vector<double> scale_;
    double sse_ = 0.0;
};

/// Appends the current-domain rows of one sample for the fit of `kind`.
void add_sample(IncrementalLeastSquares& ls, LoadKind kind, const MeasurementSample& s) {
    const double m = magnitude(s);
    switch (kind) {
        case LoadKind::PQ: {
            std::array<double, 1> a{1.0 / m};
            std::array<double, 2> y{power_p(s) / m, power_q(s) / m};
            ls.add(a, y);
            return;
        }
        case LoadKind::ZIP: {
            std::array<double, 3> a{1.0 / m, 1.0, m};
            std::array<double, 2> y{power_p(s) / m, power_q(s) / m};
            ls.add(a, y);
            return;
        }
        case LoadKind::BIG: {
            std::array<double, 4> a{1.0, 0.0, s.v_r, -s.v_i};
            std::array<double, 1> y{s.i_r};
            ls.add(a, y);
            a = {0.0, 1.0, s.v_i, s.v_r};
            y = {s.i_i};
            ls.add(a, y);
            return;
        }
        case LoadKind::Y: {
            std::array<double, 2> a{s.v_r, -s.v_i};
            std::array<double, 1> y{s.i_r};
            ls.add(a, y);
            a = {s.v_i, s.v_r};
            y = {s.i_i};
            ls.add(a, y);
            return;
        }
    }
}

IncrementalLeastSquares make_fit(LoadKind kind) {
    switch (kind) {
        case LoadKind::PQ: return {1, 2};
        case LoadKind::ZIP: return {3, 2};
        case LoadKind::BIG: return {4, 1};
        case LoadKind::Y: return {2, 1};
    }
    return {1, 1};
}

}  // namespace

void validate_series(Samples samples) {
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto& s = samples[k];
        if (!std::isfinite(s.t) || !std::isfinite(s.v_r) || !std::isfinite(s.v_i) || !std::isfinite(s.i_r) ||
            !std::isfinite(s.i_i)) {
            throw Error(ErrorCode::InvalidParameter, fmt::format("sample {} has a non-finite value", k));
        }
        if (!(magnitude(s) > 0.0)) throw Error(ErrorCode::InvalidParameter, fmt::format("sample {} has |V| = 0", k));
        if (k > 0 && !(s.t > samples[k - 1].t)) {
            throw Error(ErrorCode::InvalidParameter, fmt::format("timestamps not increasing at sample {}", k));
        }
    }
}

PQParams fit_pq(Samples samples) {
    require_samples(samples, "fit_pq");
    double p = 0.0;
    double q = 0.0;
    for (const auto& s : samples) {
        p += power_p(s);
        q += power_q(s);
    }
    const auto n = static_cast<double>(samples.size());
    return {p / n, q / n};
}

ZIPParams fit_zip(Samples samples) {
    require_samples(samples, "fit_zip");
    const auto distinct = distinct_magnitudes(samples);
    if (distinct < 3) {
        throw Error(ErrorCode::RankDeficient,
                    fmt::format("fit_zip needs 3 distinct voltage magnitudes, found {}", distinct));
    }
    return solve_zip(samples, false);
}

BIGParams fit_big(Samples samples) {
    require_samples(samples, "fit_big");
    if (samples.size() < 2 || !phasors_vary(samples)) {
        throw Error(ErrorCode::RankDeficient, "fit_big needs at least two distinct voltage phasors");
    }
    return solve_big(samples);
}

YParams fit_y(Samples samples) {
    require_samples(samples, "fit_y");
    // Normal equations of I = (g + jb) V decouple: |V|^2 g = Re(conj(V) I), |V|^2 b = Im(conj(V) I).
    double vv = 0.0;
    double re = 0.0;
    double im = 0.0;
    for (const auto& s : samples) {
        vv += s.v_r * s.v_r + s.v_i * s.v_i;
        re += s.v_r * s.i_r + s.v_i * s.i_i;
        im += s.v_r * s.i_i - s.v_i * s.i_r;
    }
    return {re / vv, im / vv};
}

LoadModel fit_model(LoadKind kind, Samples samples) {
    switch (kind) {
        case LoadKind::PQ: return fit_pq(samples);
        case LoadKind::ZIP: return fit_zip(samples);
        case LoadKind::BIG: return fit_big(samples);
        case LoadKind::Y: return fit_y(samples);
    }
    return PQParams{};
}

double current_sse(Samples samples, const LoadModel& model) {
    double sum = 0.0;
    for (const auto& s : samples) {
        const auto e = eval(model, {s.v_r, s.v_i});
        const double dr = s.i_r - e.i_r;
        const double di = s.i_i - e.i_i;
        sum += dr * dr + di * di;
    }
    return sum;
}

double rms_error(Samples samples, const LoadModel& model) {
    require_samples(samples, "rms_error");
    double norm = 0.0;
    for (const auto& s : samples) norm += std::hypot(s.i_r, s.i_i);
    const auto n = static_cast<double>(samples.size());
    if (norm == 0.0) throw Error(ErrorCode::ZeroCurrentNormalization, "measured current is zero throughout");
    return std::sqrt(current_sse(samples, model) / n) / (norm / n);
}

SegmentedFit segment_fit(Samples samples, std::size_t k, LoadKind kind, std::size_t min_len) {
    if (k < 1 || min_len < 1) throw Error(ErrorCode::InvalidParameter, "segment count and min_len must be >= 1");
    require_samples(samples, "segment_fit");
    const std::size_t n = samples.size();
    if (k * min_len > n) {
        throw Error(ErrorCode::TooShort,
                    fmt::format("{} samples cannot hold {} segments of at least {}", n, k, min_len));
    }
    validate_series(samples);

    // cost[b][e - b - min_len]: error of one segment covering [b, e).
    const std::size_t max_len = n - (k - 1) * min_len;
    std::vector<std::vector<double>> cost(n);
    for (std::size_t b = 0; b + min_len <= n; ++b) {
        auto ls = make_fit(kind);
        for (std::size_t len = 1; len <= max_len && b + len <= n; ++len) {
            add_sample(ls, kind, samples[b + len - 1]);
            if (len >= min_len) cost[b].push_back(ls.sse());
        }
    }
    const auto segment_cost = [&](std::size_t b, std::size_t e) { return cost[b][e - b - min_len]; };

    double scale = 0.0;
    for (const auto& s : samples) scale += s.i_r * s.i_r + s.i_i * s.i_i;
    const double tie = 1e-12 * std::max(scale, std::numeric_limits<double>::min());

    // best[j][b]: least error splitting [b, n) into j segments; next[j][b]
    // is the end of the first of them.
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best(k + 1, std::vector<double>(n + 1, inf));
    std::vector<std::vector<std::size_t>> next(k + 1, std::vector<std::size_t>(n + 1, n));
    for (std::size_t b = 0; b + min_len <= n; ++b) {
        if (n - b <= max_len) best[1][b] = segment_cost(b, n);
    }
    for (std::size_t j = 2; j <= k; ++j) {
        for (std::size_t b = 0; b + j * min_len <= n; ++b) {
            for (std::size_t e = b + min_len; e - b <= max_len && e + (j - 1) * min_len <= n; ++e) {
                const double c = segment_cost(b, e) + best[j - 1][e];
                if (c < best[j][b] - tie) {
                    best[j][b] = c;
                    next[j][b] = e;
                }
            }
        }
    }

    SegmentedFit out;
    std::size_t b = 0;
    for (std::size_t j = k; j >= 1; --j) {
        const std::size_t e = j == 1 ? n : next[j][b];
        const auto seg = samples.subspan(b, e - b);
        SegmentFit sf;
        sf.begin = b;
        sf.end = e;
        sf.model = current_fit(kind, seg);
        sf.sse = current_sse(seg, sf.model);
        sf.rms = rms_error(seg, sf.model);
        out.fit.total_sse += sf.sse;
        out.fit.total_rms += sf.rms;
        out.fit.segments.push_back(std::move(sf));
        if (j > 1) out.segmentation.boundaries.push_back(e);
        b = e;
    }
    out.fit.total_rms /= static_cast<double>(k);
    return out;
}

}  // namespace loadopf
