// Writes the bundled example data: reconstructed 2-, 3- and 5-bus cases,
// synthetic two-day measurement series for the 5-bus load buses, and the
// segmented 5-bus case fitted from those series.
//
// usage: make_data OUT_DIR

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "loadopf/fitting.hpp"
#include "loadopf/io.hpp"

using namespace loadopf;

namespace {

constexpr double kDay = 86400.0;
constexpr double kStep = 60.0;
constexpr int kDays = 2;
// Segment start hours within a day; the last entry closes the day.
constexpr std::array<double, 7> kSchedule{0.0, 5.0, 8.0, 12.0, 17.0, 21.0, 24.0};
constexpr std::array<std::array<double, 6>, kDays> kActivity{{{0.55, 0.8, 1.0, 1.1, 0.95, 0.7},
                                                               {0.6, 0.85, 1.05, 1.15, 0.9, 0.65}}};

// Segment-1 parameter sets of the campus loads as tabulated.
const std::array<BIGParams, 3> kBig{BIGParams{1.5775, 0.031136, -0.10372, -0.49365},
                                    BIGParams{2.2709, 0.044819, -0.14931, -0.7106},
                                    BIGParams{0.65358, -0.13531, 0.43166, -0.19968}};
const std::array<PQParams, 3> kPq{PQParams{1.4499, 0.44594}, PQParams{2.0868, 0.64185},
                                  PQParams{1.0589, 0.32567}};
// The tabulated B column reproduces the tabulated Q only with its sign
// flipped, so b is stored negated.
const std::array<ZIPParams, 3> kZip{ZIPParams{1.1392, -0.19632, 0.4767, 0.15877, -0.16338, 0.50372},
                                    ZIPParams{0.98408, 0.076938, 0.70154, 0.22081, 0.42845, 0.36053},
                                    ZIPParams{0.49932, 0.03904, 0.35596, 0.11204, 0.21739, 0.18293}};
constexpr std::array<int, 3> kLoadBuses{2, 3, 4};

GridCase two_bus() {
    GridCase c;
    c.buses = {{1, BusKind::Slack, 0.94, 1.06, 1.0}, {2, BusKind::Load, 0.94, 1.06, 1.0}};
    c.branches = {{1, 2, 0.04, 0.12, 0.02}};
    c.generators = {Generator{1, 0.0, 10.0, -10.0, 10.0, {0.0, 1.0, 0.0}, 0.0}};
    c.loads = {{2, PQParams{1.0, 0.3}}};
    return c;
}

GridCase three_bus() {
    GridCase c;
    c.buses = {{1, BusKind::Slack, 0.94, 1.06, 1.0},
               {2, BusKind::Load, 0.94, 1.06, 1.0},
               {3, BusKind::Load, 0.94, 1.06, 1.0}};
    c.branches = {{1, 2, 0.02, 0.06, 0.03}, {1, 3, 0.08, 0.24, 0.025}, {2, 3, 0.06, 0.18, 0.02}};
    c.generators = {Generator{1, 0.0, 10.0, -10.0, 10.0, {0.0, 1.0, 0.0}, 0.0}};
    c.loads = {{2, PQParams{0.9, 0.3}}, {3, PQParams{0.6, 0.2}}};
    return c;
}

GridCase five_bus() {
    GridCase c;
    c.buses = {{1, BusKind::Slack, 0.94, 1.06, 1.04},
               {2, BusKind::Load, 0.94, 1.06, 1.0},
               {3, BusKind::Load, 0.94, 1.06, 1.0},
               {4, BusKind::Load, 0.94, 1.06, 1.0},
               {5, BusKind::Generator, 0.94, 1.06, 1.02}};
    c.branches = {{1, 2, 0.005, 0.025, 0.02}, {1, 3, 0.008, 0.035, 0.02}, {2, 3, 0.006, 0.03, 0.01},
                  {3, 4, 0.007, 0.03, 0.015},  {4, 5, 0.005, 0.025, 0.015}, {2, 5, 0.01, 0.045, 0.02}};
    c.generators = {Generator{1, 0.0, 6.0, -3.0, 4.0, {0.4, 10.0, 0.0}, 0.0},
                    Generator{5, 0.0, 3.0, -2.0, 2.5, {0.8, 11.0, 0.0}, 1.5}};
    for (std::size_t k = 0; k < kLoadBuses.size(); ++k) c.loads.push_back({kLoadBuses[k], kPq[k]});
    return c;
}

BIGParams scaled(const BIGParams& p, double s) { return {s * p.alpha_r, s * p.alpha_i, s * p.g_b, s * p.b_b}; }

/// Load current from piecewise-constant BIG parameters following the daily
/// activity schedule, at a slowly wandering voltage, with 2% current noise.
MeasurementSeries synthesize(std::size_t load, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double phase = 0.9 * static_cast<double>(load);
    const double bus_scale = 1.0 + 0.05 * (static_cast<double>(load) - 1.0);
    MeasurementSeries series;
    series.bus = kLoadBuses[load];
    for (int day = 0; day < kDays; ++day) {
        for (double t = 0.0; t < kDay; t += kStep) {
            const double hour = t / 3600.0;
            std::size_t seg = 0;
            while (hour >= kSchedule[seg + 1]) ++seg;
            const double activity = kActivity[static_cast<std::size_t>(day)][seg] * bus_scale;
            const auto params = scaled(kBig[load], activity);
            double m = 1.0 + 0.024 * std::sin(2.0 * std::numbers::pi * t / kDay + phase) + 0.006 * normal(rng);
            m = std::clamp(m, 0.97, 1.03);
            const double angle = -0.02 - 0.02 * activity + 0.003 * normal(rng);
            const OperatingVoltage v{m * std::cos(angle), m * std::sin(angle)};
            const auto e = eval(params, v);
            const double sigma = 0.02 / std::numbers::sqrt2 * std::hypot(e.i_r, e.i_i);
            series.samples.push_back({day * kDay + t, v.v_r, v.v_i, e.i_r + sigma * normal(rng),
                                      e.i_i + sigma * normal(rng)});
        }
    }
    return series;
}

/// Segments every day of the first series with the BIG fit and applies the
/// same boundaries to all buses, fitting each model kind per segment.
SegmentedCase fit_segments(const std::vector<MeasurementSeries>& series) {
    SegmentedCase seg;
    seg.base = five_bus();
    const std::size_t per_day = series.front().samples.size() / kDays;
    for (int day = 0; day < kDays; ++day) {
        const auto first = Samples(series.front().samples).subspan(static_cast<std::size_t>(day) * per_day, per_day);
        const auto split = segment_fit(first, 6, LoadKind::BIG);
        std::vector<std::size_t> bounds{0};
        bounds.insert(bounds.end(), split.segmentation.boundaries.begin(), split.segmentation.boundaries.end());
        bounds.push_back(per_day);
        for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
            for (auto kind : {LoadKind::PQ, LoadKind::ZIP, LoadKind::BIG, LoadKind::Y}) {
                SegmentLoads loads;
                for (const auto& m : series) {
                    const auto part = Samples(m.samples).subspan(static_cast<std::size_t>(day) * per_day + bounds[s],
                                                                 bounds[s + 1] - bounds[s]);
                    loads.push_back({m.bus, fit_model(kind, part)});
                }
                seg.families[kind].push_back(std::move(loads));
            }
        }
    }
    return validate_segmented(seg);
}

void write(const std::filesystem::path& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
    std::cout << path.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_data OUT_DIR\n";
        return 2;
    }
    const std::filesystem::path dir = argv[1];
    std::filesystem::create_directories(dir);

    write(dir / "case2_reconstruction.json", format_case(two_bus()));
    write(dir / "case3_reconstruction.json", format_case(three_bus()));
    write(dir / "case5_reconstruction.json", format_case(five_bus()));

    SegmentedCase campus;
    campus.base = five_bus();
    for (std::size_t k = 0; k < kLoadBuses.size(); ++k) {
        campus.families[LoadKind::PQ].resize(1);
        campus.families[LoadKind::ZIP].resize(1);
        campus.families[LoadKind::BIG].resize(1);
        campus.families[LoadKind::PQ][0].push_back({kLoadBuses[k], kPq[k]});
        campus.families[LoadKind::ZIP][0].push_back({kLoadBuses[k], kZip[k]});
        campus.families[LoadKind::BIG][0].push_back({kLoadBuses[k], kBig[k]});
    }
    write(dir / "campus_segment1.json", format_segmented(validate_segmented(campus)));

    std::mt19937_64 rng(20240917);
    std::vector<MeasurementSeries> series;
    for (std::size_t k = 0; k < kLoadBuses.size(); ++k) {
        series.push_back(synthesize(k, rng));
        write(dir / fmt::format("meas_bus{}.csv", kLoadBuses[k]), format_measurements(series.back()));
    }
    write(dir / "case5_segmented.json", format_segmented(fit_segments(series)));
    return 0;
}
