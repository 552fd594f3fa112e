#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "loadopf/load_models.hpp"

namespace loadopf {

/// One synchronized phasor measurement. Currents are drawn by the load.
struct MeasurementSample {
    double t = 0.0;  ///< seconds
    double v_r = 0.0;
    double v_i = 0.0;
    double i_r = 0.0;
    double i_i = 0.0;
};

struct MeasurementSeries {
    int bus = 0;
    std::vector<MeasurementSample> samples;
};

using Samples = std::span<const MeasurementSample>;

/// Throws Error(InvalidParameter) on a non-positive |V|, non-finite values or
/// timestamps that are not strictly increasing.
void validate_series(Samples samples);

/// Means of the measured powers.
PQParams fit_pq(Samples samples);

/// Least squares of P and Q on (1, |V|, |V|^2). Needs three distinct |V|.
ZIPParams fit_zip(Samples samples);

/// Least squares of the drawn current on I = alpha + (g + jb) V.
BIGParams fit_big(Samples samples);

/// Least squares of the drawn current on I = (g + jb) V.
YParams fit_y(Samples samples);

/// Dispatches to the fit for `kind`.
LoadModel fit_model(LoadKind kind, Samples samples);

/// Sum over samples of |I_meas - I_model(V)|^2.
double current_sse(Samples samples, const LoadModel& model);

/// sqrt(mean |I_meas - I_model|^2) / mean |I_meas|.
double rms_error(Samples samples, const LoadModel& model);

/// Segment start indices after the first segment; empty for one segment.
struct Segmentation {
    std::vector<std::size_t> boundaries;
};

struct SegmentFit {
    std::size_t begin = 0;  ///< first sample
    std::size_t end = 0;    ///< one past the last sample
    LoadModel model;
    double rms = 0.0;
    double sse = 0.0;
};

struct FitResult {
    std::vector<SegmentFit> segments;
    double total_rms = 0.0;  ///< average of the per-segment rms
    double total_sse = 0.0;
};

struct SegmentedFit {
    Segmentation segmentation;
    FitResult fit;
};

inline constexpr std::size_t kDefaultMinSegment = 4;

/// Splits the series into k contiguous segments of at least min_len samples
/// minimizing the summed current-domain squared error of per-segment fits.
/// Segment models are current-domain least-squares fits; for PQ and ZIP that
/// is the power fit with each sample weighted by 1/|V|^2.
/// Exact dynamic program; among equal-cost splits the one with the smallest
/// boundaries wins. Throws Error(TooShort) when k * min_len exceeds the length.
SegmentedFit segment_fit(Samples samples, std::size_t k, LoadKind kind,
                         std::size_t min_len = kDefaultMinSegment);

}  // namespace loadopf
