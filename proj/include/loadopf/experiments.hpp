#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadopf/load_models.hpp"
#include "loadopf/network.hpp"
#include "loadopf/opf.hpp"
#include "loadopf/powerflow.hpp"

namespace loadopf {

/// One load parameter set per load bus, in the order of the base case loads.
using SegmentLoads = std::vector<Load>;

/// A base network plus, for each model kind, a sequence of per-segment load
/// parameter sets. Segments are numbered from 1 in reports and messages.
struct SegmentedCase {
    GridCase base;
    std::map<LoadKind, std::vector<SegmentLoads>> families;

    std::size_t segment_count() const;
    /// The base case with its loads replaced by segment `index` (0-based) of
    /// family `kind`. Throws Error(ValidationError) when either is absent.
    GridCase apply(LoadKind kind, std::size_t index) const;
};

/// Checks that base loads sit on distinct buses, that every family has the
/// same number of segments, that every segment holds exactly one load of the
/// family's kind on each base load bus, and validates the base case.
/// Throws Error(ValidationError), e.g. "segment 5 missing load bus 3".
SegmentedCase validate_segmented(SegmentedCase seg);

/// "ok" or the ErrorCode name of the failure.
inline constexpr const char* kStatusOk = "ok";

struct LoadClassification {
    int bus = 0;
    LoadKind kind = LoadKind::PQ;
    ClassificationReport report;
};

struct SweepRow {
    int segment = 0;  ///< 1-based
    LoadKind kind = LoadKind::PQ;
    std::string status = kStatusOk;
    std::string error;
    double objective = 0.0;
    int iterations = 0;
    double kkt_residual = 0.0;
    /// Empty unless status is ok. Per bus, case order.
    std::vector<OperatingVoltage> v;
    std::vector<BoundActivity> v_activity;
    /// Per generator, case order.
    std::vector<double> p_g;
    std::vector<double> q_g;
    std::vector<BoundActivity> p_activity;
    std::vector<BoundActivity> q_activity;
    /// Every load classified at its solved bus voltage.
    std::vector<LoadClassification> loads;

    bool ok() const { return status == kStatusOk; }
};

struct SweepReport {
    std::vector<int> bus_ids;
    std::vector<int> generator_buses;
    std::vector<int> load_buses;
    std::vector<SweepRow> rows;  ///< sorted by (segment, kind)

    bool has_errors() const;
};

/// One OPF per (segment, kind). Failed cells are recorded with their status.
/// Throws Error(ValidationError) when a requested family is missing.
SweepReport experiment_sweep(const SegmentedCase& seg, std::span<const LoadKind> kinds,
                             const OPFOptions& options = {});

enum class FreezeMode {
    All,           ///< generator voltage magnitudes and non-slack real power
    VoltagesOnly,  ///< voltage magnitudes; non-slack dispatch keeps the base p_set
};

struct GapOptions {
    OPFOptions opf;
    PFOptions pf;
    FreezeMode freeze = FreezeMode::All;
    /// Allowed bound violation when judging the B operating point feasible.
    double feasibility_tol = 1e-6;
};

struct GapRow {
    int segment = 0;  ///< 1-based
    double objective_a = 0.0;
    double generation_a = 0.0;
    double generation_b = 0.0;
    double delta = 0.0;  ///< generation_b - generation_a, p.u.
    bool pf_converged = false;
    bool feasible_b = false;
    std::string status = kStatusOk;
    std::string error;

    bool ok() const { return status == kStatusOk; }
};

struct GapReport {
    LoadKind from = LoadKind::PQ;
    LoadKind to = LoadKind::PQ;
    FreezeMode freeze = FreezeMode::All;
    std::vector<GapRow> rows;

    bool has_errors() const;
};

/// Per segment: OPF under `from`, then power flow under `to` with every
/// generator bus held at the OPF voltage magnitude and (FreezeMode::All) each
/// non-slack generator at its OPF real power. The slack takes the mismatch.
/// Reactive limits are not enforced in the power flow.
GapReport experiment_gap(const SegmentedCase& seg, LoadKind from, LoadKind to, const GapOptions& options = {});

/// The power-flow case experiment_gap solves for one segment: `to` loads with
/// setpoints frozen from an OPF solution of the same network.
GridCase freeze_setpoints(const GridCase& grid, const OPFSolution& solved, FreezeMode freeze);

}  // namespace loadopf
