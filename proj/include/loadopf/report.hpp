#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "loadopf/experiments.hpp"
#include "loadopf/fitting.hpp"
#include "loadopf/opf.hpp"
#include "loadopf/powerflow.hpp"

namespace loadopf {

enum class ReportFormat { Json, Csv };

/// Parses "json" or "csv". Throws Error(ParseError).
ReportFormat parse_report_format(std::string_view name);

// Serialization is deterministic: numbers are written in their shortest
// round-trip form and rows keep report order. CSV failures leave numeric
// cells empty; JSON writes null.

/// CSV columns: segment,kind,objective,status,iterations,kkt_residual,error,
/// then per bus vm_<id>,v_r_<id>,v_i_<id>,v_act_<id>; per generator (1-based
/// k) p_<k>,q_<k>,p_act_<k>,q_act_<k>; per load bus class_p_<id>,
/// class_q_<id>,margin_p_<id>.
std::string emit_report(const SweepReport& report, ReportFormat format);

/// CSV columns: segment,objective_a,generation_a,generation_b,delta,
/// pf_converged,feasible_b,status,error.
std::string emit_report(const GapReport& report, ReportFormat format);

/// CSV columns: element,id,v_r,v_i,vm,p,q (element is bus or generator).
std::string emit_report(const GridCase& grid, const PFSolution& solution, ReportFormat format);

/// CSV columns: element,id,v_r,v_i,vm,v_act,p,q,p_act,q_act.
std::string emit_report(const GridCase& grid, const OPFSolution& solution, ReportFormat format);

/// CSV columns: segment,begin,end,t_begin,t_end,rms,sse, then the model's
/// parameter keys.
std::string emit_report(const MeasurementSeries& series, LoadKind kind, const SegmentedFit& fit,
                        ReportFormat format);

/// CSV columns: bus,model,v_r,v_i,p_class,q_class,joint,margin_p,margin_q.
std::string emit_report(const std::vector<LoadClassification>& loads, ReportFormat format);

}  // namespace loadopf
