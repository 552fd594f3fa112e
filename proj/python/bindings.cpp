// Python module: string-in, report-out wrappers around the library.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "loadopf/errors.hpp"
#include "loadopf/experiments.hpp"
#include "loadopf/io.hpp"
#include "loadopf/report.hpp"

namespace py = pybind11;
using namespace loadopf;

namespace {

py::dict classification(const ClassificationReport& r) {
    py::dict p, q, out;
    for (const auto& m : r.p_margins) p[py::str(m.name)] = m.value;
    for (const auto& m : r.q_margins) q[py::str(m.name)] = m.value;
    out["p_class"] = std::string(to_string(r.p_class));
    out["q_class"] = std::string(to_string(r.q_class));
    out["joint"] = std::string(to_string(r.joint));
    out["p_margins"] = p;
    out["q_margins"] = q;
    return out;
}

std::vector<LoadKind> kinds_of(const std::vector<std::string>& names) {
    std::vector<LoadKind> kinds;
    for (const auto& n : names) kinds.push_back(parse_load_kind(n));
    return kinds;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "AC power flow and optimal power flow under aggregated load models";

    static const py::handle error = py::exception<Error>(m, "Error", PyExc_RuntimeError).release();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object instance = error(e.what());
            instance.attr("code") = to_string(e.code());
            PyErr_SetObject(error.ptr(), instance.ptr());
        }
    });

    m.def("parameter_names", [](const std::string& kind) {
        std::vector<std::string> out;
        for (auto n : parameter_names(parse_load_kind(kind))) out.emplace_back(n);
        return out;
    });

    m.def(
        "eval_load",
        [](const std::string& kind, const std::vector<double>& params, double v_r, double v_i) {
            const auto e = eval(make_model(parse_load_kind(kind), params), {v_r, v_i});
            py::dict out;
            out["p"] = e.p;
            out["q"] = e.q;
            out["i_r"] = e.i_r;
            out["i_i"] = e.i_i;
            return out;
        },
        py::arg("kind"), py::arg("params"), py::arg("v_r") = 1.0, py::arg("v_i") = 0.0);

    m.def(
        "classify",
        [](const std::string& kind, const std::vector<double>& params, double v_r, double v_i) {
            return classification(classify(make_model(parse_load_kind(kind), params), {v_r, v_i}));
        },
        py::arg("kind"), py::arg("params"), py::arg("v_r") = 1.0, py::arg("v_i") = 0.0);

    m.def(
        "pf",
        [](const std::string& case_json, double tol, int max_iter, bool enforce_q_limits, const std::string& format) {
            PFOptions options;
            options.tol = tol;
            options.max_iter = max_iter;
            options.enforce_q_limits = enforce_q_limits;
            const auto grid = parse_case(case_json);
            py::gil_scoped_release release;
            return emit_report(grid, solve_pf(grid, options), parse_report_format(format));
        },
        py::arg("case_json"), py::arg("tol") = 1e-8, py::arg("max_iter") = 30, py::arg("enforce_q_limits") = true,
        py::arg("format") = "json");

    m.def(
        "opf",
        [](const std::string& case_json, double kkt_tol, int max_iter, const std::string& format) {
            OPFOptions options;
            options.kkt_tol = kkt_tol;
            options.max_iter = max_iter;
            const auto grid = parse_case(case_json);
            py::gil_scoped_release release;
            return emit_report(grid, solve_opf(grid, options), parse_report_format(format));
        },
        py::arg("case_json"), py::arg("kkt_tol") = 1e-6, py::arg("max_iter") = 300, py::arg("format") = "json");

    m.def(
        "fit",
        [](const std::string& csv, int bus, const std::string& kind, std::size_t segments, std::size_t min_len,
           const std::string& format) {
            const auto series = parse_measurements(csv, bus);
            const auto k = parse_load_kind(kind);
            py::gil_scoped_release release;
            return emit_report(series, k, segment_fit(series.samples, segments, k, min_len),
                               parse_report_format(format));
        },
        py::arg("csv"), py::arg("bus"), py::arg("kind") = "big", py::arg("segments") = 1,
        py::arg("min_len") = kDefaultMinSegment, py::arg("format") = "json");

    m.def(
        "sweep",
        [](const std::string& segmented_json, const std::vector<std::string>& kinds, double kkt_tol,
           const std::string& format) {
            OPFOptions options;
            options.kkt_tol = kkt_tol;
            const auto seg = parse_segmented(segmented_json);
            const auto k = kinds_of(kinds);
            py::gil_scoped_release release;
            return emit_report(experiment_sweep(seg, k, options), parse_report_format(format));
        },
        py::arg("segmented_json"), py::arg("kinds") = std::vector<std::string>{"pq", "zip", "big"},
        py::arg("kkt_tol") = 1e-6, py::arg("format") = "json");

    m.def(
        "gap",
        [](const std::string& segmented_json, const std::string& from, const std::string& to,
           const std::string& freeze, double kkt_tol, const std::string& format) {
            GapOptions options;
            options.opf.kkt_tol = kkt_tol;
            if (freeze == "voltages-only") {
                options.freeze = FreezeMode::VoltagesOnly;
            } else if (freeze != "all") {
                throw Error(ErrorCode::ParseError, "freeze must be 'all' or 'voltages-only', got '" + freeze + "'");
            }
            const auto seg = parse_segmented(segmented_json);
            const auto a = parse_load_kind(from);
            const auto b = parse_load_kind(to);
            py::gil_scoped_release release;
            return emit_report(experiment_gap(seg, a, b, options), parse_report_format(format));
        },
        py::arg("segmented_json"), py::arg("from_kind") = "pq", py::arg("to_kind") = "zip",
        py::arg("freeze") = "all", py::arg("kkt_tol") = 1e-6, py::arg("format") = "json");
}
