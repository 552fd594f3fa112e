// Command-line front end: pf, opf, fit, classify, sweep, gap.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "loadopf/errors.hpp"
#include "loadopf/experiments.hpp"
#include "loadopf/io.hpp"
#include "loadopf/report.hpp"

using namespace loadopf;

namespace {

struct Output {
    std::string format = "json";
    std::string path;

    void write(const std::string& text) const {
        if (path.empty()) {
            std::cout << text;
            return;
        }
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
        out << text;
    }
};

std::vector<LoadKind> parse_kinds(const std::string& list) {
    std::vector<LoadKind> kinds;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) kinds.push_back(parse_load_kind(item));
    return kinds;
}

OperatingVoltage parse_voltage(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::ParseError, "--at-voltage expects \"vr,vi\"");
    try {
        return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
    } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, "--at-voltage expects \"vr,vi\", got '" + text + "'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AC power flow and optimal power flow under aggregated load models"};
    app.require_subcommand(1);
    app.fallthrough();
    Output out;
    app.add_option("--output", out.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--out", out.path, "Write the report here instead of stdout");

    std::string case_path;
    std::string segmented_path;
    std::string measurements_path;

    auto* pf = app.add_subcommand("pf", "Power flow");
    PFOptions pf_options;
    bool no_q_limits = false;
    pf->add_option("--case", case_path, "Case JSON")->required();
    pf->add_option("--tol", pf_options.tol, "Residual tolerance");
    pf->add_option("--max-iter", pf_options.max_iter, "Newton iteration limit");
    pf->add_flag("--no-q-limits", no_q_limits, "Leave generator reactive limits unenforced");

    auto* opf = app.add_subcommand("opf", "Optimal power flow");
    OPFOptions opf_options;
    opf->add_option("--case", case_path, "Case JSON")->required();
    opf->add_option("--kkt-tol", opf_options.kkt_tol, "KKT residual tolerance");
    opf->add_option("--max-iter", opf_options.max_iter, "Interior-point iteration limit");

    auto* fit = app.add_subcommand("fit", "Segmented load-model fit of a measurement series");
    std::string model = "big";
    std::size_t segments = 1;
    std::size_t min_len = kDefaultMinSegment;
    std::optional<int> bus;
    fit->add_option("--measurements", measurements_path, "Measurement CSV")->required();
    fit->add_option("--model", model, "Model kind")->check(CLI::IsMember({"pq", "zip", "big", "y"}));
    fit->add_option("--segments", segments, "Number of segments");
    fit->add_option("--min-len", min_len, "Minimum samples per segment");
    fit->add_option("--bus", bus, "Bus id (default: digits in the file name)");

    auto* cls = app.add_subcommand("classify", "Power-type / impedance-type classification of every load");
    std::string at_voltage = "1,0";
    cls->add_option("--case", case_path, "Case JSON")->required();
    cls->add_option("--at-voltage", at_voltage, "Operating voltage \"vr,vi\"");

    auto* sweep = app.add_subcommand("sweep", "OPF for every segment and load-model kind");
    std::string kinds = "pq,zip,big";
    sweep->add_option("--segmented", segmented_path, "Segmented case JSON")->required();
    sweep->add_option("--kinds", kinds, "Comma-separated model kinds");
    sweep->add_option("--kkt-tol", opf_options.kkt_tol, "KKT residual tolerance");

    auto* gap = app.add_subcommand("gap", "Generation needed when one model's setpoints meet another model's loads");
    GapOptions gap_options;
    std::string from = "pq";
    std::string to = "zip";
    std::string freeze = "all";
    gap->add_option("--segmented", segmented_path, "Segmented case JSON")->required();
    gap->add_option("--from", from, "Model kind the OPF is solved with");
    gap->add_option("--to", to, "Model kind the power flow is run with");
    gap->add_option("--freeze", freeze, "Setpoints carried over")->check(CLI::IsMember({"all", "voltages-only"}));
    gap->add_option("--kkt-tol", gap_options.opf.kkt_tol, "KKT residual tolerance");

    CLI11_PARSE(app, argc, argv);

    try {
        const auto format = parse_report_format(out.format);
        if (*pf) {
            pf_options.enforce_q_limits = !no_q_limits;
            const auto grid = load_case(case_path);
            out.write(emit_report(grid, solve_pf(grid, pf_options), format));
        } else if (*opf) {
            const auto grid = load_case(case_path);
            out.write(emit_report(grid, solve_opf(grid, opf_options), format));
        } else if (*fit) {
            const auto series = load_measurements(measurements_path, bus);
            const auto kind = parse_load_kind(model);
            out.write(emit_report(series, kind, segment_fit(series.samples, segments, kind, min_len), format));
        } else if (*cls) {
            const auto grid = load_case(case_path);
            const auto v = parse_voltage(at_voltage);
            std::vector<LoadClassification> loads;
            for (const auto& l : grid.loads) loads.push_back({l.bus, kind_of(l.model), classify(l.model, v)});
            out.write(emit_report(loads, format));
        } else if (*sweep) {
            const auto seg = load_segmented(segmented_path);
            const auto report = experiment_sweep(seg, parse_kinds(kinds), opf_options);
            out.write(emit_report(report, format));
            return report.has_errors() ? 1 : 0;
        } else if (*gap) {
            gap_options.freeze = freeze == "all" ? FreezeMode::All : FreezeMode::VoltagesOnly;
            const auto seg = load_segmented(segmented_path);
            const auto report = experiment_gap(seg, parse_load_kind(from), parse_load_kind(to), gap_options);
            out.write(emit_report(report, format));
            return report.has_errors() ? 1 : 0;
        }
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
