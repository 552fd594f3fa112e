#include "loadopf/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "loadopf/errors.hpp"

namespace loadopf {

namespace {

using nlohmann::json;

std::string num(double x) { return std::isfinite(x) ? fmt::format("{}", x) : std::string(); }

std::string field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { row(header); }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < columns_; ++k) {
            if (k) out_ += ',';
            if (k < cells.size()) out_ += field(cells[k]);
        }
        out_ += '\n';
    }

    std::string str() && { return std::move(out_); }

  private:
    std::size_t columns_;
    std::string out_;
};

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

json phasor(const OperatingVoltage& v) { return {{"v_r", v.v_r}, {"v_i", v.v_i}, {"vm", v.magnitude()}}; }

double angle_deg(const OperatingVoltage& v) { return std::atan2(v.v_i, v.v_r) * 180.0 / std::numbers::pi; }

json margins(const std::vector<Margin>& ms) {
    json o = json::object();
    for (const auto& m : ms) o[m.name] = m.value;
    return o;
}

double largest(const std::vector<Margin>& ms) {
    double out = -std::numeric_limits<double>::infinity();
    for (const auto& m : ms) out = std::max(out, m.value);
    return ms.empty() ? std::numeric_limits<double>::quiet_NaN() : out;
}

json classification_json(const LoadClassification& c) {
    return {{"bus", c.bus},
            {"model", std::string(to_string(c.kind))},
            {"at", {{"v_r", c.report.at.v_r}, {"v_i", c.report.at.v_i}}},
            {"p_class", std::string(to_string(c.report.p_class))},
            {"q_class", std::string(to_string(c.report.q_class))},
            {"joint", std::string(to_string(c.report.joint))},
            {"p_margins", margins(c.report.p_margins)},
            {"q_margins", margins(c.report.q_margins)}};
}

json params_json(const LoadModel& model) {
    json o = json::object();
    const auto names = parameter_names(kind_of(model));
    const auto values = parameter_values(model);
    for (std::size_t k = 0; k < names.size(); ++k) o[std::string(names[k])] = values[k];
    return o;
}

std::string_view freeze_name(FreezeMode f) { return f == FreezeMode::All ? "all" : "voltages-only"; }

}  // namespace

ReportFormat parse_report_format(std::string_view name) {
    if (name == "json") return ReportFormat::Json;
    if (name == "csv") return ReportFormat::Csv;
    throw Error(ErrorCode::ParseError, fmt::format("unknown output format '{}'", name));
}

std::string emit_report(const SweepReport& report, ReportFormat format) {
    if (format == ReportFormat::Json) {
        json rows = json::array();
        for (const auto& r : report.rows) {
            json o = {{"segment", r.segment},
                      {"kind", std::string(to_string(r.kind))},
                      {"status", r.status},
                      {"objective", r.objective},
                      {"iterations", r.iterations},
                      {"kkt_residual", r.kkt_residual}};
            if (!r.ok()) o["error"] = r.error;
            json buses = json::array();
            for (std::size_t i = 0; i < r.v.size(); ++i) {
                json b = phasor(r.v[i]);
                b["id"] = report.bus_ids[i];
                b["activity"] = std::string(to_string(r.v_activity[i]));
                buses.push_back(b);
            }
            json gens = json::array();
            for (std::size_t k = 0; k < r.p_g.size(); ++k) {
                gens.push_back({{"bus", report.generator_buses[k]},
                                {"p", r.p_g[k]},
                                {"q", r.q_g[k]},
                                {"p_activity", std::string(to_string(r.p_activity[k]))},
                                {"q_activity", std::string(to_string(r.q_activity[k]))}});
            }
            json loads = json::array();
            for (const auto& c : r.loads) loads.push_back(classification_json(c));
            o["buses"] = buses;
            o["generators"] = gens;
            o["loads"] = loads;
            rows.push_back(o);
        }
        return dump({{"rows", rows}});
    }
    std::vector<std::string> header{"segment", "kind", "objective", "status", "iterations", "kkt_residual", "error"};
    for (int id : report.bus_ids) {
        for (const char* c : {"vm", "v_r", "v_i", "v_act"}) header.push_back(fmt::format("{}_{}", c, id));
    }
    for (std::size_t k = 1; k <= report.generator_buses.size(); ++k) {
        for (const char* c : {"p", "q", "p_act", "q_act"}) header.push_back(fmt::format("{}_{}", c, k));
    }
    for (int id : report.load_buses) {
        for (const char* c : {"class_p", "class_q", "margin_p"}) header.push_back(fmt::format("{}_{}", c, id));
    }
    CsvWriter csv(header);
    for (const auto& r : report.rows) {
        std::vector<std::string> cells{std::to_string(r.segment), std::string(to_string(r.kind)), num(r.objective),
                                       r.status, std::to_string(r.iterations), num(r.kkt_residual), r.error};
        const auto blanks = [&](std::size_t n) { cells.insert(cells.end(), n, std::string()); };
        if (r.ok()) {
            for (std::size_t i = 0; i < r.v.size(); ++i) {
                cells.insert(cells.end(), {num(r.v[i].magnitude()), num(r.v[i].v_r), num(r.v[i].v_i),
                                           std::string(to_string(r.v_activity[i]))});
            }
            for (std::size_t k = 0; k < r.p_g.size(); ++k) {
                cells.insert(cells.end(), {num(r.p_g[k]), num(r.q_g[k]), std::string(to_string(r.p_activity[k])),
                                           std::string(to_string(r.q_activity[k]))});
            }
            for (const auto& c : r.loads) {
                cells.insert(cells.end(), {std::string(to_string(c.report.p_class)),
                                           std::string(to_string(c.report.q_class)), num(largest(c.report.p_margins))});
            }
        } else {
            blanks(4 * report.bus_ids.size() + 4 * report.generator_buses.size() + 3 * report.load_buses.size());
        }
        csv.row(cells);
    }
    return std::move(csv).str();
}

std::string emit_report(const GapReport& report, ReportFormat format) {
    if (format == ReportFormat::Json) {
        json rows = json::array();
        for (const auto& r : report.rows) {
            json o = {{"segment", r.segment},
                      {"objective_a", r.objective_a},
                      {"generation_a", r.generation_a},
                      {"generation_b", r.generation_b},
                      {"delta", r.delta},
                      {"pf_converged", r.pf_converged},
                      {"feasible_b", r.feasible_b},
                      {"status", r.status}};
            if (!r.ok()) o["error"] = r.error;
            rows.push_back(o);
        }
        return dump({{"from", std::string(to_string(report.from))},
                     {"to", std::string(to_string(report.to))},
                     {"freeze", std::string(freeze_name(report.freeze))},
                     {"mismatch", "slack"},
                     {"rows", rows}});
    }
    CsvWriter csv({"segment", "objective_a", "generation_a", "generation_b", "delta", "pf_converged", "feasible_b",
                   "status", "error"});
    for (const auto& r : report.rows) {
        csv.row({std::to_string(r.segment), num(r.objective_a), num(r.generation_a), num(r.generation_b),
                 num(r.delta), r.pf_converged ? "true" : "false", r.feasible_b ? "true" : "false", r.status,
                 r.error});
    }
    return std::move(csv).str();
}

std::string emit_report(const GridCase& grid, const PFSolution& sol, ReportFormat format) {
    if (format == ReportFormat::Json) {
        json buses = json::array();
        for (std::size_t i = 0; i < grid.buses.size(); ++i) {
            json b = phasor(sol.v[i]);
            b["id"] = grid.buses[i].id;
            b["va_deg"] = angle_deg(sol.v[i]);
            buses.push_back(b);
        }
        json gens = json::array();
        for (std::size_t k = 0; k < grid.generators.size(); ++k) {
            gens.push_back({{"bus", grid.generators[k].bus}, {"p", sol.gen_p[k]}, {"q", sol.gen_q[k]}});
        }
        return dump({{"iterations", sol.iterations},
                     {"residual", sol.residual},
                     {"low_voltage", sol.low_voltage},
                     {"q_limited_buses", sol.q_limited_buses},
                     {"total_generation", sol.total_generation()},
                     {"buses", buses},
                     {"generators", gens}});
    }
    CsvWriter csv({"element", "id", "v_r", "v_i", "vm", "p", "q"});
    for (std::size_t i = 0; i < grid.buses.size(); ++i) {
        csv.row({"bus", std::to_string(grid.buses[i].id), num(sol.v[i].v_r), num(sol.v[i].v_i),
                 num(sol.v[i].magnitude())});
    }
    for (std::size_t k = 0; k < grid.generators.size(); ++k) {
        csv.row({"generator", std::to_string(grid.generators[k].bus), "", "", "", num(sol.gen_p[k]),
                 num(sol.gen_q[k])});
    }
    return std::move(csv).str();
}

std::string emit_report(const GridCase& grid, const OPFSolution& sol, ReportFormat format) {
    if (format == ReportFormat::Json) {
        json buses = json::array();
        for (std::size_t i = 0; i < grid.buses.size(); ++i) {
            json b = phasor(sol.x.v[i]);
            b["id"] = grid.buses[i].id;
            b["activity"] = std::string(to_string(sol.v_activity[i]));
            buses.push_back(b);
        }
        json gens = json::array();
        for (std::size_t k = 0; k < grid.generators.size(); ++k) {
            gens.push_back({{"bus", grid.generators[k].bus},
                            {"p", sol.x.p_g[k]},
                            {"q", sol.x.q_g[k]},
                            {"p_activity", std::string(to_string(sol.p_activity[k]))},
                            {"q_activity", std::string(to_string(sol.q_activity[k]))}});
        }
        return dump({{"objective", sol.objective},
                     {"kkt_residual", sol.kkt_residual},
                     {"iterations", sol.iterations},
                     {"buses", buses},
                     {"generators", gens}});
    }
    CsvWriter csv({"element", "id", "v_r", "v_i", "vm", "v_act", "p", "q", "p_act", "q_act"});
    for (std::size_t i = 0; i < grid.buses.size(); ++i) {
        csv.row({"bus", std::to_string(grid.buses[i].id), num(sol.x.v[i].v_r), num(sol.x.v[i].v_i),
                 num(sol.x.v[i].magnitude()), std::string(to_string(sol.v_activity[i]))});
    }
    for (std::size_t k = 0; k < grid.generators.size(); ++k) {
        csv.row({"generator", std::to_string(grid.generators[k].bus), "", "", "", "", num(sol.x.p_g[k]),
                 num(sol.x.q_g[k]), std::string(to_string(sol.p_activity[k])),
                 std::string(to_string(sol.q_activity[k]))});
    }
    return std::move(csv).str();
}

std::string emit_report(const MeasurementSeries& series, LoadKind kind, const SegmentedFit& fit,
                        ReportFormat format) {
    const auto& samples = series.samples;
    if (format == ReportFormat::Json) {
        json segments = json::array();
        for (const auto& s : fit.fit.segments) {
            segments.push_back({{"begin", s.begin},
                                {"end", s.end},
                                {"t_begin", samples[s.begin].t},
                                {"t_end", samples[s.end - 1].t},
                                {"params", params_json(s.model)},
                                {"rms", s.rms},
                                {"sse", s.sse}});
        }
        return dump({{"bus", series.bus},
                     {"model", std::string(to_string(kind))},
                     {"boundaries", fit.segmentation.boundaries},
                     {"total_rms", fit.fit.total_rms},
                     {"total_sse", fit.fit.total_sse},
                     {"segments", segments}});
    }
    std::vector<std::string> header{"segment", "begin", "end", "t_begin", "t_end", "rms", "sse"};
    for (auto name : parameter_names(kind)) header.emplace_back(name);
    CsvWriter csv(header);
    for (std::size_t k = 0; k < fit.fit.segments.size(); ++k) {
        const auto& s = fit.fit.segments[k];
        std::vector<std::string> cells{std::to_string(k + 1), std::to_string(s.begin), std::to_string(s.end),
                                       num(samples[s.begin].t), num(samples[s.end - 1].t), num(s.rms), num(s.sse)};
        for (double v : parameter_values(s.model)) cells.push_back(num(v));
        csv.row(cells);
    }
    return std::move(csv).str();
}

std::string emit_report(const std::vector<LoadClassification>& loads, ReportFormat format) {
    if (format == ReportFormat::Json) {
        json arr = json::array();
        for (const auto& c : loads) arr.push_back(classification_json(c));
        return dump({{"loads", arr}});
    }
    CsvWriter csv({"bus", "model", "v_r", "v_i", "p_class", "q_class", "joint", "margin_p", "margin_q"});
    for (const auto& c : loads) {
        csv.row({std::to_string(c.bus), std::string(to_string(c.kind)), num(c.report.at.v_r), num(c.report.at.v_i),
                 std::string(to_string(c.report.p_class)), std::string(to_string(c.report.q_class)),
                 std::string(to_string(c.report.joint)), num(largest(c.report.p_margins)),
                 num(largest(c.report.q_margins))});
    }
    return std::move(csv).str();
}

}  // namespace loadopf
