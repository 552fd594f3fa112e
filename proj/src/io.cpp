#include "loadopf/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "loadopf/errors.hpp"

namespace loadopf {

namespace {

using nlohmann::json;

[[noreturn]] void parse_error(const std::string& message) { throw Error(ErrorCode::ParseError, message); }

json parse_json(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        parse_error(e.what());
    }
}

const json& member(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) parse_error(fmt::format("{} must be an object", path));
    const auto it = obj.find(key);
    if (it == obj.end()) parse_error(fmt::format("missing key {}.{}", path, key));
    return *it;
}

const json& array_member(const json& obj, const char* key, const std::string& path) {
    const auto& a = member(obj, key, path);
    if (!a.is_array()) parse_error(fmt::format("{}.{} must be an array", path, key));
    return a;
}

double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) parse_error(fmt::format("{} must be a number", path));
    return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) parse_error(fmt::format("{} must be an integer", path));
    return v.get<int>();
}

double number(const json& obj, const char* key, const std::string& path) {
    return as_number(member(obj, key, path), path + "." + key);
}

/// Missing or null means the fallback.
double optional_number(const json& obj, const char* key, const std::string& path, double fallback) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    return as_number(*it, path + "." + key);
}

std::string text(const json& obj, const char* key, const std::string& path) {
    const auto& v = member(obj, key, path);
    if (!v.is_string()) parse_error(fmt::format("{}.{} must be a string", path, key));
    return v.get<std::string>();
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known, const std::string& path) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            parse_error(fmt::format("unknown key {}.{}", path, key));
        }
    }
}

template <typename F>
auto with_path(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        if (e.code() != ErrorCode::ParseError) throw;
        parse_error(fmt::format("{}: {}", path, e.what()));
    }
}

LoadModel parse_model(const json& entry, const std::string& path) {
    const auto kind = with_path(path + ".model", [&] { return parse_load_kind(text(entry, "model", path)); });
    const auto& params = member(entry, "params", path);
    if (!params.is_object()) parse_error(fmt::format("{}.params must be an object", path));
    const auto names = parameter_names(kind);
    std::vector<double> values;
    for (auto name : names) values.push_back(number(params, std::string(name).c_str(), path + ".params"));
    for (const auto& [key, value] : params.items()) {
        if (std::find(names.begin(), names.end(), key) == names.end()) {
            parse_error(fmt::format("unknown key {}.params.{} for a {} load", path, key, to_string(kind)));
        }
    }
    return make_model(kind, values);
}

json model_json(const LoadModel& model) {
    const auto kind = kind_of(model);
    json params = json::object();
    const auto names = parameter_names(kind);
    const auto values = parameter_values(model);
    for (std::size_t k = 0; k < names.size(); ++k) params[std::string(names[k])] = values[k];
    return {{"model", std::string(to_string(kind))}, {"params", params}};
}

void put_bound(json& obj, const char* key, double v) {
    if (std::isfinite(v)) obj[key] = v;
}

GridCase case_from_json(const json& doc, const std::string& root) {
    if (!doc.is_object()) parse_error(fmt::format("{} must be an object", root));
    reject_unknown(doc, {"buses", "branches", "generators", "loads", "name", "note"}, root);
    GridCase grid;
    const auto& buses = array_member(doc, "buses", root);
    for (std::size_t k = 0; k < buses.size(); ++k) {
        const auto path = fmt::format("{}.buses[{}]", root, k);
        const auto& b = buses[k];
        Bus bus;
        bus.id = as_int(member(b, "id", path), path + ".id");
        bus.kind = with_path(path + ".kind", [&] { return parse_bus_kind(text(b, "kind", path)); });
        bus.v_min = optional_number(b, "v_min", path, bus.v_min);
        bus.v_max = optional_number(b, "v_max", path, bus.v_max);
        bus.v_set = optional_number(b, "v_set", path, bus.v_set);
        reject_unknown(b, {"id", "kind", "v_min", "v_max", "v_set"}, path);
        grid.buses.push_back(bus);
    }
    const auto& branches = array_member(doc, "branches", root);
    for (std::size_t k = 0; k < branches.size(); ++k) {
        const auto path = fmt::format("{}.branches[{}]", root, k);
        const auto& b = branches[k];
        Branch br;
        br.from = as_int(member(b, "from", path), path + ".from");
        br.to = as_int(member(b, "to", path), path + ".to");
        br.r = number(b, "r", path);
        br.x = number(b, "x", path);
        br.b_sh = optional_number(b, "b_sh", path, 0.0);
        reject_unknown(b, {"from", "to", "r", "x", "b_sh"}, path);
        grid.branches.push_back(br);
    }
    const auto& gens = array_member(doc, "generators", root);
    for (std::size_t k = 0; k < gens.size(); ++k) {
        const auto path = fmt::format("{}.generators[{}]", root, k);
        const auto& g = gens[k];
        Generator gen;
        gen.bus = as_int(member(g, "bus", path), path + ".bus");
        gen.p_min = optional_number(g, "p_min", path, gen.p_min);
        gen.p_max = optional_number(g, "p_max", path, gen.p_max);
        gen.q_min = optional_number(g, "q_min", path, gen.q_min);
        gen.q_max = optional_number(g, "q_max", path, gen.q_max);
        gen.p_set = optional_number(g, "p_set", path, gen.p_set);
        if (const auto it = g.find("cost"); it != g.end()) {
            const auto cpath = path + ".cost";
            if (it->is_array()) {
                if (it->size() != 3) parse_error(fmt::format("{} must hold [c2, c1, c0]", cpath));
                gen.cost = {as_number((*it)[0], cpath + "[0]"), as_number((*it)[1], cpath + "[1]"),
                            as_number((*it)[2], cpath + "[2]")};
            } else if (it->is_object()) {
                gen.cost = {optional_number(*it, "c2", cpath, 0.0), optional_number(*it, "c1", cpath, 0.0),
                            optional_number(*it, "c0", cpath, 0.0)};
                reject_unknown(*it, {"c2", "c1", "c0"}, cpath);
            } else {
                parse_error(fmt::format("{} must be an array or an object", cpath));
            }
        }
        reject_unknown(g, {"bus", "p_min", "p_max", "q_min", "q_max", "p_set", "cost"}, path);
        grid.generators.push_back(gen);
    }
    if (const auto it = doc.find("loads"); it != doc.end()) {
        if (!it->is_array()) parse_error(fmt::format("{}.loads must be an array", root));
        for (std::size_t k = 0; k < it->size(); ++k) {
            const auto path = fmt::format("{}.loads[{}]", root, k);
            const auto& l = (*it)[k];
            reject_unknown(l, {"bus", "model", "params"}, path);
            grid.loads.push_back({as_int(member(l, "bus", path), path + ".bus"), parse_model(l, path)});
        }
    }
    return grid;
}

json case_json(const GridCase& grid) {
    json doc = json::object();
    json buses = json::array();
    for (const auto& b : grid.buses) {
        buses.push_back({{"id", b.id},
                         {"kind", std::string(to_string(b.kind))},
                         {"v_min", b.v_min},
                         {"v_max", b.v_max},
                         {"v_set", b.v_set}});
    }
    json branches = json::array();
    for (const auto& br : grid.branches) {
        branches.push_back({{"from", br.from}, {"to", br.to}, {"r", br.r}, {"x", br.x}, {"b_sh", br.b_sh}});
    }
    json gens = json::array();
    for (const auto& g : grid.generators) {
        json o = {{"bus", g.bus}};
        put_bound(o, "p_min", g.p_min);
        put_bound(o, "p_max", g.p_max);
        put_bound(o, "q_min", g.q_min);
        put_bound(o, "q_max", g.q_max);
        o["p_set"] = g.p_set;
        o["cost"] = json::array({g.cost.c2, g.cost.c1, g.cost.c0});
        gens.push_back(o);
    }
    json loads = json::array();
    for (const auto& l : grid.loads) {
        json o = model_json(l.model);
        o["bus"] = l.bus;
        loads.push_back(o);
    }
    doc["buses"] = buses;
    doc["branches"] = branches;
    doc["generators"] = gens;
    doc["loads"] = loads;
    return doc;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    for (;;) {
        const auto pos = line.find(sep);
        out.push_back(trim(line.substr(0, pos)));
        if (pos == std::string_view::npos) return out;
        line.remove_prefix(pos + 1);
    }
}

constexpr std::array<std::string_view, 5> kCsvColumns{"t", "v_r", "v_i", "i_r", "i_i"};

}  // namespace

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ParseError, fmt::format("cannot open {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

GridCase parse_case(std::string_view json_text) {
    return validate_case(case_from_json(parse_json(json_text), "case"));
}

GridCase load_case(const std::filesystem::path& path) {
    const auto content = read_file(path);
    try {
        return parse_case(content);
    } catch (const Error& e) {
        throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::string format_case(const GridCase& grid) { return case_json(grid).dump(2) + "\n"; }

MeasurementSeries parse_measurements(std::string_view csv, int bus) {
    MeasurementSeries series;
    series.bus = bus;
    bool header = true;
    std::size_t line_no = 0;
    while (!csv.empty()) {
        const auto eol = csv.find('\n');
        const auto raw = csv.substr(0, eol);
        csv.remove_prefix(eol == std::string_view::npos ? csv.size() : eol + 1);
        ++line_no;
        const auto line = trim(raw);
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (header) {
            for (std::size_t k = 0; k < std::max(fields.size(), kCsvColumns.size()); ++k) {
                if (k >= fields.size()) {
                    parse_error(fmt::format("line {}: missing column '{}'", line_no, kCsvColumns[k]));
                }
                if (k >= kCsvColumns.size()) {
                    parse_error(fmt::format("line {}: unexpected column '{}'", line_no, fields[k]));
                }
                if (fields[k] != kCsvColumns[k]) {
                    parse_error(fmt::format("line {}: column {} is '{}', expected '{}'", line_no, k + 1, fields[k],
                                            kCsvColumns[k]));
                }
            }
            header = false;
            continue;
        }
        if (fields.size() != kCsvColumns.size()) {
            parse_error(fmt::format("line {}: expected {} fields, found {}", line_no, kCsvColumns.size(),
                                    fields.size()));
        }
        std::array<double, 5> v{};
        for (std::size_t k = 0; k < v.size(); ++k) {
            const auto f = fields[k];
            const auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), v[k]);
            if (ec != std::errc() || end != f.data() + f.size()) {
                parse_error(fmt::format("line {}, column {}: '{}' is not a number", line_no, kCsvColumns[k], f));
            }
        }
        series.samples.push_back({v[0], v[1], v[2], v[3], v[4]});
    }
    if (header) parse_error("missing header t,v_r,v_i,i_r,i_i");
    validate_series(series.samples);
    return series;
}

MeasurementSeries load_measurements(const std::filesystem::path& path, std::optional<int> bus) {
    if (!bus) {
        const auto stem = path.stem().string();
        const auto first = std::find_if(stem.begin(), stem.end(), [](char c) { return std::isdigit(c); });
        const auto last = std::find_if(first, stem.end(), [](char c) { return !std::isdigit(c); });
        if (first == stem.end()) {
            throw Error(ErrorCode::ParseError,
                        fmt::format("{}: no bus id in the file name; pass one explicitly", path.string()));
        }
        bus = std::stoi(std::string(first, last));
    }
    const auto content = read_file(path);
    try {
        return parse_measurements(content, *bus);
    } catch (const Error& e) {
        throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::string format_measurements(const MeasurementSeries& series) {
    std::string out = "t,v_r,v_i,i_r,i_i\n";
    for (const auto& s : series.samples) out += fmt::format("{},{},{},{},{}\n", s.t, s.v_r, s.v_i, s.i_r, s.i_i);
    return out;
}

SegmentedCase parse_segmented(std::string_view json_text) {
    const auto doc = parse_json(json_text);
    if (!doc.is_object()) parse_error("segmented case must be an object");
    reject_unknown(doc, {"base", "families", "name", "note"}, "segmented");
    SegmentedCase seg;
    seg.base = case_from_json(member(doc, "base", "segmented"), "base");
    const auto& families = member(doc, "families", "segmented");
    if (!families.is_object()) parse_error("segmented.families must be an object");
    for (const auto& [key, segments] : families.items()) {
        const auto fpath = "families." + key;
        const auto kind = with_path(fpath, [&] { return parse_load_kind(key); });
        if (!segments.is_array()) parse_error(fmt::format("{} must be an array of segments", fpath));
        auto& family = seg.families[kind];
        for (std::size_t s = 0; s < segments.size(); ++s) {
            const auto spath = fmt::format("{}[{}]", fpath, s);
            if (!segments[s].is_object()) parse_error(fmt::format("{} must map bus ids to loads", spath));
            SegmentLoads loads;
            for (const auto& [bus_key, entry] : segments[s].items()) {
                const auto lpath = fmt::format("{}.{}", spath, bus_key);
                int bus = 0;
                const auto [end, ec] = std::from_chars(bus_key.data(), bus_key.data() + bus_key.size(), bus);
                if (ec != std::errc() || end != bus_key.data() + bus_key.size()) {
                    parse_error(fmt::format("{}: key is not a bus id", lpath));
                }
                reject_unknown(entry, {"model", "params"}, lpath);
                loads.push_back({bus, parse_model(entry, lpath)});
            }
            family.push_back(std::move(loads));
        }
    }
    return validate_segmented(std::move(seg));
}

SegmentedCase load_segmented(const std::filesystem::path& path) {
    const auto content = read_file(path);
    try {
        return parse_segmented(content);
    } catch (const Error& e) {
        throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::string format_segmented(const SegmentedCase& seg) {
    json families = json::object();
    for (const auto& [kind, segments] : seg.families) {
        json arr = json::array();
        for (const auto& loads : segments) {
            json s = json::object();
            for (const auto& l : loads) s[std::to_string(l.bus)] = model_json(l.model);
            arr.push_back(s);
        }
        families[std::string(to_string(kind))] = arr;
    }
    json doc = {{"base", case_json(seg.base)}, {"families", families}};
    return doc.dump(2) + "\n";
}

}  // namespace loadopf
