#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "loadopf/errors.hpp"
#include "loadopf/experiments.hpp"
#include "loadopf/io.hpp"
#include "loadopf/report.hpp"
#include "opf_oracle.hpp"
#include "test_support.hpp"

using namespace loadopf;
using namespace loadopf::testing;
using doctest::Approx;

namespace {

constexpr const char* kTwoBus = R"({
  "buses": [
    {"id": 1, "kind": "slack", "v_min": 0.95, "v_max": 1.05},
    {"id": 2, "kind": "load"}
  ],
  "branches": [{"from": 1, "to": 2, "r": 0.01, "x": 0.1}],
  "generators": [{"bus": 1, "p_min": 0, "p_max": null, "cost": [0.1, 2, 0]}],
  "loads": [{"bus": 2, "model": "zip", "params": {"p0": 0.5, "q0": 0.1, "ip": 0.2, "iq": 0, "g": 0.1, "b": 0}}]
})";

template <typename F>
std::string error_message(F&& f, ErrorCode expected) {
    try {
        f();
    } catch (const Error& e) {
        CHECK(e.code() == expected);
        return e.what();
    }
    FAIL("no error raised");
    return {};
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows(1);
    std::string cell;
    bool quoted = false;
    for (std::size_t k = 0; k < text.size(); ++k) {
        const char c = text[k];
        if (quoted) {
            if (c == '"' && k + 1 < text.size() && text[k + 1] == '"') {
                cell += '"';
                ++k;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            rows.back().push_back(std::move(cell));
            cell.clear();
        } else if (c == '\n') {
            rows.back().push_back(std::move(cell));
            cell.clear();
            rows.emplace_back();
        } else {
            cell += c;
        }
    }
    rows.pop_back();
    return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    REQUIRE(it != header.end());
    return static_cast<std::size_t>(it - header.begin());
}

/// Three-bus network with one segment per entry of `pq`; the Y family holds
/// the equivalent admittances of the same nominal powers, the ZIP family an
/// impedance-leaning split of them.
SegmentedCase three_bus_segments(const std::vector<std::pair<PQParams, PQParams>>& pq) {
    SegmentedCase seg;
    seg.base = three_bus(PQParams{}, PQParams{});
    for (const auto& [a, b] : pq) {
        seg.families[LoadKind::PQ].push_back({{2, a}, {3, b}});
        seg.families[LoadKind::Y].push_back(
            {{2, equivalent_admittance(a.p, a.q)}, {3, equivalent_admittance(b.p, b.q)}});
        const auto zip = [](const PQParams& x) {
            return ZIPParams{0.2 * x.p, 0.2 * x.q, 0.3 * x.p, 0.3 * x.q, 0.5 * x.p, 0.5 * x.q};
        };
        seg.families[LoadKind::ZIP].push_back({{2, zip(a)}, {3, zip(b)}});
    }
    return validate_segmented(seg);
}

const std::vector<std::pair<PQParams, PQParams>> kProfiles{
    {{0.9, 0.3}, {0.6, 0.2}}, {{0.5, 0.1}, {0.4, 0.15}}, {{1.2, 0.4}, {0.3, 0.05}}};

}  // namespace

TEST_CASE("parse_case: minimal two-bus document") {
    const auto c = parse_case(kTwoBus);
    REQUIRE(c.buses.size() == 2);
    CHECK(c.buses[0].kind == BusKind::Slack);
    CHECK(c.buses[0].v_min == 0.95);
    CHECK(c.buses[1].v_min == 0.94);
    CHECK(c.buses[1].v_max == 1.06);
    CHECK(c.branches[0].b_sh == 0.0);
    CHECK(std::isinf(c.generators[0].p_max));
    CHECK(std::isinf(c.generators[0].q_min));
    CHECK(c.generators[0].cost.c2 == 0.1);
    CHECK(c.generators[0].cost.c1 == 2.0);
    const auto& zip = std::get<ZIPParams>(c.loads[0].model);
    CHECK(zip.i_p == 0.2);
    CHECK(zip.g_z == 0.1);
}

TEST_CASE("parse_case: errors name the key") {
    std::string missing = kTwoBus;
    missing.replace(missing.find("\"x\": 0.1"), 8, "\"y\": 0.1");
    auto msg = error_message([&] { parse_case(missing); }, ErrorCode::ParseError);
    CHECK(msg.find("case.branches[0].x") != std::string::npos);

    std::string typo = kTwoBus;
    typo.replace(typo.find("\"ip\""), 4, "\"i_p\"");
    msg = error_message([&] { parse_case(typo); }, ErrorCode::ParseError);
    CHECK(msg.find("case.loads[0].params.ip") != std::string::npos);

    std::string kind = kTwoBus;
    kind.replace(kind.find("\"load\""), 6, "\"sink\"");
    msg = error_message([&] { parse_case(kind); }, ErrorCode::ParseError);
    CHECK(msg.find("case.buses[1].kind") != std::string::npos);

    msg = error_message([] { parse_case("{\"buses\": [\n  {\"id\": 1,,}\n]}"); }, ErrorCode::ParseError);
    CHECK(msg.find("line 2") != std::string::npos);

    std::string dup = kTwoBus;
    dup.replace(dup.find("\"id\": 2"), 7, "\"id\": 1");
    error_message([&] { parse_case(dup); }, ErrorCode::DuplicateBusId);
}

TEST_CASE("format_case round-trips") {
    const auto c = three_bus(ZIPParams{0.5, 0.1, 0.2, 0.05, 0.3, -0.1}, BIGParams{0.4, 0.01, 0.2, -0.1});
    const auto text = format_case(c);
    const auto back = parse_case(text);
    CHECK(format_case(back) == text);
    CHECK(back.buses.size() == 3);
    CHECK(back.generators[0].p_max == 10.0);
    CHECK(std::get<BIGParams>(back.loads[1].model).b_b == -0.1);
}

TEST_CASE("parse_measurements: header typo names the column") {
    const auto msg =
        error_message([] { parse_measurements("t,vr,v_i,i_r,i_i\n0,1,0,0.5,0\n", 2); }, ErrorCode::ParseError);
    CHECK(msg.find("'vr'") != std::string::npos);
    CHECK(msg.find("'v_r'") != std::string::npos);
    CHECK(msg.find("line 1") != std::string::npos);

    const auto bad = error_message([] { parse_measurements("t,v_r,v_i,i_r,i_i\n0,1,0,0.5,0\n1,1,0,x,0\n", 2); },
                                   ErrorCode::ParseError);
    CHECK(bad.find("line 3") != std::string::npos);
    CHECK(bad.find("i_r") != std::string::npos);

    error_message([] { parse_measurements("t,v_r,v_i,i_r\n", 2); }, ErrorCode::ParseError);
    error_message([] { parse_measurements("t,v_r,v_i,i_r,i_i\n1,1,0,0,0\n0,1,0,0,0\n", 2); },
                  ErrorCode::InvalidParameter);
}

TEST_CASE("measurements round-trip through a file; bus id from the name") {
    MeasurementSeries s;
    s.bus = 0;
    for (int k = 0; k < 5; ++k) s.samples.push_back({60.0 * k, 1.0 + 0.01 * k, -0.02, 0.5 / 3.0, 0.1 * k});
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = dir / "loadopf_bus7_day1.csv";
    std::ofstream(path) << format_measurements(s);
    const auto back = load_measurements(path);
    CHECK(back.bus == 7);
    REQUIRE(back.samples.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(back.samples[k].v_r == s.samples[k].v_r);
        CHECK(back.samples[k].i_r == s.samples[k].i_r);
    }
    CHECK(load_measurements(path, 3).bus == 3);
    std::filesystem::remove(path);
}

TEST_CASE("segmented case validation") {
    std::vector<std::pair<PQParams, PQParams>> six(6, kProfiles[0]);
    auto seg = three_bus_segments(six);
    CHECK(seg.segment_count() == 6);

    auto missing = seg;
    missing.families[LoadKind::PQ][4].pop_back();
    auto msg = error_message([&] { validate_segmented(missing); }, ErrorCode::ValidationError);
    CHECK(msg.find("segment 5 missing load bus 3") != std::string::npos);

    auto wrong_kind = seg;
    wrong_kind.families[LoadKind::ZIP][1][0].model = PQParams{1.0, 0.0};
    error_message([&] { validate_segmented(wrong_kind); }, ErrorCode::ValidationError);

    auto short_family = seg;
    short_family.families[LoadKind::Y].pop_back();
    error_message([&] { validate_segmented(short_family); }, ErrorCode::ValidationError);

    auto stray = seg;
    stray.families[LoadKind::PQ][0].push_back({1, PQParams{}});
    error_message([&] { validate_segmented(stray); }, ErrorCode::ValidationError);

    // Text round trip, including the bus-keyed segment objects.
    const auto text = format_segmented(seg);
    const auto back = parse_segmented(text);
    CHECK(format_segmented(back) == text);

    auto doc = nlohmann::json::parse(text);
    doc["families"]["pq"][4].erase("3");
    msg = error_message([&] { parse_segmented(doc.dump()); }, ErrorCode::ValidationError);
    CHECK(msg.find("segment 5 missing load bus 3") != std::string::npos);
}

TEST_CASE("experiment_sweep: PQ voltages above Y voltages, matching the brute-force oracle") {
    const auto seg = three_bus_segments({kProfiles[0]});
    const std::vector<LoadKind> kinds{LoadKind::Y, LoadKind::PQ};
    const auto report = experiment_sweep(seg, kinds);
    REQUIRE(report.rows.size() == 2);
    CHECK_FALSE(report.has_errors());
    const auto& pq = report.rows[0];
    const auto& y = report.rows[1];
    CHECK(pq.kind == LoadKind::PQ);
    CHECK(y.kind == LoadKind::Y);

    const auto oracle_pq = grid_search_opf(seg.apply(LoadKind::PQ, 0));
    const auto oracle_y = grid_search_opf(seg.apply(LoadKind::Y, 0));
    REQUIRE(oracle_pq);
    REQUIRE(oracle_y);
    for (std::size_t i = 1; i < 3; ++i) {
        CHECK(oracle_pq->v[i].magnitude() >= oracle_y->v[i].magnitude());
        CHECK(pq.v[i].magnitude() >= y.v[i].magnitude());
        CHECK(std::abs(pq.v[i].magnitude() - oracle_pq->v[i].magnitude()) <= 2e-3);
        CHECK(std::abs(y.v[i].magnitude() - oracle_y->v[i].magnitude()) <= 2e-3);
    }
    CHECK(std::abs(pq.objective - oracle_pq->objective) <= 1e-3);
    CHECK(std::abs(y.objective - oracle_y->objective) <= 1e-3);
    for (const auto& c : pq.loads) CHECK(c.report.p_class == LoadType::PowerType);
    for (const auto& c : y.loads) CHECK(c.report.p_class == LoadType::ImpedanceType);
}

TEST_CASE("experiment_sweep: zero-load segment costs nothing") {
    auto seg = three_bus_segments({{{0.0, 0.0}, {0.0, 0.0}}});
    // Without line charging nothing flows at all.
    for (auto& br : seg.base.branches) br.b_sh = 0.0;
    const std::vector<LoadKind> kinds{LoadKind::PQ};
    const auto report = experiment_sweep(seg, kinds);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].ok());
    CHECK(std::abs(report.rows[0].objective) <= 1e-6);
}

TEST_CASE("experiment_sweep: infeasible cells are recorded, the rest still run") {
    auto profiles = kProfiles;
    profiles[1] = {{40.0, 5.0}, {30.0, 5.0}};
    const auto seg = three_bus_segments(profiles);
    const std::vector<LoadKind> kinds{LoadKind::PQ, LoadKind::ZIP, LoadKind::Y};
    const auto report = experiment_sweep(seg, kinds);
    REQUIRE(report.rows.size() == 9);
    CHECK(report.has_errors());
    for (const auto& r : report.rows) {
        if (r.segment == 2 && r.kind == LoadKind::PQ) {
            CHECK_FALSE(r.ok());
            CHECK(std::isnan(r.objective));
        }
        if (r.segment != 2) CHECK(r.ok());
    }
    const auto csv = parse_csv(emit_report(report, ReportFormat::Csv));
    CHECK(csv.size() == 10);
    for (const auto& row : csv) CHECK(row.size() == csv[0].size());
}

TEST_CASE("experiment_sweep: classification column reproduces from the CSV voltages") {
    const auto seg = three_bus_segments(kProfiles);
    const std::vector<LoadKind> kinds{LoadKind::PQ, LoadKind::ZIP, LoadKind::Y};
    const auto report = experiment_sweep(seg, kinds);
    const auto csv = parse_csv(emit_report(report, ReportFormat::Csv));
    const auto& header = csv[0];
    REQUIRE(csv.size() == 1 + report.rows.size());
    int checked = 0;
    for (std::size_t r = 1; r < csv.size(); ++r) {
        const auto& row = csv[r];
        if (row[column(header, "status")] != "ok") continue;
        const auto segment = std::stoul(row[column(header, "segment")]) - 1;
        const auto kind = parse_load_kind(row[column(header, "kind")]);
        const auto grid = seg.apply(kind, segment);
        for (const auto& load : grid.loads) {
            const auto id = std::to_string(load.bus);
            const OperatingVoltage v{std::stod(row[column(header, "v_r_" + id)]),
                                     std::stod(row[column(header, "v_i_" + id)])};
            const auto rep = classify(load.model, v);
            CHECK(row[column(header, "class_p_" + id)] == to_string(rep.p_class));
            CHECK(row[column(header, "class_q_" + id)] == to_string(rep.q_class));
            CHECK(std::stod(row[column(header, "margin_p_" + id)]) == mpt_margin(load.model, v));
            ++checked;
        }
    }
    CHECK(checked == 18);
}

TEST_CASE("experiment_gap: identical families give zero delta") {
    const auto seg = three_bus_segments(kProfiles);
    const GapOptions options;
    for (auto kind : {LoadKind::PQ, LoadKind::ZIP, LoadKind::Y}) {
        const auto report = experiment_gap(seg, kind, kind, options);
        REQUIRE(report.rows.size() == 3);
        CHECK_FALSE(report.has_errors());
        for (const auto& r : report.rows) {
            CHECK(r.pf_converged);
            CHECK(r.feasible_b);
            CHECK(std::abs(r.delta) <= 10.0 * options.opf.kkt_tol);
        }
    }
}

TEST_CASE("experiment_gap: PQ setpoints under Y loads need more power") {
    const auto seg = three_bus_segments(kProfiles);
    const auto report = experiment_gap(seg, LoadKind::PQ, LoadKind::Y);
    REQUIRE(report.rows.size() == 3);
    for (std::size_t s = 0; s < 3; ++s) {
        const auto& r = report.rows[s];
        REQUIRE(r.ok());
        CHECK(r.delta > 0.0);
        // Independent: brute-force the PQ optimum, then a plain power flow of
        // the Y network at the same slack setpoint.
        const auto a = grid_search_opf(seg.apply(LoadKind::PQ, s));
        REQUIRE(a);
        auto b = seg.apply(LoadKind::Y, s);
        b.buses[0].v_set = a->v_slack;
        PFOptions opts;
        opts.tol = 1e-11;
        opts.enforce_q_limits = false;
        const auto pf = solve_pf(b, opts);
        const double delta = pf.total_generation() - a->objective;
        CHECK(delta > 0.0);
        CHECK(std::abs(r.delta - delta) <= 1e-3);
    }
}

TEST_CASE("experiment_gap: a feasible B point costs at least the B optimum") {
    const auto seg = three_bus_segments(kProfiles);
    const auto report = experiment_gap(seg, LoadKind::PQ, LoadKind::ZIP);
    int feasible = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        const auto& r = report.rows[s];
        REQUIRE(r.ok());
        if (!r.feasible_b) continue;
        ++feasible;
        // Unit linear cost: objective equals generation.
        const auto b_opt = solve_opf(seg.apply(LoadKind::ZIP, s));
        CHECK(r.generation_b >= b_opt.objective - 1e-6);
    }
    CHECK(feasible > 0);
}

TEST_CASE("experiment_gap: power-flow failure is recorded per segment") {
    auto seg = three_bus_segments(kProfiles);
    seg.families[LoadKind::ZIP][1] = {{2, ZIPParams{60.0, 20.0, 0, 0, 0, 0}}, {3, ZIPParams{60.0, 20.0, 0, 0, 0, 0}}};
    const auto report = experiment_gap(seg, LoadKind::PQ, LoadKind::ZIP);
    REQUIRE(report.rows.size() == 3);
    CHECK(report.rows[0].ok());
    CHECK_FALSE(report.rows[1].ok());
    CHECK_FALSE(report.rows[1].pf_converged);
    CHECK(report.rows[2].ok());
    CHECK(report.has_errors());
}

TEST_CASE("freeze_setpoints: voltages always, dispatch unless voltages-only") {
    auto c = three_bus(PQParams{0.5, 0.1}, PQParams{0.4, 0.1});
    c.buses[1].kind = BusKind::Generator;
    c.generators.push_back(Generator{2, 0.0, 1.0, -1.0, 1.0, {0.0, 2.0, 0.0}, 0.05});
    const auto sol = solve_opf(c);
    const auto all = freeze_setpoints(c, sol, FreezeMode::All);
    const auto volts = freeze_setpoints(c, sol, FreezeMode::VoltagesOnly);
    for (const auto* g : {&all, &volts}) {
        CHECK(g->buses[0].v_set == sol.x.v[0].magnitude());
        CHECK(g->buses[1].v_set == sol.x.v[1].magnitude());
        CHECK(g->buses[2].v_set == c.buses[2].v_set);
    }
    CHECK(all.generators[1].p_set == sol.x.p_g[1]);
    CHECK(volts.generators[1].p_set == 0.05);

    // Same loads: the frozen power flow lands back on the OPF point.
    PFOptions opts;
    opts.enforce_q_limits = false;
    const auto pf = solve_pf(all, opts);
    for (std::size_t i = 0; i < 3; ++i) CHECK(pf.v[i].magnitude() == Approx(sol.x.v[i].magnitude()).epsilon(1e-6));
}

TEST_CASE("emit_report: CSV layout and determinism") {
    const auto seg = three_bus_segments({kProfiles[0]});
    const std::vector<LoadKind> kinds{LoadKind::PQ, LoadKind::Y};
    const auto sweep = experiment_sweep(seg, kinds);
    const auto csv = emit_report(sweep, ReportFormat::Csv);
    CHECK(csv.rfind("segment,kind,objective,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(emit_report(sweep, ReportFormat::Csv) == csv);
    const auto json = emit_report(sweep, ReportFormat::Json);
    CHECK(emit_report(sweep, ReportFormat::Json) == json);
    const auto doc = nlohmann::json::parse(json);
    CHECK(doc["rows"].size() == 2);
    CHECK(doc["rows"][0]["objective"].get<double>() == sweep.rows[0].objective);

    GapReport empty;
    CHECK(emit_report(empty, ReportFormat::Csv) ==
          "segment,objective_a,generation_a,generation_b,delta,pf_converged,feasible_b,status,error\n");

    GapReport quoted;
    GapRow row;
    row.status = "NonConvergence";
    row.error = "power flow under zip: stalled, \"residual\" 3";
    quoted.rows.push_back(row);
    const auto text = emit_report(quoted, ReportFormat::Csv);
    CHECK(text.find("\"power flow under zip: stalled, \"\"residual\"\" 3\"") != std::string::npos);
}

TEST_CASE("emit_report: pf, opf, fit and classification outputs") {
    const auto c = three_bus(PQParams{0.5, 0.1}, YParams{0.4, -0.1});
    const auto pf = solve_pf(c);
    auto text = emit_report(c, pf, ReportFormat::Csv);
    CHECK(text.rfind("element,id,v_r,v_i,vm,p,q\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
    CHECK(nlohmann::json::parse(emit_report(c, pf, ReportFormat::Json))["buses"].size() == 3);

    const auto opf = solve_opf(c);
    text = emit_report(c, opf, ReportFormat::Csv);
    CHECK(text.rfind("element,id,v_r,v_i,vm,v_act,p,q,p_act,q_act\n", 0) == 0);
    CHECK(nlohmann::json::parse(emit_report(c, opf, ReportFormat::Json))["objective"].get<double>() ==
          opf.objective);

    MeasurementSeries series;
    series.bus = 2;
    for (int k = 0; k < 12; ++k) {
        const OperatingVoltage v{1.0 + 0.01 * (k % 5), 0.01 * (k % 3)};
        const auto e = eval(BIGParams{0.5, 0.1, k < 6 ? 0.2 : 0.4, -0.1}, v);
        series.samples.push_back({static_cast<double>(k), v.v_r, v.v_i, e.i_r, e.i_i});
    }
    const auto fit = segment_fit(series.samples, 2, LoadKind::BIG);
    text = emit_report(series, LoadKind::BIG, fit, ReportFormat::Csv);
    CHECK(text.rfind("segment,begin,end,t_begin,t_end,rms,sse,alpha_r,alpha_i,g,b\n", 0) == 0);
    const auto doc = nlohmann::json::parse(emit_report(series, LoadKind::BIG, fit, ReportFormat::Json));
    CHECK(doc["boundaries"][0].get<int>() == 6);

    std::vector<LoadClassification> loads{{2, LoadKind::ZIP, classify(kZipL2)}};
    text = emit_report(loads, ReportFormat::Csv);
    CHECK(text.find("impedance-type") != std::string::npos);

    CHECK(parse_report_format("csv") == ReportFormat::Csv);
    error_message([] { parse_report_format("xml"); }, ErrorCode::ParseError);
}
