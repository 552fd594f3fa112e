#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "loadopf/experiments.hpp"
#include "loadopf/fitting.hpp"
#include "loadopf/network.hpp"

namespace loadopf {

// Parsers throw Error(ParseError) naming the offending line, key or column.
// Structural checks are delegated to validate_case / validate_series /
// validate_segmented.

/// Case JSON: "buses", "branches", "generators", "loads". Omitted or null
/// limits are unbounded; "cost" is [c2, c1, c0] or {"c2", "c1", "c0"}.
GridCase parse_case(std::string_view json);
GridCase load_case(const std::filesystem::path& path);
std::string format_case(const GridCase& grid);

/// CSV with header exactly t,v_r,v_i,i_r,i_i.
MeasurementSeries parse_measurements(std::string_view csv, int bus);
/// Without `bus`, the id is the first run of digits in the file name.
MeasurementSeries load_measurements(const std::filesystem::path& path, std::optional<int> bus = {});
std::string format_measurements(const MeasurementSeries& series);

/// {"base": case, "families": {"pq": [segment, ...], ...}} where a segment
/// maps bus id to {"model", "params"}.
SegmentedCase parse_segmented(std::string_view json);
SegmentedCase load_segmented(const std::filesystem::path& path);
std::string format_segmented(const SegmentedCase& seg);

std::string read_file(const std::filesystem::path& path);

}  // namespace loadopf
