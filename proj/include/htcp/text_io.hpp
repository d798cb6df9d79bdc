#pragma once

// Plain-text serialization with reproducibility as the contract: shortest
// round-trip decimal formatting (never locale-dependent), bit-exact CSV
// round trips for grid densities, and FNV-1a content hashes for manifests.

#include "htcp/asymptotics.hpp"
#include "htcp/grid_density.hpp"
#include "htcp/random_walk.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace htcp {

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

// Strict full-string parse; throws GridError on trailing garbage.
double parse_double(std::string_view s);

// Grid density as CSV: "x_left,value" header, one row per cell, and a
// trailing "# origin=... step=... defect=..." comment carrying the exact
// grid parameters. from_csv(to_csv(d)) reproduces d bit for bit.
std::string to_csv(const GridDensity& d);
GridDensity grid_from_csv(const std::string& text);

// Ratio samples as "x,ratio" rows.
std::string ratio_samples_csv(const TailRatioReport& rep);

// Empirical CDF as "x,cdf" rows. Large samples are thinned to at most
// `max_rows` evenly spaced order statistics (first and last always kept).
std::string ecdf_csv(const McSupremumResult& mc, std::size_t max_rows = 4096);

// Verdict report as JSON: limit, deviation, trend, verdict, window,
// tolerance band, sample count, exclusions.
nlohmann::json report_json(const TailRatioReport& rep);
nlohmann::json window_json(const TailWindow& w);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

} // namespace htcp
