#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "race/env.hpp"

namespace race::plot {

/// Two panels: the driven line over the track ribbon (colored by speed,
/// infractions marked) and speed against time.
std::string lap_svg(const track::Track& track, const std::vector<env::TrajectoryRecord>& log);

/// Same without the ribbon, for logs whose track is unknown.
std::string lap_svg(const std::vector<env::TrajectoryRecord>& log);

void write_svg(const std::string& svg, const std::filesystem::path& path);

}  // namespace race::plot
