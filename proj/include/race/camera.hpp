#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "race/geometry.hpp"
#include "race/track.hpp"

namespace race::camera {

/// Binary top-down drivability grid, row-major, 1 = drivable. Row 0 is the
/// nearest row; column 0 is the leftmost.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;

  Raster() = default;
  Raster(int w, int h) : width(w), height(h), cells(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t at(int row, int col) const { return cells[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t& at(int row, int col) { return cells[static_cast<std::size_t>(row) * width + col]; }
  bool operator==(const Raster&) const = default;
};

struct CameraCalibration {
  std::string name;
  int width = 64;
  int height = 64;
  double resolution = 0.5;  // m per cell
  Vec2 mount;               // view origin in the vehicle frame (m)
  double yaw = 0.0;         // view rotation from vehicle heading (rad)

  /// Throws std::invalid_argument on resolution <= 0 or dims < 16.
  void validate() const;

  /// Vehicle-frame centre of cell (row, col).
  Vec2 cell_to_vehicle(double row, double col) const;
};

/// The three camera-surrogate views: "front", "left", "right".
CameraCalibration default_calibration(const std::string& view);
bool is_view_name(const std::string& view);

/// 64x64 ground-truth mask centred on the vehicle (privileged data).
CameraCalibration ground_truth_calibration();

inline Vec2 vehicle_to_world(Vec2 position, double heading, Vec2 local) {
  return position + rotate(local, heading);
}
inline Vec2 world_to_vehicle(Vec2 position, double heading, Vec2 world) {
  return rotate(world - position, -heading);
}

Raster render_view(const track::Track& track, Vec2 position, double heading,
                   const CameraCalibration& calib);

}  // namespace race::camera
