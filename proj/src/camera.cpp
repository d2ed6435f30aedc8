#include "race/camera.hpp"

#include <stdexcept>

namespace race::camera {

void CameraCalibration::validate() const {
  if (!(resolution > 0.0)) throw std::invalid_argument(name + ": resolution must be positive");
  if (width < 16 || height < 16) throw std::invalid_argument(name + ": grid dims must be >= 16");
}

Vec2 CameraCalibration::cell_to_vehicle(double row, double col) const {
  const Vec2 view{(row + 0.5) * resolution, (0.5 * width - col - 0.5) * resolution};
  return mount + rotate(view, yaw);
}

bool is_view_name(const std::string& view) {
  return view == "front" || view == "left" || view == "right";
}

CameraCalibration default_calibration(const std::string& view) {
  CameraCalibration c;
  c.name = view;
  if (view == "front") {
    c.yaw = 0.0;
  } else if (view == "left") {
    c.yaw = 0.9;
  } else if (view == "right") {
    c.yaw = -0.9;
  } else {
    throw std::invalid_argument("unknown camera view: " + view);
  }
  return c;
}

CameraCalibration ground_truth_calibration() {
  CameraCalibration c;
  c.name = "ground_truth";
  c.mount = {-0.5 * c.height * c.resolution, 0.0};
  return c;
}

Raster render_view(const track::Track& track, Vec2 position, double heading,
                   const CameraCalibration& calib) {
  Raster out(calib.width, calib.height);
  // The map from cell indices to world is affine: origin plus row/col steps.
  const Vec2 origin = vehicle_to_world(position, heading, calib.cell_to_vehicle(0, 0));
  const Vec2 row_step = rotate(rotate(Vec2{calib.resolution, 0.0}, calib.yaw), heading);
  const Vec2 col_step = rotate(rotate(Vec2{0.0, -calib.resolution}, calib.yaw), heading);
  for (int r = 0; r < calib.height; ++r) {
    const Vec2 row_origin = origin + row_step * static_cast<double>(r);
    for (int c = 0; c < calib.width; ++c) {
      out.at(r, c) = track.is_drivable(row_origin + col_step * static_cast<double>(c)) ? 1 : 0;
    }
  }
  return out;
}

}  // namespace race::camera
