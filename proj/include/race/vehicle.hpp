#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "race/geometry.hpp"

namespace race::vehicle {

struct VehicleParams {
  double wheelbase = 3.0;
  double footprint_length = 4.8;
  double footprint_width = 2.0;
  double max_steer = 0.35;
  double max_accel = 4.0;
  double max_brake = 8.0;
  double max_speed = 75.0;
  double steer_rate_limit = 1.0;

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
};

struct VehicleState {
  Vec2 position;
  double heading = 0.0;
  double speed = 0.0;
  double steer = 0.0;
  double time = 0.0;
  /// Path length driven so far (m); not part of the bicycle state proper.
  double odometer = 0.0;
};

/// Normalized two-channel control, both in [-1, 1].
struct Action {
  double steering = 0.0;
  double acceleration = 0.0;
  bool operator==(const Action&) const = default;
};

struct ControlTarget {
  double steer = 0.0;  // rad
  double accel = 0.0;  // m/s^2
};

/// Speed at an instant inside a step where v(t) has a corner (saturation).
struct SpeedKnot {
  double t = 0.0;
  double v = 0.0;
};

class DynamicsFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ControlTarget map_action(Action a, const VehicleParams& p);

/// Advances the kinematic bicycle by dt. Steering slews toward its target
/// and speed saturates in [0, max_speed]; the step is split where either
/// input has a corner so each piece is integrated smoothly with RK4.
/// Interior speed corners are appended to `knots` when given.
VehicleState step_dynamics(const VehicleState& x, Action a, double dt, const VehicleParams& p,
                           std::vector<SpeedKnot>* knots = nullptr);

/// Footprint corners: front-left, front-right, rear-right, rear-left.
std::array<Vec2, 4> wheel_positions(const VehicleState& x, const VehicleParams& p);

double lateral_acceleration(const VehicleState& x, const VehicleParams& p);

/// True when the footprint rectangle meets the closed disc.
bool footprint_intersects_disc(const VehicleState& x, const VehicleParams& p, Vec2 center,
                               double radius);

}  // namespace race::vehicle
