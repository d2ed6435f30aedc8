#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "race/planner.hpp"

namespace race::planner {

double pursuit_steer(Vec2 goal, double wheelbase) {
  const double dist = norm(goal);
  if (!(dist > 0.0)) return 0.0;
  const double alpha = std::atan2(goal.y, goal.x);
  return std::atan(2.0 * wheelbase * std::sin(alpha) / dist);
}

Action pure_pursuit(const VehicleState& state, const TrackLimits& limits,
                    const PurePursuitParams& params, const VehicleParams& vehicle) {
  if (limits.samples.empty()) throw std::invalid_argument("pure_pursuit needs track limits");
  if (!(params.lookahead > 0.0)) throw std::invalid_argument("lookahead must be positive");
  const auto& s = limits.samples;
  // lookahead beyond the limits shrinks to the horizon
  const double x = std::min(params.lookahead, s.back().x);
  auto it = std::lower_bound(s.begin(), s.end(), x,
                             [](const perception::LimitSample& a, double v) { return a.x < v; });
  double mid;
  if (it == s.begin()) {
    mid = 0.5 * (it->y_left + it->y_right);
  } else {
    const auto& a = *(it - 1);
    const auto& b = *it;
    const double f = (x - a.x) / (b.x - a.x);
    mid = 0.5 * ((a.y_left + f * (b.y_left - a.y_left)) + (a.y_right + f * (b.y_right - a.y_right)));
  }
  const double delta = pursuit_steer({x, mid}, vehicle.wheelbase);
  Action a;
  a.steering = std::clamp(delta / vehicle.max_steer, -1.0, 1.0);
  a.acceleration = std::clamp(params.speed_gain * (params.target_speed - state.speed), -1.0, 1.0);
  return a;
}

}  // namespace race::planner
