#include "race/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace race::vehicle {

void VehicleParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(name) + " must be positive");
    }
  };
  positive(wheelbase, "wheelbase");
  positive(footprint_length, "footprint_length");
  positive(footprint_width, "footprint_width");
  positive(max_steer, "max_steer");
  positive(max_accel, "max_accel");
  positive(max_brake, "max_brake");
  positive(max_speed, "max_speed");
  positive(steer_rate_limit, "steer_rate_limit");
  if (max_steer >= std::numbers::pi / 2) {
    throw std::invalid_argument("max_steer must be below pi/2");
  }
}

ControlTarget map_action(Action a, const VehicleParams& p) {
  const double steering = std::clamp(a.steering, -1.0, 1.0);
  const double accel = std::clamp(a.acceleration, -1.0, 1.0);
  return {steering * p.max_steer, accel >= 0.0 ? accel * p.max_accel : accel * p.max_brake};
}

namespace {

bool finite_state(const VehicleState& x) {
  return std::isfinite(x.position.x) && std::isfinite(x.position.y) &&
         std::isfinite(x.heading) && std::isfinite(x.speed) && std::isfinite(x.steer) &&
         std::isfinite(x.time) && std::isfinite(x.odometer);
}

// Closed-form inputs over one step: steer ramps then holds, speed ramps then
// saturates.
struct Inputs {
  double steer0, steer_target, steer_rate, steer_done;
  double v0, accel, v_done_time, v_final;

  double steer(double tau) const {
    if (tau >= steer_done) return steer_target;
    return steer0 + steer_rate * tau;
  }
  double speed(double tau) const {
    if (tau >= v_done_time) return v_final;
    return v0 + accel * tau;
  }
};

}  // namespace

VehicleState step_dynamics(const VehicleState& x, Action a, double dt, const VehicleParams& p,
                           std::vector<SpeedKnot>* knots) {
  if (!(dt > 0.0 && dt <= 0.1)) throw std::invalid_argument("dt must lie in (0, 0.1]");
  if (!finite_state(x) || !std::isfinite(a.steering) || !std::isfinite(a.acceleration)) {
    throw DynamicsFault("non-finite vehicle state or action");
  }
  const ControlTarget target = map_action(a, p);

  Inputs in{};
  in.steer0 = std::clamp(x.steer, -p.max_steer, p.max_steer);
  in.steer_target = target.steer;
  const double gap = in.steer_target - in.steer0;
  in.steer_rate = gap >= 0.0 ? p.steer_rate_limit : -p.steer_rate_limit;
  in.steer_done = std::abs(gap) / p.steer_rate_limit;

  in.v0 = std::clamp(x.speed, 0.0, p.max_speed);
  in.accel = target.accel;
  if (in.accel > 0.0) {
    in.v_done_time = (p.max_speed - in.v0) / in.accel;
    in.v_final = p.max_speed;
  } else if (in.accel < 0.0) {
    in.v_done_time = in.v0 / -in.accel;
    in.v_final = 0.0;
  } else {
    in.v_done_time = 0.0;
    in.v_final = in.v0;
  }

  double breaks[4] = {0.0, dt, dt, dt};
  int n_breaks = 2;
  for (double tb : {in.steer_done, in.v_done_time}) {
    if (tb > 0.0 && tb < dt) breaks[n_breaks++] = tb;
  }
  std::sort(breaks, breaks + n_breaks);

  const double inv_l = 1.0 / p.wheelbase;
  double px = x.position.x;
  double py = x.position.y;
  double psi = x.heading;
  double odo = x.odometer;
  auto deriv = [&](double tau, double heading, double out[3]) {
    const double v = in.speed(tau);
    out[0] = v * std::cos(heading);
    out[1] = v * std::sin(heading);
    out[2] = v * std::tan(in.steer(tau)) * inv_l;
  };
  for (int i = 0; i + 1 < n_breaks; ++i) {
    const double ta = breaks[i];
    const double tb = breaks[i + 1];
    const double h = tb - ta;
    if (h <= 0.0) continue;
    double k1[3], k2[3], k3[3], k4[3];
    deriv(ta, psi, k1);
    deriv(ta + 0.5 * h, psi + 0.5 * h * k1[2], k2);
    deriv(ta + 0.5 * h, psi + 0.5 * h * k2[2], k3);
    deriv(tb, psi + h * k3[2], k4);
    px += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
    py += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    psi += h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]);
    // speed is linear on each piece, so this is exact
    odo += 0.5 * h * (in.speed(ta) + in.speed(tb));
    if (knots && tb < dt && tb == in.v_done_time) knots->push_back({x.time + tb, in.speed(tb)});
  }

  VehicleState out;
  out.position = {px, py};
  out.heading = psi;
  out.speed = in.speed(dt);
  out.steer = in.steer(dt);
  out.time = x.time + dt;
  out.odometer = odo;
  if (!finite_state(out)) throw DynamicsFault("integration produced a non-finite state");
  return out;
}

std::array<Vec2, 4> wheel_positions(const VehicleState& x, const VehicleParams& p) {
  const double hl = 0.5 * p.footprint_length;
  const double hw = 0.5 * p.footprint_width;
  const Vec2 local[4] = {{hl, hw}, {hl, -hw}, {-hl, -hw}, {-hl, hw}};
  std::array<Vec2, 4> out;
  const double c = std::cos(x.heading);
  const double s = std::sin(x.heading);
  for (int i = 0; i < 4; ++i) {
    out[i] = x.position + Vec2{c * local[i].x - s * local[i].y, s * local[i].x + c * local[i].y};
  }
  return out;
}

double lateral_acceleration(const VehicleState& x, const VehicleParams& p) {
  return x.speed * x.speed * std::tan(x.steer) / p.wheelbase;
}

bool footprint_intersects_disc(const VehicleState& x, const VehicleParams& p, Vec2 center,
                               double radius) {
  const Vec2 local = rotate(center - x.position, -x.heading);
  const double hl = 0.5 * p.footprint_length;
  const double hw = 0.5 * p.footprint_width;
  const Vec2 nearest{std::clamp(local.x, -hl, hl), std::clamp(local.y, -hw, hw)};
  const Vec2 diff = local - nearest;
  return dot(diff, diff) <= radius * radius;
}

}  // namespace race::vehicle
