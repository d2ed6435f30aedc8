#pragma once

#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "race/perception.hpp"
#include "race/vehicle.hpp"

namespace race::planner {

using perception::TrackLimits;
using vehicle::Action;
using vehicle::VehicleParams;
using vehicle::VehicleState;

enum class Zone { straight, sweeper, hairpin };

std::string to_string(Zone zone);

struct ZonePreset {
  double a_lat_max = 2.0;
  double margin = 0.8;
};

struct MpcParams {
  int horizon_steps = 30;  // N
  double ds = 1.0;         // m
  double a_lat_max = 2.0;  // m/s^2
  double v_corner_min = 10.0;
  double a_accel_max = 4.0;
  double a_brake_max = 8.0;
  double max_speed = 75.0;
  double margin = 0.8;  // m, kept clear of each boundary
  double kappa_floor = 1e-4;

  // path lattice
  double station_spacing = 5.0;
  int lattice_size = 21;  // odd, offsets across the corridor per station
  double offset_weight = 2e-5;

  // zones
  double straight_below = 0.004;
  double hairpin_above = 0.025;
  std::map<Zone, ZonePreset> zone_presets;

  // first-step control
  double lookahead_min = 6.0;
  double lookahead_time = 0.6;  // s of travel

  /// Throws std::invalid_argument naming the first bad field.
  void validate(double perception_horizon = std::numeric_limits<double>::infinity()) const;
};

/// Presets tuned on thruxton_standin.
MpcParams tuned_mpc_params();

struct PlannedPoint {
  double x = 0.0;  // vehicle frame, m
  double y = 0.0;
  double v = 0.0;
  double delta = 0.0;  // steer that holds the path curvature
};

struct PlannedTrajectory {
  std::vector<PlannedPoint> points;
};

struct MpcResult {
  PlannedTrajectory trajectory;
  Action action;
  bool infeasible = false;
  Zone zone = Zone::straight;
};

/// Curvature-capped speeds with forward acceleration and backward braking
/// passes; kappa is sampled every params.ds.
std::vector<double> speed_profile(std::span<const double> kappa, const MpcParams& params,
                                  double v0);

Zone zone_of_curvature(double max_abs_kappa, const MpcParams& params = {});
Zone zone_classify(const TrackLimits& limits, const MpcParams& params = {});

MpcResult mpc_plan(const VehicleState& state, const TrackLimits& limits, const MpcParams& params,
                   const VehicleParams& vehicle = {});

/// Pure-pursuit steer angle (rad, unclipped) toward a vehicle-frame goal.
double pursuit_steer(Vec2 goal, double wheelbase);

struct PurePursuitParams {
  double lookahead = 8.0;
  double target_speed = 8.0;
  double speed_gain = 0.5;  // acceleration channel per m/s of error
};

Action pure_pursuit(const VehicleState& state, const TrackLimits& limits,
                    const PurePursuitParams& params = {}, const VehicleParams& vehicle = {});

/// "x,y,v,delta" rows with a header.
std::string trajectory_csv(const PlannedTrajectory& trajectory);

}  // namespace race::planner
