#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "race/planner.hpp"

namespace race::planner {

std::string to_string(Zone zone) {
  switch (zone) {
    case Zone::straight: return "straight";
    case Zone::sweeper: return "sweeper";
    case Zone::hairpin: return "hairpin";
  }
  return "unknown";
}

void MpcParams::validate(double perception_horizon) const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  if (horizon_steps < 2) throw std::invalid_argument("horizon_steps must be at least 2");
  positive(ds, "ds");
  positive(a_lat_max, "a_lat_max");
  positive(v_corner_min, "v_corner_min");
  positive(a_accel_max, "a_accel_max");
  positive(a_brake_max, "a_brake_max");
  positive(max_speed, "max_speed");
  positive(margin, "margin");
  positive(kappa_floor, "kappa_floor");
  positive(station_spacing, "station_spacing");
  positive(lookahead_min, "lookahead_min");
  if (offset_weight < 0.0) throw std::invalid_argument("offset_weight must be non-negative");
  if (lattice_size < 3 || lattice_size % 2 == 0) {
    throw std::invalid_argument("lattice_size must be odd and at least 3");
  }
  if (!(straight_below > 0.0 && straight_below < hairpin_above)) {
    throw std::invalid_argument("zone thresholds must satisfy 0 < straight_below < hairpin_above");
  }
  if (ds * horizon_steps > perception_horizon + 1e-9) {
    throw std::invalid_argument("horizon_steps * ds exceeds the perception horizon");
  }
  for (const auto& [zone, preset] : zone_presets) {
    if (!(preset.a_lat_max > 0.0) || !(preset.margin > 0.0)) {
      throw std::invalid_argument("zone preset for " + to_string(zone) + " must be positive");
    }
  }
}

MpcParams tuned_mpc_params() {
  MpcParams p;
  p.zone_presets = {
      {Zone::straight, {2.0, 0.8}},
      {Zone::sweeper, {2.0, 1.0}},
      {Zone::hairpin, {2.0, 1.3}},
  };
  return p;
}

std::vector<double> speed_profile(std::span<const double> kappa, const MpcParams& params,
                                  double v0) {
  if (kappa.empty()) throw std::invalid_argument("speed_profile needs curvature samples");
  if (!(v0 >= 0.0)) throw std::invalid_argument("v0 must be non-negative");
  const std::size_t n = kappa.size();
  std::vector<double> cap(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double k = std::max(std::abs(kappa[i]), params.kappa_floor);
    cap[i] = std::min(std::sqrt(params.a_lat_max / k), params.max_speed);
  }
  cap[n - 1] = std::min(cap[n - 1], params.v_corner_min);

  std::vector<double> v(n);
  v[0] = std::min(v0, cap[0]);
  const double up = 2.0 * params.a_accel_max * params.ds;
  const double down = 2.0 * params.a_brake_max * params.ds;
  for (std::size_t i = 1; i < n; ++i) v[i] = std::min(cap[i], std::sqrt(v[i - 1] * v[i - 1] + up));
  for (std::size_t i = n - 1; i-- > 0;) v[i] = std::min(v[i], std::sqrt(v[i + 1] * v[i + 1] + down));
  return v;
}

Zone zone_of_curvature(double max_abs_kappa, const MpcParams& params) {
  if (max_abs_kappa < params.straight_below) return Zone::straight;
  if (max_abs_kappa > params.hairpin_above) return Zone::hairpin;
  return Zone::sweeper;
}

Zone zone_classify(const TrackLimits& limits, const MpcParams& params) {
  double worst = 0.0;
  for (const auto& k : perception::centerline_curvature(limits)) {
    worst = std::max(worst, std::abs(k.kappa));
  }
  return zone_of_curvature(worst, params);
}

}  // namespace race::planner
