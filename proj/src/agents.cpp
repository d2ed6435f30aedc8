#include "race/agents.hpp"

#include <stdexcept>

namespace race::agents {

namespace {

std::map<std::string, camera::CameraCalibration> calibrations_for(
    const std::vector<std::string>& views) {
  std::map<std::string, camera::CameraCalibration> out;
  for (const auto& v : views) out.emplace(v, camera::default_calibration(v));
  return out;
}

}  // namespace

double RandomAgent::uniform() {
  // top 53 bits; identical on every standard library
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

Action RandomAgent::act(const env::Observation&) {
  const double steering = uniform();
  const double acceleration = uniform();
  return {steering, acceleration};
}

PurePursuitAgent::PurePursuitAgent(planner::PurePursuitParams params,
                                   std::vector<std::string> cameras)
    : params_(params), cameras_(std::move(cameras)), calibs_(calibrations_for(cameras_)) {}

Action PurePursuitAgent::act(const env::Observation& obs) {
  perception::PerceptionConfig pc;
  pc.horizon = std::max(params_.lookahead, 2.0);
  vehicle::VehicleState state;
  state.speed = obs.speed;
  try {
    last_ = planner::pure_pursuit(state, perception::perceive(obs.cameras, calibs_, pc), params_);
  } catch (const perception::PerceptionError&) {
    last_.acceleration = std::clamp(params_.speed_gain * (params_.target_speed - obs.speed) - 0.2,
                                    -1.0, 1.0);
  }
  return last_;
}

MpcAgent::MpcAgent(planner::MpcParams params, std::vector<std::string> cameras)
    : params_(std::move(params)), cameras_(std::move(cameras)), calibs_(calibrations_for(cameras_)) {
  params_.validate();
}

Action MpcAgent::act(const env::Observation& obs) {
  perception::PerceptionConfig pc;
  pc.step = params_.ds;
  pc.horizon = params_.ds * params_.horizon_steps;
  vehicle::VehicleState state;
  state.speed = obs.speed;
  try {
    last_plan_ = planner::mpc_plan(state, perception::perceive(obs.cameras, calibs_, pc), params_);
    last_ = last_plan_->action;
  } catch (const perception::PerceptionError&) {
    // keep the wheel where it was and shed speed until the road is seen again
    ++failures_;
    last_plan_.reset();
    last_.acceleration = obs.speed > params_.v_corner_min * 0.5 ? -0.5 : 0.2;
  }
  return last_;
}

std::vector<std::string> builtin_agent_names() {
  return {"random", "straight", "idle", "pure_pursuit", "mpc"};
}

std::unique_ptr<Agent> make_builtin_agent(const std::string& name, std::uint64_t seed) {
  if (name == "random") return std::make_unique<RandomAgent>(seed);
  if (name == "straight") return std::make_unique<StraightAgent>();
  if (name == "idle") return std::make_unique<IdleAgent>();
  if (name == "pure_pursuit") return std::make_unique<PurePursuitAgent>();
  if (name == "mpc") return std::make_unique<MpcAgent>();
  throw std::invalid_argument("unknown builtin agent '" + name + "'");
}

}  // namespace race::agents
