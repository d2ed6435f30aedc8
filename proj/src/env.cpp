#include "race/env.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace race::env {

std::string to_string(ObservationMode mode) {
  return mode == ObservationMode::privileged ? "privileged" : "camera_only";
}

track::Track resolve_track(const std::string& id) {
  if (id.empty()) throw ConfigError("track", "no track given");
  for (const char* name :
       {"circle", "stadium", "thruxton_standin", "anglesey_standin", "vegas_standin"}) {
    if (id == name) {
      track::GeneratorSpec spec;
      spec.kind = track::parse_generator_kind(id);
      return track::generate_track(spec, 7);
    }
  }
  return track::load_track(id);
}

namespace {

track::Track configured_track(const EnvConfig& c) {
  track::Track t = c.track ? *c.track : resolve_track(c.track_id);
  if (c.n_segments) {
    if (*c.n_segments < 1) throw ConfigError("n_segments", "must be at least 1");
    if (*c.n_segments != t.n_segments()) t = t.with_segments(*c.n_segments);
  }
  return t;
}

}  // namespace

Env::Env(EnvConfig config) : config_(std::move(config)), track_(configured_track(config_)) {
  if (!(config_.dt > 0.0 && config_.dt <= 0.1)) throw ConfigError("dt", "must lie in (0, 0.1]");
  if (config_.mode == ObservationMode::camera_only && config_.cameras.empty()) {
    throw ConfigError("cameras", "camera_only mode needs at least one camera");
  }
  std::set<std::string> seen;
  for (const auto& name : config_.cameras) {
    if (!camera::is_view_name(name)) throw ConfigError("cameras", "unknown view '" + name + "'");
    if (!seen.insert(name).second) throw ConfigError("cameras", "duplicate view '" + name + "'");
    auto it = config_.calibrations.find(name);
    camera::CameraCalibration calib =
        it != config_.calibrations.end() ? it->second : camera::default_calibration(name);
    try {
      calib.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("calibrations", e.what());
    }
    calibs_.emplace(name, calib);
  }
  if (!(config_.watchdog.window > 0.0)) throw ConfigError("watchdog.window", "must be positive");
  if (!(config_.watchdog.min_progress >= 0.0)) {
    throw ConfigError("watchdog.min_progress", "must be non-negative");
  }
  if (!(config_.max_episode_time > 0.0)) throw ConfigError("max_episode_time", "must be positive");
  try {
    config_.vehicle.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("vehicle", e.what());
  }
  const double half_car = 0.5 * config_.vehicle.footprint_width;
  for (std::size_t i = 0; i < track_.half_width_left().size(); ++i) {
    if (track_.half_width_left()[i] <= half_car || track_.half_width_right()[i] <= half_car) {
      throw ConfigError("vehicle.footprint_width", "track narrower than the vehicle");
    }
  }
  truth_calib_ = camera::ground_truth_calibration();
  window_steps_ = std::max<long>(1, std::lround(config_.watchdog.window / config_.dt));
}

Env make(EnvConfig config) { return Env(std::move(config)); }

void Env::spawn_at_segment(int k) {
  const double s = track_.segment_starts()[k];
  const auto cs = track_.sample(s);
  VehicleState next;
  next.position = cs.point;
  next.heading = cs.heading;
  next.time = static_cast<double>(steps_) * config_.dt;
  next.odometer = state_.odometer;
  state_ = next;
  last_s_ = s;
  progress_ = s;
  window_progress_.assign(1, progress_);
}

Observation Env::reset() {
  steps_ = 0;
  segment_ = 0;
  done_ = false;
  reset_called_ = true;
  state_ = VehicleState{};
  spawn_at_segment(0);
  tracker_.begin(track_.n_segments(), 0.0, 0.0);
  log_.clear();
  return observe();
}

void Env::set_state(const VehicleState& state) {
  state_ = state;
  if (const auto frame = track_.project(state_.position)) {
    progress_ += track_.delta_s(last_s_, frame->s);
    last_s_ = frame->s;
  }
}

std::optional<InfractionKind> Env::off_track_or_collision() const {
  const auto wheels = vehicle::wheel_positions(state_, config_.vehicle);
  int off = 0;
  for (const auto& w : wheels) off += track_.is_drivable(w) ? 0 : 1;
  if (off >= 2) return InfractionKind::off_track;
  for (const auto& ob : track_.obstacles()) {
    if (vehicle::footprint_intersects_disc(state_, config_.vehicle, ob.center, ob.radius)) {
      return InfractionKind::collision;
    }
  }
  return std::nullopt;
}

bool Env::watchdog_fired() const {
  if (static_cast<long>(window_progress_.size()) <= window_steps_) return false;
  return progress_ - window_progress_.front() < config_.watchdog.min_progress;
}

std::optional<Infraction> Env::detect_infraction() const {
  std::optional<InfractionKind> kind = off_track_or_collision();
  if (!kind && watchdog_fired()) kind = InfractionKind::no_progress;
  if (!kind) return std::nullopt;
  return Infraction{*kind, last_s_, state_.time, std::min(segment_, track_.n_segments() - 1)};
}

StepOutcome Env::step(Action action) {
  if (!reset_called_) throw ContractViolation("step before reset");
  if (done_) throw ContractViolation("step after episode end");

  metrics::StepEvents events;
  const VehicleState before = state_;
  state_ = vehicle::step_dynamics(before, action, config_.dt, config_.vehicle, &events.knots);
  ++steps_;
  state_.time = static_cast<double>(steps_) * config_.dt;
  const double travelled = state_.odometer - before.odometer;

  double advance = 0.0;
  if (const auto frame = track_.project(state_.position)) {
    advance = track_.delta_s(last_s_, frame->s);
    last_s_ = frame->s;
    progress_ += advance;
  }
  window_progress_.push_back(progress_);
  while (static_cast<long>(window_progress_.size()) > window_steps_ + 1) {
    window_progress_.pop_front();
  }

  const int n = track_.n_segments();
  const int attempted = segment_;
  const VehicleState recorded = state_;
  StepOutcome out;
  if (auto inf = detect_infraction()) {
    out.info.infraction = *inf;
    events.infractions.push_back(*inf);
    out.reward = -10.0;
    ++segment_;
    if (segment_ < n) {
      spawn_at_segment(segment_);
      events.respawned = true;
    }
  } else {
    out.reward = advance;
    while (segment_ < n && progress_ >= track_.segment_end(segment_) - 1e-9) {
      ++segment_;
      ++events.segments_completed;
      out.info.segment_completed = true;
    }
  }
  if (segment_ >= n) {
    done_ = true;
    out.info.lap_completed = true;
  } else if (state_.time >= config_.max_episode_time - 1e-9) {
    // unresolved segments count as stuck, keeping completed + NSI = n
    for (int k = segment_; k < n; ++k) {
      const double s = k == segment_ ? last_s_ : track_.segment_starts()[k];
      events.infractions.push_back({InfractionKind::no_progress, s, state_.time, k});
    }
    if (!out.info.infraction) out.info.infraction = events.infractions.front();
    segment_ = n;
    done_ = true;
    out.info.timed_out = true;
  }

  tracker_.record_step(recorded, travelled, config_.dt, events);
  if (done_) tracker_.close();
  if (config_.record_trajectory) {
    std::optional<InfractionKind> kind;
    if (out.info.infraction) kind = out.info.infraction->kind;
    log_.push_back({recorded.time, recorded.position.x, recorded.position.y, recorded.heading,
                    recorded.speed, recorded.steer, action, attempted, kind});
  }

  out.done = done_;
  out.info.segment = std::min(segment_, n - 1);
  out.info.s = last_s_;
  out.observation = observe();
  return out;
}

camera::Raster Env::render_camera(const camera::CameraCalibration& calib) const {
  return camera::render_view(track_, state_.position, state_.heading, calib);
}

Observation Env::observe() const {
  Observation obs;
  obs.speed = state_.speed;
  for (const auto& [name, calib] : calibs_) obs.cameras.emplace(name, render_camera(calib));
  if (config_.mode == ObservationMode::privileged) {
    Privileged p;
    p.position = state_.position;
    p.heading = state_.heading;
    const auto frame = track_.project(state_.position);
    p.frame = frame ? *frame : track_.project_exhaustive(state_.position);
    p.mask = render_camera(truth_calib_);
    obs.privileged = std::move(p);
  }
  return obs;
}

}  // namespace race::env
