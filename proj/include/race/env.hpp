#pragma once

#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "race/camera.hpp"
#include "race/metrics.hpp"
#include "race/track.hpp"
#include "race/vehicle.hpp"

namespace race::env {

using metrics::Infraction;
using metrics::InfractionKind;
using vehicle::Action;
using vehicle::VehicleState;

enum class ObservationMode { privileged, camera_only };

std::string to_string(ObservationMode mode);

struct Watchdog {
  double min_progress = 1.0;  // m
  double window = 10.0;       // s
};

struct EnvConfig {
  /// Used when set; otherwise `track_id` names a generator kind or a track file.
  std::optional<track::Track> track;
  std::string track_id;
  double dt = 0.05;
  std::optional<int> n_segments;
  ObservationMode mode = ObservationMode::privileged;
  std::vector<std::string> cameras = {"front", "left", "right"};
  /// Overrides the default calibration of a view.
  std::map<std::string, camera::CameraCalibration> calibrations;
  Watchdog watchdog;
  double max_episode_time = 1200.0;
  vehicle::VehicleParams vehicle;
  /// Keep a per-step trajectory log.
  bool record_trajectory = false;
};

/// Raised for invalid configuration; `field()` names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Raised when the step/reset contract is broken (step after done, etc).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Privileged {
  Vec2 position;
  double heading = 0.0;
  track::TrackFrame frame;
  camera::Raster mask;  // ground-truth drivability centred on the vehicle
  bool operator==(const Privileged&) const = default;
};

struct Observation {
  double speed = 0.0;
  std::map<std::string, camera::Raster> cameras;
  std::optional<Privileged> privileged;
  bool operator==(const Observation&) const = default;
};

struct StepInfo {
  int segment = 0;  // segment being attempted after this step
  bool segment_completed = false;
  std::optional<Infraction> infraction;
  double s = 0.0;
  bool lap_completed = false;  // every segment resolved, by completion or infraction
  bool timed_out = false;
};

struct StepOutcome {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct TrajectoryRecord {
  double t, x, y, psi, v, delta;
  Action action;
  int segment;
  std::optional<InfractionKind> infraction;
};

/// CSV with header t,x,y,psi,v,delta,steering,acceleration,segment,infraction.
void write_trajectory_csv(const std::vector<TrajectoryRecord>& log, const std::filesystem::path& path);
std::vector<TrajectoryRecord> read_trajectory_csv(const std::filesystem::path& path);

class Env {
 public:
  explicit Env(EnvConfig config);

  Observation reset();
  StepOutcome step(Action action);

  /// Infraction the current state would trigger, by priority
  /// off_track > collision > no_progress.
  std::optional<Infraction> detect_infraction() const;

  camera::Raster render_camera(const camera::CameraCalibration& calib) const;
  Observation observe() const;

  const track::Track& track() const { return track_; }
  const EnvConfig& config() const { return config_; }
  const VehicleState& state() const { return state_; }
  /// Replaces the vehicle state (tests and teleports); progress and the
  /// watchdog follow the new position.
  void set_state(const VehicleState& state);

  int segment() const { return segment_; }
  double lap_progress() const { return progress_; }
  bool done() const { return done_; }
  long step_count() const { return steps_; }
  const metrics::EpisodeResult& result() const { return tracker_.result(); }
  const std::vector<TrajectoryRecord>& trajectory() const { return log_; }
  const std::map<std::string, camera::CameraCalibration>& calibrations() const { return calibs_; }

 private:
  void spawn_at_segment(int k);
  std::optional<InfractionKind> off_track_or_collision() const;
  bool watchdog_fired() const;

  EnvConfig config_;
  track::Track track_;
  std::map<std::string, camera::CameraCalibration> calibs_;
  camera::CameraCalibration truth_calib_;
  VehicleState state_;
  double last_s_ = 0.0;
  double progress_ = 0.0;  // lap progress (m), unwrapped from segment 0 start
  int segment_ = 0;
  long steps_ = 0;
  long window_steps_ = 0;
  std::deque<double> window_progress_;
  bool reset_called_ = false;
  bool done_ = false;
  metrics::Tracker tracker_;
  std::vector<TrajectoryRecord> log_;
};

/// Resolves a track id: a generator kind name or a track file path.
track::Track resolve_track(const std::string& id);

Env make(EnvConfig config);

}  // namespace race::env
