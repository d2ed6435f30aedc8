#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "race/vehicle.hpp"

namespace race::metrics {

enum class InfractionKind { off_track, collision, no_progress };

std::string to_string(InfractionKind kind);
InfractionKind parse_infraction_kind(const std::string& name);

struct Infraction {
  InfractionKind kind = InfractionKind::off_track;
  double s = 0.0;
  double t = 0.0;
  int segment = 0;
  bool operator==(const Infraction&) const = default;
};

struct SpeedSample {
  double t = 0.0;
  double v = 0.0;
  bool operator==(const SpeedSample&) const = default;
};

struct EpisodeResult {
  int completed_segments = 0;
  int total_segments = 0;
  std::vector<Infraction> infractions;
  double total_distance = 0.0;  // m
  double total_time = 0.0;      // s
  std::vector<SpeedSample> speed_trace;
  bool operator==(const EpisodeResult&) const = default;
};

struct MetricsReport {
  double sr = 0.0;
  double aats_kph = 0.0;
  double nsi = 0.0;
  double ed_s = 0.0;
  int runs = 1;
  bool operator==(const MetricsReport&) const = default;
};

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double success_rate(const EpisodeResult& r);
double aats(const EpisodeResult& r);
int nsi(const EpisodeResult& r);
double episode_duration(const EpisodeResult& r);

/// Time-weighted trapezoidal mean of the speed trace, in km/h.
double trapezoid_mean_speed_kph(std::span<const SpeedSample> trace);

MetricsReport report(const EpisodeResult& r);
/// Arithmetic mean of SR, AATS, NSI and ED over runs of one segmentation.
MetricsReport aggregate(std::span<const EpisodeResult> results);

/// Per-step events handed to the tracker alongside the state.
struct StepEvents {
  int segments_completed = 0;
  std::vector<Infraction> infractions;
  bool respawned = false;
  std::vector<vehicle::SpeedKnot> knots;  // interior speed corners of this step
};

/// Accumulates one episode. Not thread-safe.
class Tracker {
 public:
  void begin(int total_segments, double t0 = 0.0, double v0 = 0.0);
  void record_step(const vehicle::VehicleState& state, double ds, double dt,
                   const StepEvents& events = {});
  void close();

  bool open() const { return open_; }
  const EpisodeResult& result() const { return result_; }

 private:
  EpisodeResult result_;
  double last_t_ = 0.0;
  bool open_ = false;
};

void to_json(nlohmann::json& j, const Infraction& v);
void from_json(const nlohmann::json& j, Infraction& v);
void to_json(nlohmann::json& j, const SpeedSample& v);
void from_json(const nlohmann::json& j, SpeedSample& v);
void to_json(nlohmann::json& j, const EpisodeResult& v);
void from_json(const nlohmann::json& j, EpisodeResult& v);
/// Keys "sr", "aats_kph", "nsi", "ed_s", "runs".
void to_json(nlohmann::json& j, const MetricsReport& v);
void from_json(const nlohmann::json& j, MetricsReport& v);

}  // namespace race::metrics
