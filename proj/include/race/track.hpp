#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "race/geometry.hpp"

namespace race::track {

/// Raised for malformed track files or definitions that break a Track
/// invariant. `field()` names the offending field.
class TrackError : public std::runtime_error {
 public:
  TrackError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct Obstacle {
  Vec2 center;
  double radius = 0.0;
  bool operator==(const Obstacle&) const = default;
};

/// One centerline control point with the lateral half-widths at that point.
struct ControlPoint {
  Vec2 point;
  double half_width_left = 0.0;
  double half_width_right = 0.0;
  bool operator==(const ControlPoint&) const = default;
};

/// The serialized form of a track: what the track file stores.
struct TrackDefinition {
  std::string id;
  bool closed = true;
  int n_segments = 10;
  std::vector<ControlPoint> points;
  std::vector<Obstacle> obstacles;
  bool operator==(const TrackDefinition&) const = default;
};

struct TrackOptions {
  /// Arc-length spacing of the resampled centerline.
  double resolution = 0.5;
  /// Smallest admissible half-width; half of the default vehicle footprint.
  double min_half_width = 1.0;
  /// Points farther than this from the centerline project to nothing.
  double projection_margin = 15.0;
};

struct CenterlineSample {
  double s = 0.0;
  Vec2 point;
  double heading = 0.0;
  double curvature = 0.0;  // signed, left-positive
};

/// Frenet coordinates: arc length along and signed offset from the
/// centerline (left-positive).
struct TrackFrame {
  double s = 0.0;
  double d = 0.0;
  bool operator==(const TrackFrame&) const = default;
};

namespace detail {
struct TrackData;
}

/// Arc-length parameterized racetrack ribbon. Immutable; copies share the
/// underlying geometry and are safe to read from several threads.
class Track {
 public:
  /// Builds the smoothed, resampled track; throws TrackError when the
  /// definition violates an invariant.
  static Track build(TrackDefinition definition, TrackOptions options = {});

  const std::string& id() const;
  bool closed() const;
  int n_segments() const;
  double total_length() const;
  std::span<const Vec2> centerline() const;
  std::span<const double> cum_s() const;
  std::span<const double> half_width_left() const;
  std::span<const double> half_width_right() const;
  std::span<const double> segment_starts() const;
  std::span<const Obstacle> obstacles() const;
  const TrackDefinition& definition() const;
  const TrackOptions& options() const;

  /// Same geometry partitioned into `n` equal-length segments.
  Track with_segments(int n) const;

  /// Wraps `s` into [0, total_length) on closed tracks; identity otherwise.
  double wrap(double s) const;

  /// Signed shortest arc-length difference b - a (lap-wrapped when closed).
  double delta_s(double a, double b) const;

  CenterlineSample sample(double s) const;
  std::optional<TrackFrame> project(Vec2 point) const;
  bool is_drivable(Vec2 point) const;
  int segment_index(double s) const;
  double segment_end(int index) const;

  double half_width_left_at(double s) const;
  double half_width_right_at(double s) const;

  /// Brute-force nearest station search; slow, intended for checks.
  TrackFrame project_exhaustive(Vec2 point) const;

  bool operator==(const Track& other) const;

 private:
  explicit Track(std::shared_ptr<const detail::TrackData> data);
  std::shared_ptr<const detail::TrackData> data_;
};

// File format: {"id", "closed", "n_segments", "points": [[x, y, wl, wr], ...],
// "obstacles": [[cx, cy, r], ...]}.
TrackDefinition parse_track_definition(const std::string& text);
std::string serialize_track_definition(const TrackDefinition& definition);

Track load_track(const std::filesystem::path& path, TrackOptions options = {});
void save_track(const Track& track, const std::filesystem::path& path);

/// Procedural generator families.
enum class GeneratorKind {
  circle,
  stadium,
  thruxton_standin,
  anglesey_standin,
  vegas_standin
};

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::circle;
  /// circle radius / stadium turn radius (m)
  double radius = 200.0;
  /// stadium straight length (m)
  double straight_length = 300.0;
  /// full road width for circle and stadium (m); stand-ins pick their own
  double width = 12.0;
  int n_segments = 10;
};

GeneratorKind parse_generator_kind(const std::string& name);
std::string to_string(GeneratorKind kind);

/// Deterministic for a fixed (spec, seed).
Track generate_track(const GeneratorSpec& spec, std::uint64_t seed);

/// Convenience: the named stand-in with default parameters.
Track standin_track(const std::string& name, std::uint64_t seed = 7);

}  // namespace race::track
