#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "race/track.hpp"

namespace race::track {

namespace {

constexpr double kPi = std::numbers::pi;

// mt19937_64 bits mapped to [0, 1) without relying on the library's
// distribution implementations, so tracks match across standard libraries.
class PortableUniform {
 public:
  explicit PortableUniform(std::uint64_t seed) : engine_(seed) {}
  double next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double range(double lo, double hi) { return lo + (hi - lo) * next(); }

 private:
  std::mt19937_64 engine_;
};

struct StandinProfile {
  const char* id;
  double length;
  double half_width;
  double width_variation;
  double min_radius;  // tightest corner radius (m)
  int corners_min;
  int corners_max;
  double control_spacing;
  std::uint64_t salt;
};

constexpr StandinProfile kThruxton{"thruxton_standin", 3800.0, 6.0, 0.5, 60.0, 9, 12, 8.0, 0x7472757801ULL};
constexpr StandinProfile kAnglesey{"anglesey_standin", 2100.0, 5.5, 0.4, 45.0, 7, 10, 8.0, 0x616e676c02ULL};
constexpr StandinProfile kVegas{"vegas_standin", 2400.0, 6.0, 0.5, 40.0, 8, 11, 8.0, 0x7665676103ULL};

double check_width(double width) {
  if (!(width > 2.0 * TrackOptions{}.min_half_width)) {
    throw TrackError("width", "too small for the vehicle footprint");
  }
  return width;
}

TrackDefinition circle_definition(const GeneratorSpec& spec) {
  if (!(spec.radius > 0.0)) throw TrackError("radius", "must be positive");
  const double half = check_width(spec.width) / 2.0;
  if (half >= spec.radius) throw TrackError("width", "wider than the circle radius");
  TrackDefinition def;
  def.id = "circle";
  def.closed = true;
  def.n_segments = spec.n_segments;
  const int n = std::max(64, static_cast<int>(std::ceil(2.0 * kPi * spec.radius / 8.0)));
  for (int i = 0; i < n; ++i) {
    const double theta = -kPi / 2.0 + 2.0 * kPi * i / n;
    def.points.push_back({{spec.radius * std::cos(theta), spec.radius * std::sin(theta)}, half, half});
  }
  return def;
}

TrackDefinition stadium_definition(const GeneratorSpec& spec) {
  if (!(spec.radius > 0.0) || !(spec.straight_length > 0.0)) {
    throw TrackError("radius", "stadium radius and straight length must be positive");
  }
  const double half = check_width(spec.width) / 2.0;
  if (half >= spec.radius) throw TrackError("width", "wider than the turn radius");
  TrackDefinition def;
  def.id = "stadium";
  def.closed = true;
  def.n_segments = spec.n_segments;
  const double spacing = 8.0;
  const double len = spec.straight_length;
  const double r = spec.radius;
  const int n_straight = std::max(2, static_cast<int>(std::ceil(len / spacing)));
  const int n_arc = std::max(8, static_cast<int>(std::ceil(kPi * r / spacing)));
  // Bottom straight heading +x, left-hand (counter-clockwise) turns.
  for (int i = 0; i < n_straight; ++i) {
    def.points.push_back({{-len / 2.0 + len * i / n_straight, -r}, half, half});
  }
  for (int i = 0; i < n_arc; ++i) {
    const double theta = -kPi / 2.0 + kPi * i / n_arc;
    def.points.push_back({{len / 2.0 + r * std::cos(theta), r * std::sin(theta)}, half, half});
  }
  for (int i = 0; i < n_straight; ++i) {
    def.points.push_back({{len / 2.0 - len * i / n_straight, r}, half, half});
  }
  for (int i = 0; i < n_arc; ++i) {
    const double theta = kPi / 2.0 + kPi * i / n_arc;
    def.points.push_back({{-len / 2.0 + r * std::cos(theta), r * std::sin(theta)}, half, half});
  }
  return def;
}

double loop_length(const std::vector<Vec2>& pts) {
  double len = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) len += distance(pts[i], pts[(i + 1) % pts.size()]);
  return len;
}

// Closest approach between parts of the loop that are more than `arc_gap`
// apart along it.
double min_separation(const std::vector<Vec2>& pts, double arc_gap) {
  const std::size_t n = pts.size();
  const double step = loop_length(pts) / static_cast<double>(n);
  const auto gap = static_cast<std::size_t>(std::ceil(arc_gap / step));
  double best = std::numeric_limits<double>::max();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + gap; j + gap < n + i && j < n; ++j) {
      best = std::min(best, distance(pts[i], pts[j]));
    }
  }
  return best;
}

struct Corner {
  Vec2 vertex;
  double radius = 0.0;
  double turn = 0.0;     // signed turn angle, left-positive
  double tangent = 0.0;  // distance from vertex to arc endpoints
};

// Star polygon whose vertices become constant-radius corners joined by
// straights. Returns false when a leg is too short for its two fillets.
bool fillet_corners(std::vector<Corner>& corners, double min_straight) {
  const std::size_t n = corners.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 prev = corners[(i + n - 1) % n].vertex;
    const Vec2 next = corners[(i + 1) % n].vertex;
    const Vec2 d_in = (corners[i].vertex - prev) / distance(corners[i].vertex, prev);
    const Vec2 d_out = (next - corners[i].vertex) / distance(next, corners[i].vertex);
    corners[i].turn = std::atan2(cross(d_in, d_out), dot(d_in, d_out));
    corners[i].tangent = corners[i].radius * std::tan(std::abs(corners[i].turn) / 2.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    const double leg = distance(corners[i].vertex, corners[j].vertex);
    if (leg < corners[i].tangent + corners[j].tangent + min_straight) return false;
  }
  return true;
}

double filleted_length(const std::vector<Corner>& corners) {
  const std::size_t n = corners.size();
  double len = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    len += distance(corners[i].vertex, corners[j].vertex) - corners[i].tangent - corners[j].tangent;
    len += corners[i].radius * std::abs(corners[i].turn);
  }
  return len;
}

// Samples the filleted loop about every `spacing` metres, starting at the
// middle of the longest straight.
std::vector<Vec2> sample_filleted(const std::vector<Corner>& corners, double spacing) {
  const std::size_t n = corners.size();
  std::size_t longest = 0;
  double longest_len = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    const double len =
        distance(corners[i].vertex, corners[j].vertex) - corners[i].tangent - corners[j].tangent;
    if (len > longest_len) {
      longest_len = len;
      longest = i;
    }
  }
  std::vector<Vec2> pts;
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t i = (longest + step) % n;
    const std::size_t j = (i + 1) % n;
    const Vec2 a = corners[i].vertex;
    const Vec2 b = corners[j].vertex;
    const Vec2 dir = (b - a) / distance(a, b);
    // Straight from the end of corner i's arc to the start of corner j's arc,
    // beginning half-way along when it is the starting straight.
    const Vec2 straight_start = a + dir * corners[i].tangent;
    const Vec2 straight_end = b - dir * corners[j].tangent;
    const double straight_len = distance(straight_start, straight_end);
    const int n_straight = std::max(1, static_cast<int>(std::round(straight_len / spacing)));
    const int first = step == 0 ? n_straight / 2 : 0;
    for (int k = first; k < n_straight; ++k) {
      pts.push_back(straight_start + dir * (straight_len * k / n_straight));
    }
    // Arc of corner j.
    const Corner& c = corners[j];
    const double sign = c.turn >= 0.0 ? 1.0 : -1.0;
    const Vec2 left_normal{-dir.y, dir.x};
    const Vec2 center = straight_end + left_normal * (sign * c.radius);
    const double arc_len = c.radius * std::abs(c.turn);
    const int n_arc = std::max(2, static_cast<int>(std::round(arc_len / spacing)));
    const Vec2 radial = straight_end - center;
    for (int k = 0; k < n_arc; ++k) {
      pts.push_back(center + rotate(radial, c.turn * k / n_arc));
    }
  }
  // The starting straight's first half closes the loop.
  {
    const std::size_t i = longest;
    const std::size_t j = (i + 1) % n;
    const Vec2 a = corners[i].vertex;
    const Vec2 b = corners[j].vertex;
    const Vec2 dir = (b - a) / distance(a, b);
    const Vec2 straight_start = a + dir * corners[i].tangent;
    const double straight_len = distance(straight_start, b - dir * corners[j].tangent);
    const int n_straight = std::max(1, static_cast<int>(std::round(straight_len / spacing)));
    for (int k = 0; k < n_straight / 2; ++k) {
      pts.push_back(straight_start + dir * (straight_len * k / n_straight));
    }
  }
  return pts;
}

TrackDefinition standin_definition(const StandinProfile& profile, std::uint64_t seed,
                                   int n_segments) {
  PortableUniform rng(seed ^ profile.salt);
  const double max_half = profile.half_width + profile.width_variation;
  constexpr double kMaxTurn = 2.6;  // rad; sharper vertices are redrawn
  constexpr double kMinStraight = 25.0;

  std::vector<Corner> corners;
  for (;;) {
    const int n = profile.corners_min +
                  static_cast<int>(rng.next() * (profile.corners_max - profile.corners_min + 1));
    const double base_radius = profile.length / (2.0 * kPi * 0.8);
    corners.assign(n, {});
    for (int i = 0; i < n; ++i) {
      const double theta = 2.0 * kPi * (i + rng.range(-0.3, 0.3)) / n;
      const double rho = base_radius * rng.range(0.55, 1.0);
      corners[i].vertex = {rho * std::cos(theta), rho * std::sin(theta)};
      corners[i].radius = profile.min_radius * rng.range(1.2, 4.0);
    }
    fillet_corners(corners, kMinStraight);  // turn angles only; legs checked below
    bool sharp = false;
    std::size_t sharpest = 0;
    for (std::size_t i = 0; i < corners.size(); ++i) {
      if (std::abs(corners[i].turn) > kMaxTurn) sharp = true;
      if (std::abs(corners[i].turn) > std::abs(corners[sharpest].turn)) sharpest = i;
    }
    if (sharp) continue;
    corners[sharpest].radius = profile.min_radius;

    // Scale vertex positions (radii fixed) until the loop has the target length.
    for (int it = 0; it < 20; ++it) {
      fillet_corners(corners, kMinStraight);
      const double k = profile.length / filleted_length(corners);
      for (auto& c : corners) c.vertex = c.vertex * k;
    }
    if (!fillet_corners(corners, kMinStraight)) continue;
    const auto dense = sample_filleted(corners, 2.0);
    if (min_separation(dense, 8.0 * max_half) < 4.0 * max_half + 10.0) continue;
    break;
  }

  const auto loop = sample_filleted(corners, profile.control_spacing);
  const double total = loop_length(loop);
  const double width_phase_l = rng.range(0.0, 2.0 * kPi);
  const double width_phase_r = rng.range(0.0, 2.0 * kPi);
  const int width_waves = 3 + static_cast<int>(rng.next() * 3.0);

  TrackDefinition def;
  def.id = profile.id;
  def.closed = true;
  def.n_segments = n_segments;
  double s = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const double phase = 2.0 * kPi * width_waves * s / total;
    def.points.push_back({loop[i],
                          profile.half_width + profile.width_variation * std::sin(phase + width_phase_l),
                          profile.half_width + profile.width_variation * std::sin(phase + width_phase_r)});
    s += distance(loop[i], loop[(i + 1) % loop.size()]);
  }
  return def;
}

// Uniformly rescales control points so the smoothed loop has `length`.
Track rescaled(TrackDefinition def, double length) {
  const Track first = Track::build(def);
  const double k = length / first.total_length();
  for (auto& p : def.points) p.point = p.point * k;
  return Track::build(std::move(def));
}

}  // namespace

GeneratorKind parse_generator_kind(const std::string& name) {
  if (name == "circle") return GeneratorKind::circle;
  if (name == "stadium") return GeneratorKind::stadium;
  if (name == "thruxton_standin") return GeneratorKind::thruxton_standin;
  if (name == "anglesey_standin") return GeneratorKind::anglesey_standin;
  if (name == "vegas_standin") return GeneratorKind::vegas_standin;
  throw TrackError("spec", "unknown generator '" + name + "'");
}

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::circle: return "circle";
    case GeneratorKind::stadium: return "stadium";
    case GeneratorKind::thruxton_standin: return "thruxton_standin";
    case GeneratorKind::anglesey_standin: return "anglesey_standin";
    case GeneratorKind::vegas_standin: return "vegas_standin";
  }
  return "unknown";
}

Track generate_track(const GeneratorSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case GeneratorKind::circle: return Track::build(circle_definition(spec));
    case GeneratorKind::stadium: return Track::build(stadium_definition(spec));
    case GeneratorKind::thruxton_standin:
      return rescaled(standin_definition(kThruxton, seed, spec.n_segments), kThruxton.length);
    case GeneratorKind::anglesey_standin:
      return rescaled(standin_definition(kAnglesey, seed, spec.n_segments), kAnglesey.length);
    case GeneratorKind::vegas_standin:
      return rescaled(standin_definition(kVegas, seed, spec.n_segments), kVegas.length);
  }
  throw TrackError("spec", "unknown generator");
}

Track standin_track(const std::string& name, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.kind = parse_generator_kind(name);
  return generate_track(spec, seed);
}

}  // namespace race::track
