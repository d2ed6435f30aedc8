#include "race/track.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>

#include "json.hpp"

namespace race::track {

namespace {

// 5-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr std::array<double, 5> kGaussNodes = {
    -0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
    0.9061798459386640};
constexpr std::array<double, 5> kGaussWeights = {
    0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
    0.4786286704993665, 0.2369268850561891};

constexpr int kArcSubdivisions = 8;

// Solves a tridiagonal system in place (Thomas algorithm). `sub[0]` and
// `sup[n-1]` are ignored.
std::vector<double> solve_tridiagonal(const std::vector<double>& sub,
                                      std::vector<double> diag,
                                      const std::vector<double>& sup,
                                      std::vector<double> rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = sub[i] / diag[i - 1];
    diag[i] -= m * sup[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  std::vector<double> x(n);
  x[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
  }
  return x;
}

// Cyclic tridiagonal solve via Sherman-Morrison. Corner couplings are
// sub[0] (row 0, column n-1) and sup[n-1] (row n-1, column 0).
std::vector<double> solve_cyclic_tridiagonal(const std::vector<double>& sub,
                                             const std::vector<double>& diag,
                                             const std::vector<double>& sup,
                                             const std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  const double beta = sub[0];
  const double alpha = sup[n - 1];
  const double gamma = -diag[0];
  std::vector<double> bb = diag;
  bb[0] = diag[0] - gamma;
  bb[n - 1] = diag[n - 1] - alpha * beta / gamma;
  std::vector<double> x = solve_tridiagonal(sub, bb, sup, rhs);
  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = alpha;
  std::vector<double> z = solve_tridiagonal(sub, bb, sup, u);
  const double fact = (x[0] + beta * x[n - 1] / gamma) /
                      (1.0 + z[0] + beta * z[n - 1] / gamma);
  for (std::size_t i = 0; i < n; ++i) x[i] -= fact * z[i];
  return x;
}

// Interpolating cubic spline of one coordinate over knots u[0..n]. Periodic
// when closed, natural otherwise.
struct CubicSpline {
  std::vector<double> knots;
  std::vector<double> values;
  std::vector<double> second;  // second derivatives at knots

  static CubicSpline fit(std::vector<double> knots, std::vector<double> values,
                         bool periodic) {
    const std::size_t pieces = knots.size() - 1;
    std::vector<double> h(pieces);
    for (std::size_t i = 0; i < pieces; ++i) h[i] = knots[i + 1] - knots[i];
    std::vector<double> second(knots.size(), 0.0);
    if (periodic) {
      const std::size_t n = pieces;
      std::vector<double> sub(n), diag(n), sup(n), rhs(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t prev = (i + n - 1) % n;
        const double hp = h[prev];
        const double hi = h[i];
        sub[i] = hp;
        diag[i] = 2.0 * (hp + hi);
        sup[i] = hi;
        const double y_prev = values[prev];
        const double y_next = values[i + 1];
        rhs[i] = 6.0 * ((y_next - values[i]) / hi - (values[i] - y_prev) / hp);
      }
      const auto m = solve_cyclic_tridiagonal(sub, diag, sup, rhs);
      for (std::size_t i = 0; i < n; ++i) second[i] = m[i];
      second[n] = m[0];
    } else if (pieces >= 2) {
      const std::size_t n = pieces - 1;
      std::vector<double> sub(n), diag(n), sup(n), rhs(n);
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = k + 1;
        sub[k] = h[i - 1];
        diag[k] = 2.0 * (h[i - 1] + h[i]);
        sup[k] = h[i];
        rhs[k] = 6.0 * ((values[i + 1] - values[i]) / h[i] -
                        (values[i] - values[i - 1]) / h[i - 1]);
      }
      const auto m = solve_tridiagonal(sub, diag, sup, rhs);
      for (std::size_t k = 0; k < n; ++k) second[k + 1] = m[k];
    }
    return {std::move(knots), std::move(values), std::move(second)};
  }

  // value, first and second derivative on piece `i` at offset t.
  std::array<double, 3> eval(std::size_t i, double t) const {
    const double h = knots[i + 1] - knots[i];
    const double mi = second[i];
    const double mj = second[i + 1];
    const double a = h - t;
    const double ci = values[i] / h - mi * h / 6.0;
    const double cj = values[i + 1] / h - mj * h / 6.0;
    const double y = mi * a * a * a / (6.0 * h) + mj * t * t * t / (6.0 * h) +
                     ci * a + cj * t;
    const double dy = -mi * a * a / (2.0 * h) + mj * t * t / (2.0 * h) - ci + cj;
    const double ddy = mi * a / h + mj * t / h;
    return {y, dy, ddy};
  }
};

}  // namespace

namespace detail {

struct ProjectionIndex {
  Vec2 origin;
  double cell = 1.0;
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> offsets;  // size width*height + 1
  std::vector<std::uint32_t> candidates;
  // Per cell: every point certainly off the road, certainly within the
  // narrowest half-width, or undecided.
  enum Coverage : std::uint8_t { kOff = 0, kOn = 1, kCheck = 2 };
  std::vector<std::uint8_t> coverage;

  int cell_of(Vec2 p) const {
    const int c = static_cast<int>(std::floor((p.x - origin.x) / cell));
    const int r = static_cast<int>(std::floor((p.y - origin.y) / cell));
    if (c < 0 || r < 0 || c >= width || r >= height) return -1;
    return r * width + c;
  }
};

struct TrackData {
  TrackDefinition definition;
  TrackOptions options;

  CubicSpline spline_x;
  CubicSpline spline_y;
  double knot_total = 0.0;

  std::vector<Vec2> centerline;
  std::vector<double> cum_s;
  std::vector<double> station_u;
  std::vector<double> half_left;
  std::vector<double> half_right;
  std::vector<double> station_curvature;
  std::vector<double> segment_starts;
  double total_length = 0.0;
  double station_step = 0.0;

  mutable std::once_flag index_once;
  mutable ProjectionIndex index;

  std::size_t piece_of(double u) const {
    const auto& k = spline_x.knots;
    auto it = std::upper_bound(k.begin(), k.end(), u);
    std::size_t i = it == k.begin() ? 0 : static_cast<std::size_t>(it - k.begin()) - 1;
    return std::min(i, k.size() - 2);
  }

  double speed_at(double u) const {
    const std::size_t i = piece_of(u);
    const double t = u - spline_x.knots[i];
    const auto ex = spline_x.eval(i, t);
    const auto ey = spline_y.eval(i, t);
    return std::hypot(ex[1], ey[1]);
  }

  double arc_between(double u0, double u1) const {
    const double half = 0.5 * (u1 - u0);
    const double mid = 0.5 * (u1 + u0);
    double sum = 0.0;
    for (std::size_t g = 0; g < kGaussNodes.size(); ++g) {
      sum += kGaussWeights[g] * speed_at(mid + half * kGaussNodes[g]);
    }
    return sum * half;
  }

  // Point, heading and curvature of the interpolant at spline parameter u.
  CenterlineSample eval(double u) const {
    const std::size_t i = piece_of(u);
    const double t = u - spline_x.knots[i];
    const auto ex = spline_x.eval(i, t);
    const auto ey = spline_y.eval(i, t);
    const double speed_sq = ex[1] * ex[1] + ey[1] * ey[1];
    CenterlineSample out;
    out.point = {ex[0], ey[0]};
    out.heading = std::atan2(ey[1], ex[1]);
    out.curvature =
        (ex[1] * ey[2] - ey[1] * ex[2]) / (speed_sq * std::sqrt(speed_sq));
    return out;
  }

  // Finds u with arc length s, starting from a reference (u_ref, s_ref).
  double solve_u(double s, double u_ref, double s_ref, double u_guess) const {
    double u = u_guess;
    for (int it = 0; it < 4; ++it) {
      const double f = s_ref + arc_between(u_ref, u) - s;
      u -= f / speed_at(u);
    }
    return u;
  }

  double width_at(double u, bool left) const {
    const std::size_t i = piece_of(u);
    const auto& pts = definition.points;
    const std::size_t j = (i + 1) % pts.size();
    const double h = spline_x.knots[i + 1] - spline_x.knots[i];
    const double t = std::clamp((u - spline_x.knots[i]) / h, 0.0, 1.0);
    const double a = left ? pts[i].half_width_left : pts[i].half_width_right;
    const double b = left ? pts[j].half_width_left : pts[j].half_width_right;
    return a + (b - a) * t;
  }

  std::size_t segment_count() const {
    return definition.closed ? centerline.size() : centerline.size() - 1;
  }

  void segment(std::size_t k, Vec2& a, Vec2& b, double& s0, double& len) const {
    const std::size_t next = (k + 1) % centerline.size();
    a = centerline[k];
    b = centerline[next];
    s0 = cum_s[k];
    len = (k + 1 < cum_s.size() ? cum_s[k + 1] : total_length) - s0;
  }

  void build_index() const;
  std::optional<TrackFrame> project(Vec2 p) const;
  const ProjectionIndex& projection_index() const {
    std::call_once(index_once, [this] { build_index(); });
    return index;
  }
};

void TrackData::build_index() const {
  const double margin = options.projection_margin;
  ProjectionIndex idx;
  idx.cell = 1.0;
  Vec2 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
  Vec2 hi{-lo.x, -lo.y};
  for (const auto& p : centerline) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const double pad = margin + 2.0 * idx.cell;
  idx.origin = {lo.x - pad, lo.y - pad};
  idx.width = static_cast<int>(std::ceil((hi.x - lo.x + 2.0 * pad) / idx.cell));
  idx.height = static_cast<int>(std::ceil((hi.y - lo.y + 2.0 * pad) / idx.cell));
  const std::size_t n_cells = static_cast<std::size_t>(idx.width) * idx.height;
  const double half_diag = 0.5 * std::sqrt(2.0) * idx.cell;
  const double reach = margin + half_diag;

  std::vector<float> best_sq(n_cells, std::numeric_limits<float>::infinity());

  auto for_cells_near = [&](std::size_t k, auto&& fn) {
    Vec2 a, b;
    double s0, len;
    segment(k, a, b, s0, len);
    const int c0 = std::max(0, static_cast<int>((std::min(a.x, b.x) - reach - idx.origin.x) / idx.cell));
    const int c1 = std::min(idx.width - 1, static_cast<int>((std::max(a.x, b.x) + reach - idx.origin.x) / idx.cell));
    const int r0 = std::max(0, static_cast<int>((std::min(a.y, b.y) - reach - idx.origin.y) / idx.cell));
    const int r1 = std::min(idx.height - 1, static_cast<int>((std::max(a.y, b.y) + reach - idx.origin.y) / idx.cell));
    for (int r = r0; r <= r1; ++r) {
      const double cy = idx.origin.y + (r + 0.5) * idx.cell;
      for (int c = c0; c <= c1; ++c) {
        const Vec2 center{idx.origin.x + (c + 0.5) * idx.cell, cy};
        double t;
        fn(static_cast<std::size_t>(r) * idx.width + c, point_segment_distance_sq(center, a, b, t));
      }
    }
  };

  const std::size_t n_seg = segment_count();
  for (std::size_t k = 0; k < n_seg; ++k) {
    for_cells_near(k, [&](std::size_t cell, double dsq) {
      if (dsq < best_sq[cell]) best_sq[cell] = static_cast<float>(dsq);
    });
  }
  // A segment can be nearest to some point of the cell only if its distance
  // to the cell center is within two half-diagonals of the best one.
  double narrowest = std::numeric_limits<double>::max();
  double widest = 0.0;
  for (std::size_t k = 0; k < half_left.size(); ++k) {
    narrowest = std::min({narrowest, half_left[k], half_right[k]});
    widest = std::max({widest, half_left[k], half_right[k]});
  }
  std::vector<double> admit_sq(n_cells, -1.0);
  idx.coverage.assign(n_cells, ProjectionIndex::kOff);
  for (std::size_t c = 0; c < n_cells; ++c) {
    const double best = std::sqrt(static_cast<double>(best_sq[c]));
    // float rounding of best_sq is far below the 1e-3 slack used here
    if (best + half_diag < narrowest - 1e-3) {
      idx.coverage[c] = ProjectionIndex::kOn;
    } else if (best - half_diag <= widest + 1e-3) {
      idx.coverage[c] = ProjectionIndex::kCheck;
    }
    if (best <= reach) {
      const double limit = best + 2.0 * half_diag + 1e-6;
      admit_sq[c] = limit * limit;
    }
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // (cell, segment)
  for (std::size_t k = 0; k < n_seg; ++k) {
    for_cells_near(k, [&](std::size_t cell, double dsq) {
      if (dsq <= admit_sq[cell]) {
        pairs.emplace_back(static_cast<std::uint32_t>(cell), static_cast<std::uint32_t>(k));
      }
    });
  }
  idx.offsets.assign(n_cells + 1, 0);
  for (const auto& [cell, seg] : pairs) ++idx.offsets[cell + 1];
  for (std::size_t c = 0; c < n_cells; ++c) idx.offsets[c + 1] += idx.offsets[c];
  idx.candidates.resize(pairs.size());
  std::vector<std::uint32_t> fill(idx.offsets.begin(), idx.offsets.end() - 1);
  for (const auto& [cell, seg] : pairs) idx.candidates[fill[cell]++] = seg;
  index = std::move(idx);
}

std::optional<TrackFrame> TrackData::project(Vec2 p) const {
  const auto& idx = projection_index();
  const int cell_id = idx.cell_of(p);
  if (cell_id < 0) return std::nullopt;
  const auto cell = static_cast<std::size_t>(cell_id);
  const std::uint32_t begin = idx.offsets[cell];
  const std::uint32_t end = idx.offsets[cell + 1];
  if (begin == end) return std::nullopt;

  double best_sq = std::numeric_limits<double>::max();
  TrackFrame best{};
  for (std::uint32_t i = begin; i < end; ++i) {
    Vec2 a, b;
    double s0, len;
    segment(idx.candidates[i], a, b, s0, len);
    double t;
    const double dsq = point_segment_distance_sq(p, a, b, t);
    if (dsq < best_sq) {
      best_sq = dsq;
      const Vec2 foot = a + (b - a) * t;
      const double side = cross(b - a, p - foot);
      best.s = s0 + t * len;
      best.d = side >= 0.0 ? std::sqrt(dsq) : -std::sqrt(dsq);
    }
  }
  if (std::sqrt(best_sq) > options.projection_margin) return std::nullopt;
  if (definition.closed && best.s >= total_length) best.s -= total_length;
  return best;
}

}  // namespace detail

namespace {

std::shared_ptr<detail::TrackData> build_data(TrackDefinition def,
                                              const TrackOptions& options) {
  auto data = std::make_shared<detail::TrackData>();
  const auto& pts = def.points;
  const std::size_t min_points = def.closed ? 3 : 2;
  if (pts.size() < min_points) {
    throw TrackError("points", "need at least " + std::to_string(min_points) +
                                   " control points");
  }
  if (def.n_segments < 1) throw TrackError("n_segments", "must be positive");
  if (!(options.resolution > 0.0)) throw TrackError("resolution", "must be positive");
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    if (!std::isfinite(p.point.x) || !std::isfinite(p.point.y)) {
      throw TrackError("points[" + std::to_string(i) + "]", "non-finite coordinate");
    }
    if (!(p.half_width_left > options.min_half_width)) {
      throw TrackError("points[" + std::to_string(i) + "].half_width_left",
                       "half-width below minimum");
    }
    if (!(p.half_width_right > options.min_half_width)) {
      throw TrackError("points[" + std::to_string(i) + "].half_width_right",
                       "half-width below minimum");
    }
  }
  for (std::size_t i = 0; i < def.obstacles.size(); ++i) {
    if (!(def.obstacles[i].radius > 0.0)) {
      throw TrackError("obstacles[" + std::to_string(i) + "]", "radius must be positive");
    }
  }

  // Chord-length knots; closed tracks append the closing edge.
  const std::size_t n_pieces = def.closed ? pts.size() : pts.size() - 1;
  std::vector<double> knots(n_pieces + 1, 0.0);
  std::vector<double> xs(n_pieces + 1), ys(n_pieces + 1);
  for (std::size_t i = 0; i <= n_pieces; ++i) {
    const auto& p = pts[i % pts.size()].point;
    xs[i] = p.x;
    ys[i] = p.y;
    if (i > 0) {
      const double chord = distance(pts[(i - 1) % pts.size()].point, p);
      if (!(chord > 1e-9)) {
        throw TrackError("points[" + std::to_string(i % pts.size()) + "]",
                         "non-increasing arc length");
      }
      knots[i] = knots[i - 1] + chord;
    }
  }
  data->spline_x = CubicSpline::fit(knots, xs, def.closed);
  data->spline_y = CubicSpline::fit(knots, ys, def.closed);
  data->knot_total = knots.back();
  data->definition = std::move(def);
  data->options = options;

  // Arc-length table over sub-intervals of every piece.
  std::vector<double> sub_u;
  std::vector<double> sub_s;
  sub_u.reserve(n_pieces * kArcSubdivisions + 1);
  sub_s.reserve(n_pieces * kArcSubdivisions + 1);
  sub_u.push_back(0.0);
  sub_s.push_back(0.0);
  for (std::size_t i = 0; i < n_pieces; ++i) {
    const double u0 = knots[i];
    const double h = knots[i + 1] - knots[i];
    for (int q = 1; q <= kArcSubdivisions; ++q) {
      const double ua = u0 + h * (q - 1) / kArcSubdivisions;
      const double ub = q == kArcSubdivisions ? knots[i + 1] : u0 + h * q / kArcSubdivisions;
      sub_s.push_back(sub_s.back() + data->arc_between(ua, ub));
      sub_u.push_back(ub);
    }
  }
  const double length = sub_s.back();
  const bool closed = data->definition.closed;
  const std::size_t intervals =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(length / options.resolution)));
  const double step = length / static_cast<double>(intervals);
  const std::size_t n_stations = closed ? intervals : intervals + 1;

  data->total_length = length;
  data->station_step = step;
  data->centerline.resize(n_stations);
  data->cum_s.resize(n_stations);
  data->station_u.resize(n_stations);
  data->half_left.resize(n_stations);
  data->half_right.resize(n_stations);
  data->station_curvature.resize(n_stations);

  for (std::size_t k = 0; k < n_stations; ++k) {
    const double s = k == intervals ? length : static_cast<double>(k) * step;
    double u;
    if (k == 0) {
      u = 0.0;
    } else if (k == intervals) {
      u = data->knot_total;
    } else {
      auto it = std::upper_bound(sub_s.begin(), sub_s.end(), s);
      const std::size_t j = static_cast<std::size_t>(it - sub_s.begin()) - 1;
      const double frac = (s - sub_s[j]) / (sub_s[j + 1] - sub_s[j]);
      const double guess = sub_u[j] + frac * (sub_u[j + 1] - sub_u[j]);
      u = data->solve_u(s, sub_u[j], sub_s[j], guess);
    }
    const auto smp = data->eval(u);
    data->cum_s[k] = s;
    data->station_u[k] = u;
    data->centerline[k] = smp.point;
    data->station_curvature[k] = smp.curvature;
    data->half_left[k] = data->width_at(u, true);
    data->half_right[k] = data->width_at(u, false);
  }

  for (std::size_t k = 0; k < n_stations; ++k) {
    const double kappa = data->station_curvature[k];
    const double inner = kappa > 0.0 ? data->half_left[k] : data->half_right[k];
    if (std::abs(kappa) * inner >= 1.0) {
      throw TrackError("points", "curvature exceeds inner half-width near s = " +
                                     std::to_string(data->cum_s[k]));
    }
  }

  const int n_seg = data->definition.n_segments;
  data->segment_starts.resize(n_seg);
  for (int i = 0; i < n_seg; ++i) {
    data->segment_starts[i] = length * static_cast<double>(i) / n_seg;
  }
  return data;
}

}  // namespace

Track::Track(std::shared_ptr<const detail::TrackData> data) : data_(std::move(data)) {}

Track Track::build(TrackDefinition definition, TrackOptions options) {
  return Track(build_data(std::move(definition), options));
}

const std::string& Track::id() const { return data_->definition.id; }
bool Track::closed() const { return data_->definition.closed; }
int Track::n_segments() const { return data_->definition.n_segments; }
double Track::total_length() const { return data_->total_length; }
std::span<const Vec2> Track::centerline() const { return data_->centerline; }
std::span<const double> Track::cum_s() const { return data_->cum_s; }
std::span<const double> Track::half_width_left() const { return data_->half_left; }
std::span<const double> Track::half_width_right() const { return data_->half_right; }
std::span<const double> Track::segment_starts() const { return data_->segment_starts; }
std::span<const Obstacle> Track::obstacles() const { return data_->definition.obstacles; }
const TrackDefinition& Track::definition() const { return data_->definition; }
const TrackOptions& Track::options() const { return data_->options; }

Track Track::with_segments(int n) const {
  TrackDefinition def = data_->definition;
  def.n_segments = n;
  return build(std::move(def), data_->options);
}

double Track::wrap(double s) const {
  if (!closed()) return s;
  const double len = total_length();
  s = std::fmod(s, len);
  if (s < 0.0) s += len;
  if (s >= len) s = 0.0;
  return s;
}

double Track::delta_s(double a, double b) const {
  double d = b - a;
  if (closed()) {
    const double len = total_length();
    d = std::remainder(d, len);
  }
  return d;
}

CenterlineSample Track::sample(double s) const {
  const auto& d = *data_;
  if (closed()) {
    s = wrap(s);
  } else if (s < 0.0 || s > d.total_length) {
    throw std::out_of_range("sample: s = " + std::to_string(s) +
                            " outside open track [0, " +
                            std::to_string(d.total_length) + "]");
  }
  const std::size_t n = d.cum_s.size();
  std::size_t k = std::min(static_cast<std::size_t>(s / d.station_step), n - 1);
  if (!closed() && k == n - 1 && k > 0) --k;
  const double u0 = d.station_u[k];
  const double s0 = d.cum_s[k];
  const double u1 = k + 1 < n ? d.station_u[k + 1] : d.knot_total;
  const double guess = u0 + (u1 - u0) * (s - s0) / d.station_step;
  double u = d.solve_u(s, u0, s0, guess);
  if (closed() && u >= d.knot_total) u -= d.knot_total;
  auto out = d.eval(u);
  out.s = s;
  return out;
}

std::optional<TrackFrame> Track::project(Vec2 point) const {
  auto frame = data_->project(point);
  if (!frame) return frame;
  // The station polyline is within a sagitta of the curve; two Newton steps
  // on (c(s) - p) . T(s) = 0 move the foot onto the smooth centerline.
  double s = frame->s;
  for (int iter = 0; iter < 2; ++iter) {
    const CenterlineSample c = sample(s);
    const Vec2 t{std::cos(c.heading), std::sin(c.heading)};
    const Vec2 n{-t.y, t.x};
    const Vec2 r = point - c.point;
    const double denom = 1.0 - c.curvature * dot(r, n);
    if (!(denom > 1e-3)) break;
    double next = s + dot(r, t) / denom;
    if (closed()) {
      next = wrap(next);
    } else {
      next = std::clamp(next, 0.0, data_->total_length);
    }
    s = next;
  }
  const CenterlineSample c = sample(s);
  const Vec2 n{-std::sin(c.heading), std::cos(c.heading)};
  frame->s = s;
  frame->d = dot(point - c.point, n);
  return frame;
}

TrackFrame Track::project_exhaustive(Vec2 point) const {
  const auto& d = *data_;
  double best_sq = std::numeric_limits<double>::max();
  TrackFrame best{};
  for (std::size_t k = 0; k < d.segment_count(); ++k) {
    Vec2 a, b;
    double s0, len;
    d.segment(k, a, b, s0, len);
    double t;
    const double dsq = point_segment_distance_sq(point, a, b, t);
    if (dsq < best_sq) {
      best_sq = dsq;
      const Vec2 foot = a + (b - a) * t;
      best.s = wrap(s0 + t * len);
      best.d = cross(b - a, point - foot) >= 0.0 ? std::sqrt(dsq) : -std::sqrt(dsq);
    }
  }
  return best;
}

namespace {
double interpolate_station(const detail::TrackData& d, const std::vector<double>& v,
                           double s) {
  const std::size_t n = v.size();
  const double pos = s / d.station_step;
  std::size_t k = std::min(static_cast<std::size_t>(std::max(pos, 0.0)), n - 1);
  const double frac = std::clamp(pos - static_cast<double>(k), 0.0, 1.0);
  const std::size_t next = k + 1 < n ? k + 1 : (d.definition.closed ? 0 : k);
  return v[k] + (v[next] - v[k]) * frac;
}
}  // namespace

double Track::half_width_left_at(double s) const {
  return interpolate_station(*data_, data_->half_left, wrap(s));
}

double Track::half_width_right_at(double s) const {
  return interpolate_station(*data_, data_->half_right, wrap(s));
}

bool Track::is_drivable(Vec2 point) const {
  const auto& idx = data_->projection_index();
  const int cell = idx.cell_of(point);
  if (cell < 0 || idx.coverage[cell] == detail::ProjectionIndex::kOff) return false;
  if (idx.coverage[cell] == detail::ProjectionIndex::kCheck) {
    const auto frame = data_->project(point);
    if (!frame) return false;
    if (frame->d > half_width_left_at(frame->s) || -frame->d > half_width_right_at(frame->s)) {
      return false;
    }
  }
  for (const auto& obs : obstacles()) {
    if (distance(point, obs.center) <= obs.radius) return false;
  }
  return true;
}

int Track::segment_index(double s) const {
  const auto starts = segment_starts();
  auto it = std::upper_bound(starts.begin(), starts.end(), s);
  if (it == starts.begin()) return 0;
  return static_cast<int>(it - starts.begin()) - 1;
}

double Track::segment_end(int index) const {
  const auto starts = segment_starts();
  return index + 1 < static_cast<int>(starts.size()) ? starts[index + 1] : total_length();
}

bool Track::operator==(const Track& other) const {
  if (data_ == other.data_) return true;
  const auto& a = *data_;
  const auto& b = *other.data_;
  return a.definition == b.definition && a.centerline == b.centerline &&
         a.cum_s == b.cum_s && a.half_left == b.half_left &&
         a.half_right == b.half_right && a.segment_starts == b.segment_starts &&
         a.total_length == b.total_length;
}

// ---------------------------------------------------------------- file IO

TrackDefinition parse_track_definition(const std::string& text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw TrackError("document", std::string("malformed: ") + e.what());
  }
  if (!doc.is_object()) throw TrackError("document", "expected an object");

  auto require = [&](const char* key) -> const json& {
    if (!doc.contains(key)) throw TrackError(key, "missing field");
    return doc.at(key);
  };
  TrackDefinition def;
  const auto& id = require("id");
  if (!id.is_string()) throw TrackError("id", "expected a string");
  def.id = id.get<std::string>();
  const auto& closed = require("closed");
  if (!closed.is_boolean()) throw TrackError("closed", "expected a boolean");
  def.closed = closed.get<bool>();
  const auto& n_seg = require("n_segments");
  if (!n_seg.is_number_integer()) throw TrackError("n_segments", "expected an integer");
  def.n_segments = n_seg.get<int>();

  const auto& points = require("points");
  if (!points.is_array()) throw TrackError("points", "expected an array");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    const std::string field = "points[" + std::to_string(i) + "]";
    if (!p.is_array() || p.size() != 4) throw TrackError(field, "expected [x, y, wl, wr]");
    for (const auto& v : p) {
      if (!v.is_number()) throw TrackError(field, "expected numbers");
    }
    def.points.push_back({{p[0].get<double>(), p[1].get<double>()},
                          p[2].get<double>(),
                          p[3].get<double>()});
  }
  if (doc.contains("obstacles")) {
    const auto& obstacles = doc.at("obstacles");
    if (!obstacles.is_array()) throw TrackError("obstacles", "expected an array");
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
      const auto& o = obstacles[i];
      const std::string field = "obstacles[" + std::to_string(i) + "]";
      if (!o.is_array() || o.size() != 3) throw TrackError(field, "expected [cx, cy, r]");
      for (const auto& v : o) {
        if (!v.is_number()) throw TrackError(field, "expected numbers");
      }
      def.obstacles.push_back({{o[0].get<double>(), o[1].get<double>()}, o[2].get<double>()});
    }
  }
  return def;
}

std::string serialize_track_definition(const TrackDefinition& def) {
  using nlohmann::json;
  json doc;
  doc["id"] = def.id;
  doc["closed"] = def.closed;
  doc["n_segments"] = def.n_segments;
  json points = json::array();
  for (const auto& p : def.points) {
    points.push_back({p.point.x, p.point.y, p.half_width_left, p.half_width_right});
  }
  doc["points"] = std::move(points);
  json obstacles = json::array();
  for (const auto& o : def.obstacles) {
    obstacles.push_back({o.center.x, o.center.y, o.radius});
  }
  doc["obstacles"] = std::move(obstacles);
  return doc.dump() + "\n";
}

Track load_track(const std::filesystem::path& path, TrackOptions options) {
  std::ifstream in(path);
  if (!in) throw TrackError("path", "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return Track::build(parse_track_definition(buffer.str()), options);
}

void save_track(const Track& track, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw TrackError("path", "cannot write " + path.string());
  out << serialize_track_definition(track.definition());
}

}  // namespace race::track
