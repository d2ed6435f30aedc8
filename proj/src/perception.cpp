#include "race/perception.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace race::perception {

using Code = PerceptionError::Code;

BoundaryPoints extract_boundary_points(const camera::Raster& raster,
                                       const camera::CameraCalibration& calib) {
  if (raster.width != calib.width || raster.height != calib.height ||
      raster.cells.size() != static_cast<std::size_t>(raster.width) * raster.height) {
    throw PerceptionError(Code::bad_input, "raster dims do not match calibration " + calib.name);
  }
  BoundaryPoints out;
  bool any = false;
  for (int r = 0; r < raster.height; ++r) {
    int first = -1;
    int last = -1;
    int runs = 0;
    for (int c = 0; c < raster.width; ++c) {
      if (!raster.at(r, c)) continue;
      if (first < 0) first = c;
      if (c == 0 || !raster.at(r, c - 1)) ++runs;
      last = c;
    }
    if (first < 0) continue;
    any = true;
    if (runs != 1) continue;  // two crossings of the road; ambiguous
    // boundary sits on the outer edge of the outermost drivable cell
    if (first > 0) out.left.push_back(calib.cell_to_vehicle(r, first - 0.5));
    if (last < raster.width - 1) out.right.push_back(calib.cell_to_vehicle(r, last + 0.5));
  }
  if (!any) throw PerceptionError(Code::empty_scene, calib.name + ": no drivable cells");
  return out;
}

BoundaryPolynomial fit_cubic(std::span<const Vec2> points, Side side) {
  if (points.empty()) throw PerceptionError(Code::insufficient_points, "no points to fit");
  std::vector<double> xs;
  xs.reserve(points.size());
  double scale = 1.0;
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw PerceptionError(Code::bad_input, "non-finite boundary point");
    }
    xs.push_back(p.x);
    scale = std::max(scale, std::abs(p.x));
  }
  std::sort(xs.begin(), xs.end());
  int distinct = 1;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (xs[i] - xs[i - 1] > 1e-9 * scale) ++distinct;
  }

  BoundaryPolynomial poly;
  poly.side = side;
  poly.order = std::min(3, distinct - 1);
  poly.degraded = poly.order < 3;
  poly.x_min = xs.front();
  poly.x_max = xs.back();

  const int cols = poly.order + 1;
  Eigen::MatrixXd a(points.size(), cols);
  Eigen::VectorXd b(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double u = points[i].x / scale;
    double term = 1.0;
    for (int k = 0; k < cols; ++k) {
      a(i, k) = term;
      term *= u;
    }
    b(i) = points[i].y;
  }
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(b);
  double inv = 1.0;
  for (int k = 0; k < cols; ++k) {
    poly.c[k] = coef(k) * inv;
    inv /= scale;
  }
  double sq = 0.0;
  for (const auto& p : points) {
    const double e = poly.eval(p.x) - p.y;
    sq += e * e;
  }
  poly.residual_rms = std::sqrt(sq / static_cast<double>(points.size()));
  return poly;
}

TrackLimits track_limits(const BoundaryPolynomial& left, const BoundaryPolynomial& right,
                         double step, double horizon, double margin) {
  if (!(step > 0.0) || !(horizon > 0.0) || !(margin >= 0.0)) {
    throw PerceptionError(Code::bad_input, "step and horizon must be positive");
  }
  const double lo = std::max(left.x_min, right.x_min);
  const double hi = std::min({horizon, left.x_max, right.x_max});
  if (hi - std::max(lo, 0.0) < step) {
    throw PerceptionError(Code::insufficient_points, "boundaries share less than one step");
  }
  TrackLimits out;
  out.residual_left = left.residual_rms;
  out.residual_right = right.residual_rms;
  const int n = static_cast<int>(std::floor(hi / step + 1e-9));
  for (int i = 0; i <= n; ++i) {
    const double x = i * step;
    const double yl = left.eval(x) - margin;
    const double yr = right.eval(x) + margin;
    if (!(yl > yr)) {
      std::ostringstream msg;
      msg << "boundaries cross at x = " << x;
      throw PerceptionError(Code::inconsistent, msg.str());
    }
    out.samples.push_back({x, yl, yr});
  }
  return out;
}

std::vector<CurvatureSample> centerline_curvature(const TrackLimits& limits) {
  if (limits.samples.size() < 5) {
    throw PerceptionError(Code::insufficient_points, "curvature needs at least 5 samples");
  }
  std::vector<Vec2> mid;
  mid.reserve(limits.samples.size());
  for (const auto& s : limits.samples) mid.push_back({s.x, 0.5 * (s.y_left + s.y_right)});
  const BoundaryPolynomial fit = fit_cubic(mid);
  std::vector<CurvatureSample> out;
  out.reserve(mid.size());
  for (const auto& p : mid) {
    const double d1 = fit.d1(p.x);
    out.push_back({p.x, fit.d2(p.x) / std::pow(1.0 + d1 * d1, 1.5)});
  }
  return out;
}

TrackLimits perceive(const std::map<std::string, camera::Raster>& cameras,
                     const std::map<std::string, camera::CameraCalibration>& calibrations,
                     const PerceptionConfig& config) {
  std::vector<Vec2> left;
  std::vector<Vec2> right;
  bool any_scene = false;
  for (const auto& [name, raster] : cameras) {
    auto it = calibrations.find(name);
    if (it == calibrations.end()) continue;
    BoundaryPoints pts;
    try {
      pts = extract_boundary_points(raster, it->second);
    } catch (const PerceptionError& e) {
      if (e.code() == Code::empty_scene) continue;
      throw;
    }
    any_scene = true;
    auto keep = [&](const Vec2& p) { return p.x >= 0.0 && p.x <= config.max_fit_x; };
    std::copy_if(pts.left.begin(), pts.left.end(), std::back_inserter(left), keep);
    std::copy_if(pts.right.begin(), pts.right.end(), std::back_inserter(right), keep);
  }
  if (!any_scene) throw PerceptionError(Code::empty_scene, "no drivable cells in any view");
  if (left.empty() || right.empty()) {
    throw PerceptionError(Code::insufficient_points, "a boundary is not visible");
  }
  return track_limits(fit_cubic(left, Side::left), fit_cubic(right, Side::right), config.step,
                      config.horizon, config.margin);
}

std::string limits_csv(const TrackLimits& limits) {
  std::ostringstream out;
  out.precision(10);
  out << "x,y_left,y_right\n";
  for (const auto& s : limits.samples) out << s.x << ',' << s.y_left << ',' << s.y_right << '\n';
  return out.str();
}

}  // namespace race::perception
