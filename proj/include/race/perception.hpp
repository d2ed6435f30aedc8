#pragma once

#include <array>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "race/camera.hpp"
#include "race/geometry.hpp"

namespace race::perception {

enum class Side { left, right };

/// y(x) = c0 + c1 x + c2 x^2 + c3 x^3 in the vehicle frame (x forward).
struct BoundaryPolynomial {
  Side side = Side::left;
  std::array<double, 4> c{0.0, 0.0, 0.0, 0.0};
  double x_min = 0.0;
  double x_max = 0.0;
  double residual_rms = 0.0;
  int order = 3;
  bool degraded = false;  // fewer than 4 distinct x; lower order fitted

  double eval(double x) const { return c[0] + x * (c[1] + x * (c[2] + x * c[3])); }
  double d1(double x) const { return c[1] + x * (2.0 * c[2] + 3.0 * x * c[3]); }
  double d2(double x) const { return 2.0 * c[2] + 6.0 * x * c[3]; }
};

struct LimitSample {
  double x = 0.0;
  double y_left = 0.0;
  double y_right = 0.0;
};

struct TrackLimits {
  std::vector<LimitSample> samples;
  double residual_left = 0.0;
  double residual_right = 0.0;

  double horizon() const { return samples.empty() ? 0.0 : samples.back().x; }
};

struct BoundaryPoints {
  std::vector<Vec2> left;
  std::vector<Vec2> right;
};

struct CurvatureSample {
  double x = 0.0;
  double kappa = 0.0;
};

class PerceptionError : public std::runtime_error {
 public:
  enum class Code { empty_scene, insufficient_points, inconsistent, bad_input };
  PerceptionError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// Per raster row holding a single run of drivable cells, the run's outer
/// edges mapped into the vehicle frame. Edges touching the raster border are
/// not boundaries and are skipped.
BoundaryPoints extract_boundary_points(const camera::Raster& raster,
                                       const camera::CameraCalibration& calib);

/// Least-squares cubic in y over x.
BoundaryPolynomial fit_cubic(std::span<const Vec2> points, Side side = Side::left);

/// Samples both boundaries at x = 0, step, ... up to min(horizon, shared
/// x_max), each pulled inward by `margin`.
TrackLimits track_limits(const BoundaryPolynomial& left, const BoundaryPolynomial& right,
                         double step, double horizon, double margin = 0.0);

/// Curvature of a cubic refit of the midline at every limit sample.
std::vector<CurvatureSample> centerline_curvature(const TrackLimits& limits);

struct PerceptionConfig {
  double step = 1.0;
  double horizon = 30.0;
  double margin = 0.0;
  /// Boundary points beyond this forward distance are not fitted.
  double max_fit_x = 32.0;
};

/// Full pipeline over every available view.
TrackLimits perceive(const std::map<std::string, camera::Raster>& cameras,
                     const std::map<std::string, camera::CameraCalibration>& calibrations,
                     const PerceptionConfig& config = {});

/// "x,y_left,y_right" rows with a header.
std::string limits_csv(const TrackLimits& limits);

}  // namespace race::perception
