#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "race/planner.hpp"

namespace race::planner {

namespace {

struct Corridor {
  double lo = 0.0;  // right edge after margin
  double hi = 0.0;  // left edge after margin
};

// Limits are uniformly sampled from x = 0; linear interpolation between samples.
Corridor corridor_at(const TrackLimits& limits, double x, double margin) {
  const auto& s = limits.samples;
  const double step = s.size() > 1 ? s[1].x - s[0].x : 1.0;
  const double u = std::clamp(x / step, 0.0, static_cast<double>(s.size() - 1));
  const std::size_t i = std::min(static_cast<std::size_t>(u), s.size() - 2);
  const double f = u - static_cast<double>(i);
  const double yl = s[i].y_left + f * (s[i + 1].y_left - s[i].y_left);
  const double yr = s[i].y_right + f * (s[i + 1].y_right - s[i].y_right);
  return {yr + margin, yl - margin};
}

double menger(Vec2 a, Vec2 b, Vec2 c) {
  const Vec2 ab = b - a;
  const Vec2 bc = c - b;
  const Vec2 ac = c - a;
  const double den = norm(ab) * norm(bc) * norm(ac);
  return den > 0.0 ? 2.0 * cross(ab, bc) / den : 0.0;
}

// Cubic spline with y'(x0) = 0 and a natural right end.
class StartClampedSpline {
 public:
  StartClampedSpline(std::vector<double> x, std::vector<double> y)
      : x_(std::move(x)), y_(std::move(y)), m_(x_.size(), 0.0) {
    const std::size_t n = x_.size() - 1;
    // unknowns M_0..M_{n-1}; M_n = 0
    std::vector<double> sub(n, 0.0), diag(n, 0.0), sup(n, 0.0), rhs(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double h = x_[i + 1] - x_[i];
      if (i == 0) {
        diag[0] = 2.0 * h;
        sup[0] = h;
        rhs[0] = 6.0 * (y_[1] - y_[0]) / h;
      } else {
        const double hp = x_[i] - x_[i - 1];
        sub[i] = hp;
        diag[i] = 2.0 * (hp + h);
        sup[i] = h;
        rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h - (y_[i] - y_[i - 1]) / hp);
      }
    }
    for (std::size_t i = 1; i < n; ++i) {
      const double w = sub[i] / diag[i - 1];
      diag[i] -= w * sup[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    for (std::size_t i = n; i-- > 0;) {
      const double next = i + 1 < n ? m_[i + 1] : 0.0;
      m_[i] = (rhs[i] - sup[i] * next) / diag[i];
    }
  }

  void eval(double x, double& y, double& d1, double& d2) const {
    std::size_t i = 0;
    while (i + 2 < x_.size() && x > x_[i + 1]) ++i;
    const double h = x_[i + 1] - x_[i];
    const double a = x_[i + 1] - x;
    const double b = x - x_[i];
    const double ca = y_[i] / h - m_[i] * h / 6.0;
    const double cb = y_[i + 1] / h - m_[i + 1] * h / 6.0;
    y = m_[i] * a * a * a / (6.0 * h) + m_[i + 1] * b * b * b / (6.0 * h) + ca * a + cb * b;
    d1 = -m_[i] * a * a / (2.0 * h) + m_[i + 1] * b * b / (2.0 * h) - ca + cb;
    d2 = (m_[i] * a + m_[i + 1] * b) / h;
  }

 private:
  std::vector<double> x_, y_, m_;
};

MpcResult safe_stop(Zone zone) {
  MpcResult r;
  r.action = {0.0, -1.0};
  r.infeasible = true;
  r.zone = zone;
  return r;
}

}  // namespace

MpcResult mpc_plan(const VehicleState& state, const TrackLimits& limits, const MpcParams& base,
                   const VehicleParams& vehicle) {
  if (!std::isfinite(state.speed)) throw std::invalid_argument("state speed is not finite");
  if (limits.samples.size() < 2) return safe_stop(Zone::straight);

  MpcParams params = base;
  Zone zone = Zone::straight;
  if (limits.samples.size() >= 5) zone = zone_classify(limits, params);
  if (auto it = params.zone_presets.find(zone); it != params.zone_presets.end()) {
    params.a_lat_max = it->second.a_lat_max;
    params.margin = it->second.margin;
  }

  // shrink to what perception can see
  const double reach = std::min(params.horizon_steps * params.ds, limits.horizon());
  const int n = static_cast<int>(std::floor(reach / params.ds + 1e-9));
  if (n < 2) return safe_stop(zone);
  const double horizon = n * params.ds;

  for (const auto& s : limits.samples) {
    if (s.x > horizon + 1e-9) break;
    if (s.y_left - s.y_right < 2.0 * params.margin) return safe_stop(zone);
  }

  // lattice stations
  const int m = std::max(1, static_cast<int>(std::lround(horizon / params.station_spacing)));
  const int k_count = params.lattice_size;
  std::vector<double> sx(m + 1);
  std::vector<Corridor> corr(m + 1);
  for (int j = 0; j <= m; ++j) {
    sx[j] = horizon * j / m;
    corr[j] = corridor_at(limits, sx[j], params.margin);
  }
  std::vector<double> ys(static_cast<std::size_t>(m + 1) * k_count);
  for (int j = 0; j <= m; ++j) {
    const double mid = 0.5 * (corr[j].lo + corr[j].hi);
    const double half = 0.5 * (corr[j].hi - corr[j].lo) * 0.999;
    for (int k = 0; k < k_count; ++k) ys[j * k_count + k] = mid + half * (-1.0 + 2.0 * k / (k_count - 1));
  }
  auto lattice_y = [&](int j, int k) { return ys[j * k_count + k]; };
  auto offset_cost = [&](int j, int k) {
    const double e = lattice_y(j, k) - 0.5 * (corr[j].lo + corr[j].hi);
    return params.offset_weight * e * e;
  };

  // DP over (previous, current) lattice indices. A ghost point behind the
  // vehicle pins the initial heading; one past the last station, along the
  // corridor, charges for leaving the horizon at the wrong heading.
  const Vec2 ghost{-params.station_spacing, 0.0};
  Vec2 exit_dir{1.0, 0.0};
  {
    const double back_x = std::max(0.0, sx[m] - params.station_spacing);
    const Corridor a = corridor_at(limits, back_x, params.margin);
    const Corridor b = corridor_at(limits, sx[m], params.margin);
    exit_dir = Vec2{sx[m] - back_x, 0.5 * (b.lo + b.hi - a.lo - a.hi)};
    exit_dir = exit_dir * (params.station_spacing / norm(exit_dir));
  }
  auto exit_cost = [&](Vec2 prev, Vec2 last) {
    const double c = menger(prev, last, last + exit_dir);
    return c * c;
  };
  const Vec2 origin{0.0, 0.0};
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const std::size_t kk = static_cast<std::size_t>(k_count) * k_count;
  std::vector<std::vector<double>> cost(m + 1, std::vector<double>(kk, kInf));
  std::vector<std::vector<int>> back(m + 1, std::vector<int>(kk, -1));
  auto point = [&](int j, int k) { return Vec2{sx[j], lattice_y(j, k)}; };

  std::vector<double> first(k_count);
  for (int k = 0; k < k_count; ++k) {
    const double c = menger(ghost, origin, point(1, k));
    first[k] = c * c + offset_cost(1, k);
  }
  if (m == 1) {
    for (int k = 0; k < k_count; ++k) cost[1][k] = first[k] + exit_cost(origin, point(1, k));
  } else {
    for (int p = 0; p < k_count; ++p) {
      const Vec2 b = point(1, p);
      for (int k = 0; k < k_count; ++k) {
        const Vec2 c2 = point(2, k);
        const double c = menger(origin, b, c2);
        double total = first[p] + c * c + offset_cost(2, k);
        if (m == 2) total += exit_cost(b, c2);
        cost[2][p * k_count + k] = total;
      }
    }
    // chord lengths between lattice points, so the inner loop needs no sqrt
    auto chords = [&](int ja, int jb, std::vector<double>& out) {
      out.resize(kk);
      const double dx = sx[jb] - sx[ja];
      for (int a = 0; a < k_count; ++a) {
        for (int b = 0; b < k_count; ++b) {
          const double dy = lattice_y(jb, b) - lattice_y(ja, a);
          out[a * k_count + b] = std::sqrt(dx * dx + dy * dy);
        }
      }
    };
    std::vector<double> len_ab, len_bc, len_ac;
    chords(1, 2, len_bc);
    for (int j = 3; j <= m; ++j) {
      len_ab.swap(len_bc);
      chords(j - 1, j, len_bc);
      chords(j - 2, j, len_ac);
      const double dx_ab = sx[j - 1] - sx[j - 2];
      const double dx_bc = sx[j] - sx[j - 1];
      for (int p = 0; p < k_count; ++p) {
        const Vec2 b = point(j - 1, p);
        for (int k = 0; k < k_count; ++k) {
          const Vec2 c = point(j, k);
          const double oc = offset_cost(j, k) + (j == m ? exit_cost(b, c) : 0.0);
          const double dy_bc = c.y - b.y;
          const double l_bc = len_bc[p * k_count + k];
          double best = kInf;
          int arg = -1;
          for (int q = 0; q < k_count; ++q) {
            const double prev = cost[j - 1][q * k_count + p];
            if (prev >= best) continue;
            const double dy_ab = b.y - lattice_y(j - 2, q);
            const double kap = 2.0 * (dx_ab * dy_bc - dy_ab * dx_bc) /
                               (len_ab[q * k_count + p] * l_bc * len_ac[q * k_count + k]);
            const double total = prev + kap * kap + oc;
            if (total < best) {
              best = total;
              arg = q;
            }
          }
          cost[j][p * k_count + k] = best;
          back[j][p * k_count + k] = arg;
        }
      }
    }
  }

  // backtrack
  std::vector<int> pick(m + 1, 0);
  {
    double best = kInf;
    std::size_t arg = 0;
    const std::size_t limit = m == 1 ? static_cast<std::size_t>(k_count) : kk;
    for (std::size_t i = 0; i < limit; ++i) {
      if (cost[m][i] < best) {
        best = cost[m][i];
        arg = i;
      }
    }
    if (m == 1) {
      pick[1] = static_cast<int>(arg);
    } else {
      pick[m] = static_cast<int>(arg % k_count);
      pick[m - 1] = static_cast<int>(arg / k_count);
      for (int j = m; j >= 3; --j) pick[j - 2] = back[j][pick[j - 1] * k_count + pick[j]];
    }
  }

  std::vector<double> knot_x(m + 1), knot_y(m + 1);
  for (int j = 0; j <= m; ++j) {
    knot_x[j] = sx[j];
    knot_y[j] = j == 0 ? 0.0 : lattice_y(j, pick[j]);
  }
  const StartClampedSpline spline(knot_x, knot_y);

  MpcResult result;
  result.zone = zone;
  std::vector<double> kappa(n + 1);
  auto& pts = result.trajectory.points;
  pts.resize(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double x = i * params.ds;
    double y, d1, d2;
    spline.eval(x, y, d1, d2);
    if (i > 0) {
      const Corridor c = corridor_at(limits, x, params.margin);
      const double eps = 1e-6 * (c.hi - c.lo);
      y = std::clamp(y, c.lo + eps, c.hi - eps);
    }
    kappa[i] = d2 / std::pow(1.0 + d1 * d1, 1.5);
    pts[i].x = x;
    pts[i].y = y;
    pts[i].delta = std::atan(vehicle.wheelbase * kappa[i]);
  }
  const std::vector<double> v = speed_profile(kappa, params, std::max(state.speed, 0.0));
  for (int i = 0; i <= n; ++i) pts[i].v = v[i];

  // steer toward the path point one lookahead ahead
  const double ld = std::clamp(std::max(params.lookahead_min, params.lookahead_time * state.speed),
                               params.ds, horizon);
  const double u = ld / params.ds;
  const int i0 = std::min(static_cast<int>(u), n - 1);
  const double f = u - i0;
  const Vec2 goal{pts[i0].x + f * (pts[i0 + 1].x - pts[i0].x),
                  pts[i0].y + f * (pts[i0 + 1].y - pts[i0].y)};
  const double delta = pursuit_steer(goal, vehicle.wheelbase);
  result.action.steering = std::clamp(delta / vehicle.max_steer, -1.0, 1.0);

  // acceleration that reaches the next profile speed over one spatial step
  const double v0 = std::max(state.speed, 0.0);
  const double accel = (v[1] * v[1] - v0 * v0) / (2.0 * params.ds);
  result.action.acceleration = std::clamp(
      accel >= 0.0 ? accel / vehicle.max_accel : accel / vehicle.max_brake, -1.0, 1.0);
  return result;
}

std::string trajectory_csv(const PlannedTrajectory& trajectory) {
  std::ostringstream out;
  out.precision(10);
  out << "x,y,v,delta\n";
  for (const auto& p : trajectory.points) {
    out << p.x << ',' << p.y << ',' << p.v << ',' << p.delta << '\n';
  }
  return out.str();
}

}  // namespace race::planner
