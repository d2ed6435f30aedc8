#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "race/plot.hpp"

namespace race::plot {

namespace {

constexpr double kPanel = 480.0;
constexpr double kPad = 30.0;

struct Box {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  void add(double x, double y) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  bool empty() const { return !(x1 >= x0); }
};

// Equal-aspect mapping of world coordinates into the left panel (y up).
struct MapView {
  Box box;
  double scale = 1.0;
  MapView(const Box& b) : box(b) {
    const double span = std::max({b.x1 - b.x0, b.y1 - b.y0, 1e-6});
    scale = (kPanel - 2 * kPad) / span;
  }
  double px(double x) const { return kPad + (x - box.x0) * scale; }
  double py(double y) const { return kPanel - kPad - (y - box.y0) * scale; }
};

// Blue (slow) to red (fast).
std::string speed_color(double v, double vmax) {
  const double f = vmax > 0 ? std::clamp(v / vmax, 0.0, 1.0) : 0.0;
  std::ostringstream s;
  s << "rgb(" << static_cast<int>(255 * f) << ",60," << static_cast<int>(255 * (1 - f)) << ")";
  return s.str();
}

void polyline(std::ostringstream& out, const std::vector<std::pair<double, double>>& pts,
              const std::string& style) {
  out << "<polyline fill=\"none\" " << style << " points=\"";
  for (const auto& [x, y] : pts) out << x << ',' << y << ' ';
  out << "\"/>\n";
}

std::string render(const track::Track* track, const std::vector<env::TrajectoryRecord>& log) {
  Box box;
  std::vector<Vec2> left, right;
  if (track) {
    const auto cl = track->centerline();
    const auto wl = track->half_width_left();
    const auto wr = track->half_width_right();
    for (std::size_t i = 0; i < cl.size(); ++i) {
      const double h = track->sample(track->cum_s()[i]).heading;
      const Vec2 n{-std::sin(h), std::cos(h)};
      left.push_back(cl[i] + n * wl[i]);
      right.push_back(cl[i] - n * wr[i]);
      box.add(left.back().x, left.back().y);
      box.add(right.back().x, right.back().y);
    }
  }
  double vmax = 0.0, tmax = 0.0;
  for (const auto& r : log) {
    box.add(r.x, r.y);
    vmax = std::max(vmax, r.v);
    tmax = std::max(tmax, r.t);
  }
  if (box.empty()) box.add(0, 0);
  const MapView view(box);

  std::ostringstream out;
  out.precision(5);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * kPanel << "\" height=\"" << kPanel
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  auto edge = [&](const std::vector<Vec2>& pts) {
    std::vector<std::pair<double, double>> p;
    for (const auto& q : pts) p.emplace_back(view.px(q.x), view.py(q.y));
    if (track && track->closed() && !p.empty()) p.push_back(p.front());
    polyline(out, p, "stroke=\"#888\" stroke-width=\"1\"");
  };
  if (track) {
    edge(left);
    edge(right);
    for (const auto& o : track->obstacles()) {
      out << "<circle cx=\"" << view.px(o.center.x) << "\" cy=\"" << view.py(o.center.y) << "\" r=\""
          << o.radius * view.scale << "\" fill=\"#444\"/>\n";
    }
  }
  // driven line, one segment per step so the color tracks speed
  for (std::size_t i = 1; i < log.size(); ++i) {
    const auto& a = log[i - 1];
    const auto& b = log[i];
    if (std::hypot(b.x - a.x, b.y - a.y) > 5.0) continue;  // respawn jump
    out << "<line x1=\"" << view.px(a.x) << "\" y1=\"" << view.py(a.y) << "\" x2=\"" << view.px(b.x)
        << "\" y2=\"" << view.py(b.y) << "\" stroke=\"" << speed_color(b.v, vmax)
        << "\" stroke-width=\"2\"/>\n";
  }
  for (const auto& r : log) {
    if (!r.infraction) continue;
    out << "<circle cx=\"" << view.px(r.x) << "\" cy=\"" << view.py(r.y)
        << "\" r=\"5\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"><title>"
        << metrics::to_string(*r.infraction) << " at t=" << r.t << "</title></circle>\n";
  }
  out << "<text x=\"" << kPad << "\" y=\"18\">trajectory (blue slow, red " << vmax * 3.6
      << " km/h)</text>\n";

  // speed panel
  const double x0 = kPanel + kPad, x1 = 2 * kPanel - kPad;
  const double y0 = kPanel - kPad, y1 = kPad;
  const double vtop = std::max(vmax, 1.0) * 3.6;
  const double tspan = std::max(tmax, 1e-6);
  out << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << x1 - x0 << "\" height=\"" << y0 - y1
      << "\" fill=\"none\" stroke=\"#888\"/>\n";
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : log) {
    pts.emplace_back(x0 + (r.t / tspan) * (x1 - x0), y0 - (r.v * 3.6 / vtop) * (y0 - y1));
  }
  polyline(out, pts, "stroke=\"#c03\" stroke-width=\"1.2\"");
  out << "<text x=\"" << x0 << "\" y=\"18\">speed (km/h, max " << vtop << ") vs time (s, " << tmax
      << ")</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace

std::string lap_svg(const track::Track& track, const std::vector<env::TrajectoryRecord>& log) {
  return render(&track, log);
}

std::string lap_svg(const std::vector<env::TrajectoryRecord>& log) { return render(nullptr, log); }

void write_svg(const std::string& svg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << svg;
}

}  // namespace race::plot
