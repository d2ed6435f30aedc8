#include <fstream>
#include <sstream>

#include "race/env.hpp"

namespace race::env {

namespace {
constexpr const char* kHeader = "t,x,y,psi,v,delta,steering,acceleration,segment,infraction";
}

void write_trajectory_csv(const std::vector<TrajectoryRecord>& log,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(10);
  out << kHeader << '\n';
  for (const auto& r : log) {
    out << r.t << ',' << r.x << ',' << r.y << ',' << r.psi << ',' << r.v << ',' << r.delta << ','
        << r.action.steering << ',' << r.action.acceleration << ',' << r.segment << ','
        << (r.infraction ? metrics::to_string(*r.infraction) : "") << '\n';
  }
}

std::vector<TrajectoryRecord> read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw std::runtime_error(path.string() + ": missing trajectory header");
  }
  std::vector<TrajectoryRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 10) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 10 fields");
    }
    TrajectoryRecord r{};
    r.t = std::stod(f[0]);
    r.x = std::stod(f[1]);
    r.y = std::stod(f[2]);
    r.psi = std::stod(f[3]);
    r.v = std::stod(f[4]);
    r.delta = std::stod(f[5]);
    r.action = {std::stod(f[6]), std::stod(f[7])};
    r.segment = std::stoi(f[8]);
    if (!f[9].empty()) r.infraction = metrics::parse_infraction_kind(f[9]);
    out.push_back(r);
  }
  return out;
}

}  // namespace race::env
