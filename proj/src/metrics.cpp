#include "race/metrics.hpp"

#include <cmath>

namespace race::metrics {

std::string to_string(InfractionKind kind) {
  switch (kind) {
    case InfractionKind::off_track: return "off_track";
    case InfractionKind::collision: return "collision";
    case InfractionKind::no_progress: return "no_progress";
  }
  return "unknown";
}

InfractionKind parse_infraction_kind(const std::string& name) {
  if (name == "off_track") return InfractionKind::off_track;
  if (name == "collision") return InfractionKind::collision;
  if (name == "no_progress") return InfractionKind::no_progress;
  throw MetricsError("unknown infraction kind: " + name);
}

double success_rate(const EpisodeResult& r) {
  if (r.total_segments <= 0) throw MetricsError("total_segments must be positive");
  return static_cast<double>(r.completed_segments) / r.total_segments;
}

double aats(const EpisodeResult& r) {
  if (!(r.total_time > 0.0)) throw MetricsError("total_time must be positive");
  return r.total_distance / r.total_time * 3.6;
}

int nsi(const EpisodeResult& r) { return static_cast<int>(r.infractions.size()); }

double episode_duration(const EpisodeResult& r) { return r.total_time; }

double trapezoid_mean_speed_kph(std::span<const SpeedSample> trace) {
  if (trace.size() < 2) throw MetricsError("speed trace needs two samples");
  double area = 0.0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    area += 0.5 * (trace[i].v + trace[i - 1].v) * (trace[i].t - trace[i - 1].t);
  }
  const double span = trace.back().t - trace.front().t;
  if (!(span > 0.0)) throw MetricsError("speed trace spans no time");
  return area / span * 3.6;
}

MetricsReport report(const EpisodeResult& r) {
  MetricsReport m;
  m.sr = success_rate(r);
  m.aats_kph = r.total_time > 0.0 ? aats(r) : 0.0;
  m.nsi = nsi(r);
  m.ed_s = episode_duration(r);
  m.runs = 1;
  return m;
}

MetricsReport aggregate(std::span<const EpisodeResult> results) {
  if (results.empty()) throw MetricsError("cannot aggregate an empty run list");
  MetricsReport m;
  m.runs = static_cast<int>(results.size());
  m.sr = m.aats_kph = m.nsi = m.ed_s = 0.0;
  for (const auto& r : results) {
    if (r.total_segments != results.front().total_segments) {
      throw MetricsError("runs disagree on total_segments");
    }
    const MetricsReport one = report(r);
    m.sr += one.sr;
    m.aats_kph += one.aats_kph;
    m.nsi += one.nsi;
    m.ed_s += one.ed_s;
  }
  const double n = static_cast<double>(results.size());
  m.sr /= n;
  m.aats_kph /= n;
  m.nsi /= n;
  m.ed_s /= n;
  return m;
}

void Tracker::begin(int total_segments, double t0, double v0) {
  if (total_segments <= 0) throw MetricsError("total_segments must be positive");
  result_ = EpisodeResult{};
  result_.total_segments = total_segments;
  result_.speed_trace.push_back({t0, v0});
  last_t_ = t0;
  open_ = true;
}

void Tracker::record_step(const vehicle::VehicleState& state, double ds, double dt,
                          const StepEvents& events) {
  if (!open_) throw MetricsError("record_step on a closed episode");
  if (!(state.time > last_t_)) throw MetricsError("step time is not increasing");
  for (const auto& k : events.knots) {
    if (k.t > last_t_ && k.t < state.time) result_.speed_trace.push_back({k.t, k.v});
  }
  result_.speed_trace.push_back({state.time, state.speed});
  if (events.respawned) result_.speed_trace.push_back({state.time, 0.0});
  last_t_ = state.time;
  result_.total_distance += ds;
  result_.total_time += dt;
  result_.completed_segments += events.segments_completed;
  result_.infractions.insert(result_.infractions.end(), events.infractions.begin(),
                             events.infractions.end());
  if (result_.completed_segments + nsi(result_) > result_.total_segments) {
    throw MetricsError("more segments resolved than exist");
  }
}

void Tracker::close() {
  if (!open_) throw MetricsError("episode already closed");
  open_ = false;
}

void to_json(nlohmann::json& j, const Infraction& v) {
  j = {{"kind", to_string(v.kind)}, {"s", v.s}, {"t", v.t}, {"segment", v.segment}};
}
void from_json(const nlohmann::json& j, Infraction& v) {
  v.kind = parse_infraction_kind(j.at("kind").get<std::string>());
  v.s = j.at("s").get<double>();
  v.t = j.at("t").get<double>();
  v.segment = j.at("segment").get<int>();
}

void to_json(nlohmann::json& j, const SpeedSample& v) { j = nlohmann::json::array({v.t, v.v}); }
void from_json(const nlohmann::json& j, SpeedSample& v) {
  v.t = j.at(0).get<double>();
  v.v = j.at(1).get<double>();
}

void to_json(nlohmann::json& j, const EpisodeResult& v) {
  j = {{"completed_segments", v.completed_segments},
       {"total_segments", v.total_segments},
       {"infractions", v.infractions},
       {"total_distance", v.total_distance},
       {"total_time", v.total_time},
       {"speed_trace", v.speed_trace}};
}
void from_json(const nlohmann::json& j, EpisodeResult& v) {
  v.completed_segments = j.at("completed_segments").get<int>();
  v.total_segments = j.at("total_segments").get<int>();
  v.infractions = j.at("infractions").get<std::vector<Infraction>>();
  v.total_distance = j.at("total_distance").get<double>();
  v.total_time = j.at("total_time").get<double>();
  v.speed_trace = j.value("speed_trace", std::vector<SpeedSample>{});
}

void to_json(nlohmann::json& j, const MetricsReport& v) {
  j = {{"sr", v.sr}, {"aats_kph", v.aats_kph}, {"nsi", v.nsi}, {"ed_s", v.ed_s}, {"runs", v.runs}};
}
void from_json(const nlohmann::json& j, MetricsReport& v) {
  v.sr = j.at("sr").get<double>();
  v.aats_kph = j.at("aats_kph").get<double>();
  v.nsi = j.at("nsi").get<double>();
  v.ed_s = j.at("ed_s").get<double>();
  v.runs = j.value("runs", 1);
}

}  // namespace race::metrics
