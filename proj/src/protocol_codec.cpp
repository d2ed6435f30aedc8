#include <cmath>

#include "race/protocol.hpp"

namespace race::protocol {

using nlohmann::json;

std::string to_string(Mode mode) { return mode == Mode::practice ? "practice" : "evaluate"; }

Mode parse_mode(const std::string& name) {
  if (name == "practice") return Mode::practice;
  if (name == "evaluate") return Mode::evaluate;
  throw std::invalid_argument("unknown mode '" + name + "'");
}

std::string type_name(const Message& m) {
  static const char* names[] = {"hello",       "declare", "obs",      "action",
                                "episode_end", "run_end", "shutdown", "error"};
  return names[m.index()];
}

namespace {

json raster_to_json(const camera::Raster& r) {
  json rows = json::array();
  for (int i = 0; i < r.height; ++i) {
    json row = json::array();
    for (int j = 0; j < r.width; ++j) row.push_back(static_cast<int>(r.at(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

[[noreturn]] void missing(const std::string& field) {
  throw DecodeError("missing_field", field, "missing field '" + field + "'");
}
[[noreturn]] void wrong(const std::string& field, const char* want) {
  throw DecodeError("wrong_type", field, "field '" + field + "' must be " + want);
}

const json& field(const json& j, const std::string& name, const std::string& path) {
  auto it = j.find(name);
  if (it == j.end()) missing(path);
  return *it;
}

double number(const json& j, const std::string& name, const std::string& path) {
  const json& v = field(j, name, path);
  if (!v.is_number()) wrong(path, "a number");
  return v.get<double>();
}

long integer(const json& j, const std::string& name, const std::string& path) {
  const json& v = field(j, name, path);
  if (!v.is_number_integer()) wrong(path, "an integer");
  return v.get<long>();
}

std::string text(const json& j, const std::string& name, const std::string& path) {
  const json& v = field(j, name, path);
  if (!v.is_string()) wrong(path, "a string");
  return v.get<std::string>();
}

camera::Raster raster_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) wrong(path, "a non-empty array of rows");
  const int h = static_cast<int>(j.size());
  if (!j[0].is_array() || j[0].empty()) wrong(path, "a non-empty array of rows");
  const int w = static_cast<int>(j[0].size());
  camera::Raster r(w, h);
  for (int i = 0; i < h; ++i) {
    const json& row = j[i];
    if (!row.is_array() || static_cast<int>(row.size()) != w) wrong(path, "a rectangular grid");
    for (int c = 0; c < w; ++c) {
      const json& v = row[c];
      if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
        wrong(path, "a grid of 0/1 cells");
      }
      r.at(i, c) = static_cast<std::uint8_t>(v.get<int>());
    }
  }
  return r;
}

struct Encoder {
  json operator()(const Hello& m) const {
    return {{"type", "hello"}, {"protocol", m.protocol}, {"mode", to_string(m.mode)}, {"track", m.track}};
  }
  json operator()(const Declare& m) const { return {{"type", "declare"}, {"cameras", m.cameras}}; }
  json operator()(const Obs& m) const {
    json cams = json::object();
    for (const auto& [name, r] : m.observation.cameras) cams[name] = raster_to_json(r);
    json priv = nullptr;
    if (const auto& p = m.observation.privileged) {
      priv = {{"x", p->position.x}, {"y", p->position.y}, {"psi", p->heading},
              {"s", p->frame.s},    {"d", p->frame.d},    {"mask", raster_to_json(p->mask)}};
    }
    return {{"type", "obs"},   {"episode", m.episode}, {"step", m.step},
            {"speed", m.observation.speed}, {"cameras", std::move(cams)}, {"privileged", std::move(priv)}};
  }
  json operator()(const ActionMsg& m) const {
    return {{"type", "action"}, {"steering", m.steering}, {"acceleration", m.acceleration}};
  }
  json operator()(const EpisodeEnd& m) const {
    return {{"type", "episode_end"},
            {"result", {{"sr", m.sr}, {"aats_kph", m.aats_kph}, {"nsi", m.nsi}, {"ed_s", m.ed_s}}}};
  }
  json operator()(const RunEnd& m) const { return {{"type", "run_end"}, {"report", m.report}}; }
  json operator()(const Shutdown&) const { return {{"type", "shutdown"}}; }
  json operator()(const Error& m) const {
    return {{"type", "error"}, {"code", m.code}, {"detail", m.detail}};
  }
};

}  // namespace

std::string encode_message(const Message& m) { return std::visit(Encoder{}, m).dump(); }

Message decode_message(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DecodeError("malformed", "", std::string("malformed line: ") + e.what());
  }
  if (!j.is_object()) throw DecodeError("malformed", "", "message must be an object");
  const std::string type = text(j, "type", "type");

  if (type == "hello") {
    Hello m;
    m.protocol = static_cast<int>(integer(j, "protocol", "protocol"));
    try {
      m.mode = parse_mode(text(j, "mode", "mode"));
    } catch (const std::invalid_argument&) {
      wrong("mode", "\"practice\" or \"evaluate\"");
    }
    m.track = text(j, "track", "track");
    return m;
  }
  if (type == "declare") {
    Declare m;
    const json& cams = field(j, "cameras", "cameras");
    if (!cams.is_array()) wrong("cameras", "an array of view names");
    for (const auto& c : cams) {
      if (!c.is_string()) wrong("cameras", "an array of view names");
      m.cameras.push_back(c.get<std::string>());
    }
    return m;
  }
  if (type == "obs") {
    Obs m;
    m.episode = static_cast<int>(integer(j, "episode", "episode"));
    m.step = integer(j, "step", "step");
    m.observation.speed = number(j, "speed", "speed");
    const json& cams = field(j, "cameras", "cameras");
    if (!cams.is_object()) wrong("cameras", "an object");
    for (auto it = cams.begin(); it != cams.end(); ++it) {
      m.observation.cameras.emplace(it.key(), raster_from_json(it.value(), "cameras." + it.key()));
    }
    const json& priv = field(j, "privileged", "privileged");
    if (!priv.is_null()) {
      if (!priv.is_object()) wrong("privileged", "an object or null");
      env::Privileged p;
      p.position = {number(priv, "x", "privileged.x"), number(priv, "y", "privileged.y")};
      p.heading = number(priv, "psi", "privileged.psi");
      p.frame = {number(priv, "s", "privileged.s"), number(priv, "d", "privileged.d")};
      p.mask = raster_from_json(field(priv, "mask", "privileged.mask"), "privileged.mask");
      m.observation.privileged = std::move(p);
    }
    return m;
  }
  if (type == "action") {
    return ActionMsg{number(j, "steering", "steering"), number(j, "acceleration", "acceleration")};
  }
  if (type == "episode_end") {
    const json& r = field(j, "result", "result");
    if (!r.is_object()) wrong("result", "an object");
    EpisodeEnd m;
    m.sr = number(r, "sr", "result.sr");
    m.aats_kph = number(r, "aats_kph", "result.aats_kph");
    m.nsi = static_cast<int>(integer(r, "nsi", "result.nsi"));
    m.ed_s = number(r, "ed_s", "result.ed_s");
    return m;
  }
  if (type == "run_end") {
    const json& r = field(j, "report", "report");
    if (!r.is_object()) wrong("report", "an object");
    return RunEnd{r};
  }
  if (type == "shutdown") return Shutdown{};
  if (type == "error") return Error{text(j, "code", "code"), text(j, "detail", "detail")};
  throw DecodeError("unknown_type", "type", "unknown message type '" + type + "'");
}

EpisodeEnd episode_summary(const metrics::EpisodeResult& r) {
  const metrics::MetricsReport m = metrics::report(r);
  return {m.sr, m.aats_kph, metrics::nsi(r), m.ed_s};
}

}  // namespace race::protocol
