#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <random>
#include <thread>

#include "doctest.h"
#include "race/agents.hpp"
#include "race/protocol.hpp"

using namespace race;
using namespace race::protocol;
using namespace std::chrono_literals;

namespace {

EnvFactory short_episodes(double max_time = 1.0) {
  track::GeneratorSpec spec;
  spec.radius = 50.0;
  const track::Track t = track::generate_track(spec, 7);
  return [t, max_time](Mode, const std::vector<std::string>& cameras) {
    env::EnvConfig cfg;
    cfg.track = t;
    cfg.cameras = cameras;
    cfg.max_episode_time = max_time;
    cfg.mode = env::ObservationMode::privileged;  // serve strips it in evaluate mode
    return env::Env(cfg);
  };
}

camera::Raster random_raster(std::mt19937_64& rng, int w, int h) {
  camera::Raster r(w, h);
  for (auto& c : r.cells) c = static_cast<std::uint8_t>(rng() & 1u);
  return r;
}

Message random_message(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  switch (rng() % 8) {
    case 0: return Hello{1, rng() % 2 ? Mode::practice : Mode::evaluate, "track-" + std::to_string(rng() % 100)};
    case 1: return Declare{{"front", "right"}};
    case 2: {
      Obs o;
      o.episode = static_cast<int>(rng() % 5);
      o.step = static_cast<long>(rng() % 100000);
      o.observation.speed = std::abs(u(rng)) / 7.0;
      o.observation.cameras["front"] = random_raster(rng, 64, 64);
      if (rng() % 2) {
        env::Privileged p;
        p.position = {u(rng), u(rng)};
        p.heading = u(rng) / 300.0;
        p.frame = {std::abs(u(rng)), u(rng) / 100.0};
        p.mask = random_raster(rng, 8, 5);
        o.observation.privileged = p;
      }
      return o;
    }
    case 3: return ActionMsg{u(rng) / 1e3, u(rng) / 1e3};
    case 4: return EpisodeEnd{0.1 * static_cast<double>(rng() % 11), std::abs(u(rng)) / 3.0,
                              static_cast<int>(rng() % 10), std::abs(u(rng))};
    case 5: return RunEnd{{{"sr", 0.5}, {"nsi", 2}, {"nested", {{"k", u(rng)}}}}};
    case 6: return Shutdown{};
    default: return Error{"stalled", "detail " + std::to_string(rng())};
  }
}

void expect_decode_error(const std::string& line, const std::string& code, const std::string& field) {
  try {
    decode_message(line);
    FAIL("decoded " << line);
  } catch (const DecodeError& e) {
    CHECK(e.code() == code);
    CHECK(e.field() == field);
  }
}

// Drives the client end by hand: answers hello with `first`, then hands each
// later message to `on_message` until shutdown.
std::vector<Message> manual_client(MessageChannel& ch, const Message& first,
                                   const std::function<void(const Message&)>& on_message = {}) {
  std::vector<Message> seen;
  while (true) {
    auto m = ch.receive(5s);
    REQUIRE(m.has_value());
    seen.push_back(*m);
    if (std::holds_alternative<Hello>(*m)) {
      ch.send(first);
    } else if (std::holds_alternative<Shutdown>(*m)) {
      return seen;
    } else if (on_message) {
      on_message(*m);
    }
  }
}

}  // namespace

TEST_CASE("codec: fixed round trips") {
  const std::string line = encode_message(ActionMsg{0.5, -1.0});
  CHECK(nlohmann::json::parse(line) ==
        nlohmann::json{{"type", "action"}, {"steering", 0.5}, {"acceleration", -1.0}});
  CHECK(std::get<ActionMsg>(decode_message(line)) == ActionMsg{0.5, -1.0});
  CHECK(line.find('\n') == std::string::npos);

  std::mt19937_64 rng(5);
  Obs o;
  o.observation.speed = 12.345678901234;
  o.observation.cameras["front"] = random_raster(rng, 64, 64);
  const Obs back = std::get<Obs>(decode_message(encode_message(o)));
  CHECK(back == o);
  CHECK(back.observation.cameras.at("front").width == 64);
  CHECK(back.observation.cameras.at("front").height == 64);
  CHECK_FALSE(back.observation.privileged.has_value());
}

TEST_CASE("codec: random messages survive the round trip exactly") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const Message m = random_message(rng);
    const Message back = decode_message(encode_message(m));
    REQUIRE(back == m);
    REQUIRE(type_name(back) == type_name(m));
  }
  // at least nine significant digits on reals
  const double v = 0.123456789123;
  const auto a = std::get<ActionMsg>(decode_message(encode_message(ActionMsg{v, -v})));
  CHECK(std::abs(a.steering - v) / v < 1e-9);
}

TEST_CASE("codec: decode errors") {
  expect_decode_error(R"({"type":"acton","steering":0,"acceleration":0})", "unknown_type", "type");
  expect_decode_error(R"({"type":"action","steering":0})", "missing_field", "acceleration");
  expect_decode_error(R"({"type":"action","steering":"left","acceleration":0})", "wrong_type", "steering");
  expect_decode_error(R"({"steering":0})", "missing_field", "type");
  expect_decode_error("{not json", "malformed", "");
  expect_decode_error("[1,2]", "malformed", "");
  expect_decode_error(R"({"type":"hello","protocol":1,"mode":"race","track":"x"})", "wrong_type", "mode");
  expect_decode_error(R"({"type":"obs","episode":0,"step":0,"speed":1,"cameras":{"front":[[0,2]]},"privileged":null})",
                      "wrong_type", "cameras.front");
  expect_decode_error(R"({"type":"episode_end","result":{"sr":1,"aats_kph":2,"nsi":0.5,"ed_s":1}})",
                      "wrong_type", "result.nsi");
}

TEST_CASE("session transitions") {
  SessionState s;
  CHECK(s.phase == Phase::idle);
  Message hello = Hello{};
  s = validate_transition(s, hello);
  CHECK(s.phase == Phase::awaiting_declare);
  Message declare = Declare{{"front"}};
  s = validate_transition(s, declare);
  CHECK(s.phase == Phase::idle);
  Message obs = Obs{};
  s = validate_transition(s, obs);
  CHECK(s.phase == Phase::awaiting_action);
  Message act = ActionMsg{1.5, 0.0};
  s = validate_transition(s, act);
  CHECK(s.phase == Phase::idle);
  CHECK(std::get<ActionMsg>(act).steering == 1.0);
  CHECK(s.clamp_warnings == 1);

  Message second = ActionMsg{0.0, 0.0};
  try {
    validate_transition(s, second);
    FAIL("two actions accepted");
  } catch (const ProtocolViolation& e) {
    CHECK(e.expected() == "obs");
  }

  Message early = ActionMsg{};
  CHECK_THROWS_AS(validate_transition(SessionState{}, early), ProtocolViolation);
  SessionState fresh;
  CHECK_THROWS_AS(validate_transition(fresh, obs), ProtocolViolation);  // obs before declare

  SessionState waiting = validate_transition(SessionState{}, hello);
  Message bad = Declare{{"front", "front"}};
  CHECK_THROWS_AS(validate_transition(waiting, bad), ProtocolViolation);
  Message unknown = Declare{{"rear"}};
  CHECK_THROWS_AS(validate_transition(waiting, unknown), ProtocolViolation);
  Message nan = ActionMsg{std::nan(""), 0.0};
  CHECK_THROWS_AS(validate_transition(s = validate_transition(s, obs), nan), ProtocolViolation);

  Message bye = Shutdown{};
  SessionState closed = validate_transition(SessionState{}, bye);
  CHECK(closed.phase == Phase::closed);
  CHECK_THROWS_AS(validate_transition(closed, hello), ProtocolViolation);
}

TEST_CASE("serve: action instead of declare aborts with error then shutdown") {
  auto [server_end, client_end] = make_channel_pair(true);
  SessionOutcome out;
  std::thread server([&, &ch = *server_end] { out = serve(short_episodes(), ch, SessionConfig{}); });
  const auto seen = manual_client(*client_end, ActionMsg{0.0, 1.0});
  server.join();
  CHECK(out.aborted);
  CHECK(out.state.phase == Phase::closed);
  REQUIRE(seen.size() == 3);
  CHECK(std::holds_alternative<Hello>(seen[0]));
  REQUIRE(std::holds_alternative<Error>(seen[1]));
  CHECK(std::get<Error>(seen[1]).code == "protocol_violation");
  CHECK(std::holds_alternative<Shutdown>(seen[2]));
  CHECK(out.results.empty());
}

TEST_CASE("serve: compliant builtin client finishes cleanly") {
  auto [server_end, client_end] = make_channel_pair(true);
  SessionConfig cfg;
  cfg.episodes = 1;
  SessionOutcome out;
  std::thread server([&, &ch = *server_end] { out = serve(short_episodes(2.0), ch, cfg); });
  auto agent = agents::make_builtin_agent("pure_pursuit");
  const ClientOutcome client = run_client(*client_end, *agent, 10s);
  server.join();
  CHECK_FALSE(out.aborted);
  CHECK(client.clean_shutdown);
  CHECK_FALSE(client.error.has_value());
  REQUIRE(out.results.size() == 1);
  REQUIRE(client.episodes.size() == 1);
  CHECK(client.episodes[0] == episode_summary(out.results[0]));
  CHECK(out.steps == out.actions);
  CHECK(client.actions == out.actions);
  CHECK(out.stalls == 0);
  CHECK(out.steps == 40);
  REQUIRE(client.run_reports.size() == 1);
  CHECK(client.run_reports[0]["episodes"] == 1);
}

TEST_CASE("serve: evaluate mode never sends privileged data") {
  auto [server_end, client_end] = make_channel_pair(true);
  SessionConfig cfg;
  cfg.episodes = 2;
  SessionOutcome out;
  std::thread server([&, &ch = *server_end] { out = serve(short_episodes(), ch, cfg); });
  int obs = 0;
  MessageChannel& client = *client_end;
  manual_client(client, Declare{{"front", "left"}}, [&](const Message& m) {
    if (auto* o = std::get_if<Obs>(&m)) {
      ++obs;
      CHECK_FALSE(o->observation.privileged.has_value());
      CHECK(o->observation.cameras.size() == 2);
      client.send(ActionMsg{0.0, 0.5});
    }
  });
  server.join();
  CHECK_FALSE(out.aborted);
  CHECK(obs == 40);
  CHECK(out.steps == out.actions);
  CHECK(out.cameras == std::vector<std::string>{"front", "left"});
}

TEST_CASE("serve: practice mode keeps privileged data and honours the budget") {
  auto [server_end, client_end] = make_channel_pair(true);
  SessionConfig cfg;
  cfg.mode = Mode::practice;
  cfg.practice_budget = 2.5;
  SessionOutcome out;
  std::thread server([&, &ch = *server_end] { out = serve(short_episodes(), ch, cfg); });
  MessageChannel& client = *client_end;
  manual_client(client, Declare{{"front"}}, [&](const Message& m) {
    if (auto* o = std::get_if<Obs>(&m)) {
      CHECK(o->observation.privileged.has_value());
      client.send(ActionMsg{0.0, 0.5});
    }
  });
  server.join();
  CHECK_FALSE(out.aborted);
  CHECK(out.simulated_time == doctest::Approx(2.5));
  CHECK(out.results.size() == 3);  // two full episodes and a partial one
}

TEST_CASE("serve: stalls substitute a zero action, ten in a row abort") {
  SUBCASE("three stalls then prompt replies") {
    auto [server_end, client_end] = make_channel_pair(true);
    SessionConfig cfg;
    cfg.episodes = 1;
    cfg.action_timeout = 20ms;
    SessionOutcome out;
    std::thread server([&, &ch = *server_end] { out = serve(short_episodes(), ch, cfg); });
    MessageChannel& client = *client_end;
    int seen = 0;
    manual_client(client, Declare{{"front"}}, [&](const Message& m) {
      if (std::holds_alternative<Obs>(m) && ++seen > 3) client.send(ActionMsg{0.0, 0.0});
    });
    server.join();
    CHECK_FALSE(out.aborted);
    CHECK(out.stalls == 3);
    CHECK(out.steps == 20);
    CHECK(out.actions == 17);
  }
  SUBCASE("silent client") {
    auto [server_end, client_end] = make_channel_pair(true);
    SessionConfig cfg;
    cfg.action_timeout = 10ms;
    SessionOutcome out;
    std::thread server([&, &ch = *server_end] { out = serve(short_episodes(), ch, cfg); });
    int obs = 0;
    const auto seen = manual_client(*client_end, Declare{{"front"}}, [&](const Message& m) {
      if (std::holds_alternative<Obs>(m)) ++obs;
    });
    server.join();
    CHECK(out.aborted);
    CHECK(out.stalls == 10);
    CHECK(obs == 10);
    REQUIRE(seen.size() >= 2);
    REQUIRE(std::holds_alternative<Error>(seen[seen.size() - 2]));
    CHECK(std::get<Error>(seen[seen.size() - 2]).code == "stalled");
  }
}

TEST_CASE("serve: chained sessions share one connection") {
  auto [server_end, client_end] = make_channel_pair(true);
  SessionConfig first;
  first.mode = Mode::practice;
  first.practice_budget = 1.0;
  first.send_shutdown = false;
  SessionConfig second;
  second.episodes = 1;
  SessionOutcome a, b;
  std::thread server([&, &ch = *server_end] {
    a = serve(short_episodes(), ch, first);
    b = serve(short_episodes(), ch, second, a.state);
  });
  auto agent = agents::make_builtin_agent("straight");
  const ClientOutcome client = run_client(*client_end, *agent, 10s);
  server.join();
  CHECK_FALSE(a.aborted);
  CHECK_FALSE(b.aborted);
  CHECK(client.clean_shutdown);
  CHECK(client.run_reports.size() == 2);
  CHECK(client.episodes.size() == a.results.size() + b.results.size());
}

TEST_CASE("transports: fd channel over a socketpair") {
  int sv[2];
  REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, sv) == 0);
  auto left = make_fd_channel(sv[0], sv[0], true);
  auto right = make_fd_channel(sv[1], sv[1], true);
  std::mt19937_64 rng(21);
  std::vector<Message> sent;
  for (int i = 0; i < 50; ++i) sent.push_back(random_message(rng));
  std::thread writer([&] {
    for (const auto& m : sent) left->send(m);
  });
  for (const auto& m : sent) {
    auto got = right->receive(5s);
    REQUIRE(got.has_value());
    REQUIRE(*got == m);
  }
  writer.join();
  CHECK_FALSE(right->receive(10ms).has_value());
  left->close();
  CHECK_THROWS_AS(right->receive(1s), TransportError);
}

TEST_CASE("transports: malformed line on a pipe") {
  int p[2];
  REQUIRE(::pipe(p) == 0);
  auto reader = make_fd_channel(p[0], -1, true);
  const std::string junk = "garbage\n{\"type\":\"shutdown\"}\n";
  REQUIRE(::write(p[1], junk.data(), junk.size()) == static_cast<ssize_t>(junk.size()));
  CHECK_THROWS_AS(reader->receive(1s), DecodeError);
  auto next = reader->receive(1s);
  REQUIRE(next.has_value());
  CHECK(std::holds_alternative<Shutdown>(*next));
  ::close(p[1]);
}

TEST_CASE("transports: TCP session end to end") {
  std::mt19937_64 rng(std::random_device{}());
  const int port = 20000 + static_cast<int>(rng() % 20000);
  SessionConfig cfg;
  cfg.episodes = 1;
  SessionOutcome out;
  std::thread server([&] {
    auto ch = accept_tcp("127.0.0.1", port, 5s);
    out = serve(short_episodes(), *ch, cfg);
  });
  auto ch = connect_tcp("127.0.0.1", port, 5s);
  auto agent = agents::make_builtin_agent("idle");
  const ClientOutcome client = run_client(*ch, *agent, 10s);
  server.join();
  CHECK_FALSE(out.aborted);
  CHECK(client.clean_shutdown);
  CHECK(out.actions == 20);
}

TEST_CASE("parse_endpoint") {
  const Endpoint b = parse_endpoint("builtin:mpc");
  CHECK(b.kind == Endpoint::Kind::builtin);
  CHECK(b.name == "mpc");
  const Endpoint t = parse_endpoint("tcp://localhost:7011");
  CHECK(t.kind == Endpoint::Kind::tcp);
  CHECK(t.name == "localhost");
  CHECK(t.port == 7011);
  CHECK(parse_endpoint("stdio").kind == Endpoint::Kind::stdio);
  CHECK_THROWS_AS(parse_endpoint("tcp://host"), std::invalid_argument);
  CHECK_THROWS_AS(parse_endpoint("tcp://host:99999"), std::invalid_argument);
  CHECK_THROWS_AS(parse_endpoint("builtin:"), std::invalid_argument);
  CHECK_THROWS_AS(parse_endpoint("udp://x:1"), std::invalid_argument);
}
