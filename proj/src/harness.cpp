#include <thread>

#include "race/agents.hpp"
#include "race/harness.hpp"

namespace race::harness {

protocol::EnvFactory env_factory(const track::Track& track, const StageOptions& options) {
  return [track, options](protocol::Mode mode, const std::vector<std::string>& cameras) {
    env::EnvConfig c;
    c.track = track;
    c.dt = options.dt;
    c.n_segments = options.n_segments;
    c.mode = mode == protocol::Mode::practice ? env::ObservationMode::privileged
                                              : env::ObservationMode::camera_only;
    c.cameras = cameras;
    c.watchdog = options.watchdog;
    c.max_episode_time = options.max_episode_time;
    c.vehicle = options.vehicle;
    c.record_trajectory = options.trajectory != nullptr && mode == protocol::Mode::evaluate;
    return env::Env(std::move(c));
  };
}

namespace {

protocol::StepObserver trajectory_sink(const StageOptions& options) {
  if (!options.trajectory) return {};
  auto* sink = options.trajectory;
  return [sink](const env::Env& e, const env::StepOutcome& out, vehicle::Action) {
    if (out.done) sink->insert(sink->end(), e.trajectory().begin(), e.trajectory().end());
  };
}

protocol::SessionConfig session_config(protocol::Mode mode, const track::Track& track,
                                       const StageOptions& options) {
  protocol::SessionConfig s;
  s.mode = mode;
  s.track_id = track.id();
  s.episodes = options.runs;
  s.practice_budget = options.practice_budget;
  s.wall_clock_budget = options.wall_clock_budget;
  s.action_timeout = options.action_timeout;
  return s;
}

void fill_from_evaluation(SubmissionResult& r, const protocol::SessionOutcome& eval, int runs) {
  r.cameras = eval.cameras;
  r.camera_config = camera_config_of(eval.cameras);
  r.runs = eval.results;
  if (!eval.results.empty()) r.report = metrics::aggregate(eval.results);
  if (eval.aborted || static_cast<int>(eval.results.size()) != runs) {
    r.valid = false;
    r.note = eval.aborted ? eval.abort_reason : "incomplete evaluation";
  }
}

}  // namespace

SubmissionResult run_stage1(protocol::MessageChannel& channel, const track::Track& track,
                            const StageOptions& options) {
  if (options.runs < 1) throw HarnessError("runs must be at least 1");
  SubmissionResult r;
  r.participant = options.participant;
  r.stage = 1;
  r.track = track.id();
  const auto eval = protocol::serve(env_factory(track, options), channel,
                                    session_config(protocol::Mode::evaluate, track, options), {},
                                    trajectory_sink(options));
  fill_from_evaluation(r, eval, options.runs);
  return r;
}

SubmissionResult run_stage2(protocol::MessageChannel& channel, const track::Track& track,
                            const StageOptions& options) {
  if (options.runs < 1) throw HarnessError("runs must be at least 1");
  if (options.training_tracks.count(track.id())) {
    throw HarnessError("stage 2 needs an unseen track; '" + track.id() + "' is a training track");
  }
  SubmissionResult r;
  r.participant = options.participant;
  r.stage = 2;
  r.track = track.id();
  const auto factory = env_factory(track, options);

  protocol::SessionState state;
  int practice_nsi = 0;
  if (options.practice_budget > 0.0) {
    auto cfg = session_config(protocol::Mode::practice, track, options);
    cfg.send_shutdown = false;
    const auto practice = protocol::serve(factory, channel, cfg, state);
    for (const auto& e : practice.results) practice_nsi += metrics::nsi(e);
    if (practice.aborted) {
      r.valid = false;
      r.note = "practice: " + practice.abort_reason;
      r.practice_nsi = practice_nsi;
      r.report.nsi = practice_nsi;
      r.cameras = practice.cameras;
      r.camera_config = camera_config_of(practice.cameras);
      return r;
    }
    state = practice.state;
  }
  const auto eval = protocol::serve(factory, channel,
                                    session_config(protocol::Mode::evaluate, track, options), state,
                                    trajectory_sink(options));
  fill_from_evaluation(r, eval, options.runs);
  // the stage 2 board charges practice infractions only
  r.practice_nsi = practice_nsi;
  r.report.nsi = practice_nsi;
  return r;
}

namespace {

template <typename Run>
SubmissionResult run_with_endpoint(const std::string& endpoint, const StageOptions& options,
                                   Run run) {
  const protocol::Endpoint ep = protocol::parse_endpoint(endpoint);
  StageOptions opts = options;
  if (ep.kind == protocol::Endpoint::Kind::builtin) {
    if (opts.participant.empty()) opts.participant = ep.name;
    auto agent = agents::make_builtin_agent(ep.name, opts.seed);
    auto [server, client] = protocol::make_channel_pair();
    protocol::ClientOutcome client_out;
    std::thread worker([&, ch = client.get()] { client_out = protocol::run_client(*ch, *agent); });
    SubmissionResult r;
    try {
      r = run(*server, opts);
    } catch (...) {
      server->close();
      worker.join();
      throw;
    }
    server->close();
    worker.join();
    return r;
  }
  if (ep.kind == protocol::Endpoint::Kind::tcp) {
    if (opts.participant.empty()) opts.participant = endpoint;
    auto channel = protocol::accept_tcp(ep.name, ep.port, opts.connect_timeout);
    SubmissionResult r = run(*channel, opts);
    channel->close();
    return r;
  }
  throw HarnessError("agent endpoint must be builtin:<name> or tcp://host:port");
}

}  // namespace

SubmissionResult run_stage1(const std::string& agent_endpoint, const track::Track& track,
                            const StageOptions& options) {
  return run_with_endpoint(agent_endpoint, options,
                           [&](protocol::MessageChannel& ch, const StageOptions& o) {
                             return run_stage1(ch, track, o);
                           });
}

SubmissionResult run_stage2(const std::string& agent_endpoint, const track::Track& track,
                            const StageOptions& options) {
  return run_with_endpoint(agent_endpoint, options,
                           [&](protocol::MessageChannel& ch, const StageOptions& o) {
                             return run_stage2(ch, track, o);
                           });
}

}  // namespace race::harness
