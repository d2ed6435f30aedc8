#include <algorithm>
#include <cmath>
#include <set>

#include "race/agents.hpp"
#include "race/protocol.hpp"

namespace race::protocol {

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::awaiting_declare: return "awaiting_declare";
    case Phase::idle: return "idle";
    case Phase::awaiting_action: return "awaiting_action";
    case Phase::closed: return "closed";
  }
  return "unknown";
}

namespace {

std::string expected_in(Phase phase) {
  switch (phase) {
    case Phase::awaiting_declare: return "declare";
    case Phase::awaiting_action: return "action";
    case Phase::idle: return "obs";
    case Phase::closed: return "nothing";
  }
  return "nothing";
}

[[noreturn]] void violation(const SessionState& s, const Message& m) {
  const std::string want = expected_in(s.phase);
  throw ProtocolViolation(want, "unexpected " + type_name(m) + " in phase " + to_string(s.phase) +
                                    "; expected " + want);
}

double clamp_channel(double v, int& warnings) {
  if (v > 1.0) {
    ++warnings;
    return 1.0;
  }
  if (v < -1.0) {
    ++warnings;
    return -1.0;
  }
  return v;
}

}  // namespace

SessionState validate_transition(const SessionState& s, Message& m) {
  SessionState next = s;
  if (s.phase == Phase::closed) violation(s, m);
  if (std::holds_alternative<Shutdown>(m) || std::holds_alternative<Error>(m)) {
    next.phase = Phase::closed;
    return next;
  }
  switch (s.phase) {
    case Phase::awaiting_declare:
      if (auto* d = std::get_if<Declare>(&m)) {
        if (d->cameras.empty()) throw ProtocolViolation("declare", "declare names no cameras");
        std::set<std::string> seen;
        for (const auto& c : d->cameras) {
          if (!camera::is_view_name(c)) throw ProtocolViolation("declare", "unknown camera '" + c + "'");
          if (!seen.insert(c).second) throw ProtocolViolation("declare", "duplicate camera '" + c + "'");
        }
        next.cameras = d->cameras;
        next.phase = Phase::idle;
        return next;
      }
      break;
    case Phase::idle:
      if (auto* h = std::get_if<Hello>(&m)) {
        next.mode = h->mode;
        next.cameras.clear();
        next.phase = Phase::awaiting_declare;
        return next;
      }
      if (std::holds_alternative<Obs>(m)) {
        if (s.cameras.empty()) throw ProtocolViolation("declare", "obs before any declare");
        next.phase = Phase::awaiting_action;
        return next;
      }
      if (std::holds_alternative<EpisodeEnd>(m) || std::holds_alternative<RunEnd>(m)) return next;
      break;
    case Phase::awaiting_action:
      if (auto* a = std::get_if<ActionMsg>(&m)) {
        if (!std::isfinite(a->steering) || !std::isfinite(a->acceleration)) {
          throw ProtocolViolation("action", "action channels must be finite");
        }
        a->steering = clamp_channel(a->steering, next.clamp_warnings);
        a->acceleration = clamp_channel(a->acceleration, next.clamp_warnings);
        next.phase = Phase::idle;
        return next;
      }
      break;
    case Phase::closed:
      break;
  }
  violation(s, m);
}

namespace {

// Sends and applies a server message; a closed or broken channel aborts.
struct ServerLink {
  MessageChannel& channel;
  SessionOutcome& out;

  void send(Message m) {
    out.state = validate_transition(out.state, m);
    channel.send(m);
  }

  void abort(const std::string& code, const std::string& detail) {
    out.aborted = true;
    out.abort_reason = code + ": " + detail;
    if (out.state.phase == Phase::closed) return;
    try {
      channel.send(Error{code, detail});
      channel.send(Shutdown{});
    } catch (const TransportError&) {
    }
    out.state.phase = Phase::closed;
  }
};

}  // namespace

SessionOutcome serve(const EnvFactory& factory, MessageChannel& channel,
                     const SessionConfig& config, SessionState state) {
  return serve(factory, channel, config, std::move(state), StepObserver{});
}

SessionOutcome serve(const EnvFactory& factory, MessageChannel& channel,
                     const SessionConfig& config, SessionState state,
                     const StepObserver& observer) {
  SessionOutcome out;
  out.state = std::move(state);
  ServerLink link{channel, out};
  try {
    link.send(Hello{kProtocolVersion, config.mode, config.track_id});

    auto first = channel.receive(config.declare_timeout);
    if (!first) {
      link.abort("timeout", "no declare received");
      return out;
    }
    out.state = validate_transition(out.state, *first);
    if (out.state.phase == Phase::closed) {
      out.aborted = true;
      out.abort_reason = "client closed the session";
      return out;
    }
    out.cameras = out.state.cameras;

    const bool practice = config.mode == Mode::practice;
    const auto started = std::chrono::steady_clock::now();
    // elapsed practice time in the budget's unit, projected one step ahead
    auto spent = [&](double ahead) {
      if (!config.wall_clock_budget) return out.simulated_time + ahead;
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    };
    int consecutive_stalls = 0;
    for (int episode = 0;; ++episode) {
      if (!practice && episode >= config.episodes) break;
      if (practice && spent(0.0) >= config.practice_budget - 1e-9) break;

      env::Env env = factory(config.mode, out.cameras);
      const double dt = env.config().dt;
      env::Observation obs = env.reset();
      long step = 0;
      while (!env.done()) {
        if (practice && spent(0.5 * dt) > config.practice_budget) break;
        if (!practice) obs.privileged.reset();
        link.send(Obs{episode, step, std::move(obs)});

        vehicle::Action action;
        auto reply = channel.receive(config.action_timeout);
        if (!reply) {
          ++out.stalls;
          if (++consecutive_stalls >= config.max_consecutive_stalls) {
            link.abort("stalled", std::to_string(consecutive_stalls) + " consecutive action timeouts");
            return out;
          }
          out.state.phase = Phase::idle;  // zero action stands in
        } else {
          const int before = out.state.clamp_warnings;
          out.state = validate_transition(out.state, *reply);
          if (out.state.phase == Phase::closed) {
            out.aborted = true;
            out.abort_reason = "client closed the session mid-episode";
            return out;
          }
          out.clamp_warnings += out.state.clamp_warnings - before;
          const auto& a = std::get<ActionMsg>(*reply);
          action = {a.steering, a.acceleration};
          consecutive_stalls = 0;
          ++out.actions;
        }
        const env::StepOutcome stepped = env.step(action);
        if (observer) observer(env, stepped, action);
        obs = stepped.observation;
        ++step;
        ++out.steps;
        out.simulated_time += dt;
      }
      if (step == 0) break;
      out.results.push_back(env.result());
      link.send(episode_summary(env.result()));
    }

    nlohmann::json report = nlohmann::json::object();
    if (!out.results.empty()) report = metrics::aggregate(out.results);
    report["mode"] = to_string(config.mode);
    report["episodes"] = out.results.size();
    int nsi_total = 0;
    for (const auto& r : out.results) nsi_total += metrics::nsi(r);
    report["nsi_total"] = nsi_total;
    report["stalls"] = out.stalls;
    report["clamp_warnings"] = out.clamp_warnings;
    link.send(RunEnd{report});
    if (config.send_shutdown) link.send(Shutdown{});
  } catch (const ProtocolViolation& e) {
    link.abort("protocol_violation", e.what());
  } catch (const DecodeError& e) {
    link.abort(e.code(), e.what());
  } catch (const TransportError& e) {
    out.aborted = true;
    out.abort_reason = std::string("transport: ") + e.what();
    out.state.phase = Phase::closed;
  }
  return out;
}

ClientOutcome run_client(MessageChannel& channel, agents::Agent& agent,
                         std::chrono::milliseconds timeout) {
  ClientOutcome out;
  try {
    while (true) {
      auto msg = channel.receive(timeout);
      if (!msg) {
        out.error = Error{"timeout", "server went quiet"};
        return out;
      }
      if (auto* h = std::get_if<Hello>(&*msg)) {
        if (h->protocol != kProtocolVersion) {
          channel.send(Error{"version_mismatch", "client speaks protocol 1"});
          out.error = Error{"version_mismatch", "server protocol " + std::to_string(h->protocol)};
          return out;
        }
        agent.on_hello(to_string(h->mode), h->track);
        channel.send(Declare{agent.cameras()});
      } else if (auto* o = std::get_if<Obs>(&*msg)) {
        const vehicle::Action a = agent.act(o->observation);
        channel.send(ActionMsg{a.steering, a.acceleration});
        ++out.actions;
      } else if (auto* e = std::get_if<EpisodeEnd>(&*msg)) {
        out.episodes.push_back(*e);
        agent.on_episode_end({e->sr, e->aats_kph, static_cast<double>(e->nsi), e->ed_s, 1});
      } else if (auto* r = std::get_if<RunEnd>(&*msg)) {
        out.run_reports.push_back(r->report);
      } else if (std::holds_alternative<Shutdown>(*msg)) {
        out.clean_shutdown = !out.error;
        return out;
      } else if (auto* err = std::get_if<Error>(&*msg)) {
        out.error = *err;
      } else {
        out.error = Error{"unexpected", "server sent " + type_name(*msg)};
        return out;
      }
    }
  } catch (const TransportError& e) {
    out.error = Error{"transport", e.what()};
  } catch (const DecodeError& e) {
    out.error = Error{e.code(), e.what()};
  }
  return out;
}

}  // namespace race::protocol
