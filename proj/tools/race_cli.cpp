#include <signal.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "race/agents.hpp"
#include "race/env.hpp"
#include "race/harness.hpp"
#include "race/plot.hpp"
#include "race/protocol.hpp"
#include "race/track.hpp"

using namespace race;

namespace {

constexpr std::uint64_t kDefaultSeed = 7;

// RACE_SEED replaces the built-in default; an explicit --seed still wins.
std::uint64_t default_seed() {
  const char* s = std::getenv("RACE_SEED");
  if (!s || !*s) return kDefaultSeed;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used, 0);
    if (used != std::string(s).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw CLI::ValidationError("RACE_SEED", "must be an unsigned integer, got '" + std::string(s) + "'");
  }
}

bool is_generator_name(const std::string& name) {
  try {
    track::parse_generator_kind(name);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

// A file path, or a generator name built with the session seed.
track::Track load_track_arg(const std::string& arg, std::uint64_t seed) {
  if (is_generator_name(arg)) return track::standin_track(arg, seed);
  return track::load_track(arg);
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

void print_board(const std::vector<harness::LeaderboardEntry>& board, int stage,
                 harness::CameraConfig cameras) {
  std::cout << "stage " << stage << " / " << harness::to_string(cameras) << " camera\n";
  if (board.empty()) {
    std::cout << "  (no entries)\n";
    return;
  }
  std::cout << std::left << std::setw(5) << "rank" << std::setw(28) << "participant" << std::right
            << std::setw(7) << "SR" << std::setw(11) << "AATS km/h" << std::setw(6) << "NSI";
  if (stage == 2) std::cout << std::setw(8) << "score";
  std::cout << std::setw(9) << "entries" << '\n';
  for (const auto& e : board) {
    std::cout << std::left << std::setw(5) << e.rank << std::setw(28) << e.participant << std::right
              << std::setw(7) << fixed(e.sr, 3) << std::setw(11) << fixed(e.aats_kph, 3)
              << std::setw(6) << e.nsi;
    if (stage == 2) std::cout << std::setw(8) << fixed(e.score.value_or(0.0), 4);
    std::cout << std::setw(9) << e.entries;
    // stage 1 gate: top ten advance, reported but not enforced
    if (stage == 1 && e.rank <= 10) std::cout << "  advances";
    std::cout << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  ::signal(SIGPIPE, SIG_IGN);
  CLI::App app{"Desk-scale autonomous racing benchmark"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed_flag;

  // ---- gen-track ----
  auto* gen = app.add_subcommand("gen-track", "Generate a track file");
  std::string gen_spec, gen_out;
  track::GeneratorSpec gspec;
  gen->add_option("--spec", gen_spec, "circle, stadium, thruxton_standin, anglesey_standin, vegas_standin")
      ->required();
  gen->add_option("--seed", seed_flag, "Generator seed");
  gen->add_option("--out", gen_out, "Output track file")->required();
  gen->add_option("--radius", gspec.radius, "Circle radius or stadium turn radius (m)")->capture_default_str();
  gen->add_option("--width", gspec.width, "Road width for circle and stadium (m)")->capture_default_str();
  gen->add_option("--straight", gspec.straight_length, "Stadium straight length (m)")->capture_default_str();
  gen->add_option("--segments", gspec.n_segments, "Number of segments")->capture_default_str();

  // ---- serve ----
  auto* srv = app.add_subcommand("serve", "Host one session for an external agent");
  std::string srv_track, srv_mode = "evaluate", srv_listen;
  int srv_episodes = 3;
  double srv_budget = 3600.0;
  long srv_timeout_ms = 1000;
  srv->add_option("--track", srv_track, "Track file or generator name")->required();
  srv->add_option("--mode", srv_mode, "practice or evaluate")
      ->check(CLI::IsMember({"practice", "evaluate"}))
      ->capture_default_str();
  srv->add_option("--listen", srv_listen, "tcp://host:port or stdio")->required();
  srv->add_option("--episodes", srv_episodes, "Episodes in evaluate mode")->capture_default_str();
  srv->add_option("--practice-budget", srv_budget, "Practice budget (simulated s)")->capture_default_str();
  srv->add_option("--action-timeout", srv_timeout_ms, "Per-step action timeout (ms)")->capture_default_str();
  srv->add_option("--seed", seed_flag, "Seed for generated tracks");

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "Run a stage 1 or stage 2 submission");
  int ev_stage = 1;
  std::string ev_agent, ev_track, ev_store, ev_log;
  harness::StageOptions opts;
  long ev_timeout_ms = 1000;
  ev->add_option("--stage", ev_stage, "1 or 2")->check(CLI::IsMember({1, 2}))->required();
  ev->add_option("--agent", ev_agent, "builtin:<name> or tcp://host:port")->required();
  ev->add_option("--track", ev_track, "Track file or generator name")->required();
  ev->add_option("--practice-budget", opts.practice_budget, "Stage 2 practice budget (s)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  ev->add_flag("--wall-clock", opts.wall_clock_budget, "Measure the practice budget in wall-clock time");
  ev->add_option("--runs", opts.runs, "Evaluation episodes")->check(CLI::PositiveNumber)->capture_default_str();
  ev->add_option("--store", ev_store, "Results store (JSON lines)")->required();
  ev->add_option("--participant", opts.participant, "Name on the leaderboard");
  ev->add_option("--log", ev_log, "Write the evaluation trajectory CSV here");
  ev->add_option("--dt", opts.dt, "Step size (s)")->capture_default_str();
  ev->add_option("--action-timeout", ev_timeout_ms, "Per-step action timeout (ms)")->capture_default_str();
  ev->add_option("--seed", seed_flag, "Seed for built-in agents and generated tracks");

  // ---- leaderboard ----
  auto* lb = app.add_subcommand("leaderboard", "Rank stored submissions");
  int lb_stage = 1;
  std::string lb_cameras = "single", lb_store;
  lb->add_option("--stage", lb_stage, "1 or 2")->check(CLI::IsMember({1, 2}))->required();
  lb->add_option("--cameras", lb_cameras, "single or multi")
      ->check(CLI::IsMember({"single", "multi"}))
      ->capture_default_str();
  lb->add_option("--store", lb_store, "Results store")->required();

  // ---- plot ----
  auto* pl = app.add_subcommand("plot", "Render a trajectory log as SVG");
  std::string pl_log, pl_out, pl_track;
  pl->add_option("--log", pl_log, "Trajectory CSV")->required();
  pl->add_option("--out", pl_out, "Output SVG")->required();
  pl->add_option("--track", pl_track, "Track file or generator name for the ribbon");
  pl->add_option("--seed", seed_flag, "Seed for a generated track");

  CLI11_PARSE(app, argc, argv);

  try {
    const std::uint64_t seed = seed_flag ? *seed_flag : default_seed();

    if (*gen) {
      gspec.kind = track::parse_generator_kind(gen_spec);
      const track::Track t = track::generate_track(gspec, seed);
      track::save_track(t, gen_out);
      std::cout << t.id() << ": " << fixed(t.total_length(), 1) << " m, " << t.n_segments()
                << " segments -> " << gen_out << '\n';
      return 0;
    }

    if (*srv) {
      const track::Track t = load_track_arg(srv_track, seed);
      const protocol::Endpoint ep = protocol::parse_endpoint(srv_listen);
      std::unique_ptr<protocol::MessageChannel> channel;
      if (ep.kind == protocol::Endpoint::Kind::stdio) {
        channel = protocol::make_fd_channel(STDIN_FILENO, STDOUT_FILENO, false);
      } else if (ep.kind == protocol::Endpoint::Kind::tcp) {
        std::cerr << "listening on " << srv_listen << '\n';
        channel = protocol::accept_tcp(ep.name, ep.port, std::chrono::hours(24));
      } else {
        throw std::invalid_argument("--listen takes tcp://host:port or stdio");
      }
      harness::StageOptions so;
      so.runs = srv_episodes;
      so.practice_budget = srv_budget;
      so.action_timeout = std::chrono::milliseconds(srv_timeout_ms);
      protocol::SessionConfig cfg;
      cfg.mode = protocol::parse_mode(srv_mode);
      cfg.track_id = t.id();
      cfg.episodes = srv_episodes;
      cfg.practice_budget = srv_budget;
      cfg.action_timeout = so.action_timeout;
      const auto outcome = protocol::serve(harness::env_factory(t, so), *channel, cfg, {});
      nlohmann::json summary{{"mode", srv_mode},
                             {"track", t.id()},
                             {"episodes", outcome.results},
                             {"steps", outcome.steps},
                             {"stalls", outcome.stalls},
                             {"aborted", outcome.aborted},
                             {"abort_reason", outcome.abort_reason}};
      if (!outcome.results.empty()) summary["report"] = metrics::aggregate(outcome.results);
      // stdout belongs to the protocol in stdio mode
      (ep.kind == protocol::Endpoint::Kind::stdio ? std::cerr : std::cout) << summary.dump() << '\n';
      return outcome.aborted ? 1 : 0;
    }

    if (*ev) {
      const track::Track t = load_track_arg(ev_track, seed);
      opts.seed = seed;
      opts.action_timeout = std::chrono::milliseconds(ev_timeout_ms);
      std::vector<env::TrajectoryRecord> log;
      if (!ev_log.empty()) opts.trajectory = &log;
      const harness::SubmissionResult r =
          ev_stage == 1 ? harness::run_stage1(ev_agent, t, opts) : harness::run_stage2(ev_agent, t, opts);
      harness::ResultsStore(ev_store).append(r);
      if (!ev_log.empty()) env::write_trajectory_csv(log, ev_log);
      std::cout << "stage " << r.stage << " " << r.participant << " on " << r.track << " ("
                << harness::to_string(r.camera_config) << " camera): SR " << fixed(r.report.sr, 3)
                << ", AATS " << fixed(r.report.aats_kph, 3) << " km/h, NSI " << r.report.nsi;
      if (r.practice_nsi) std::cout << " (practice)";
      std::cout << '\n';
      if (!r.valid) {
        std::cerr << "submission invalid: " << r.note << '\n';
        return 1;
      }
      return 0;
    }

    if (*lb) {
      const harness::ResultsStore store(lb_store);
      const auto loaded = store.load();
      for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
      const auto cams = harness::parse_camera_config(lb_cameras);
      print_board(harness::leaderboard(loaded.results, lb_stage, cams), lb_stage, cams);
      return 0;
    }

    if (*pl) {
      const auto log = env::read_trajectory_csv(pl_log);
      const std::string svg = pl_track.empty()
                                  ? plot::lap_svg(log)
                                  : plot::lap_svg(load_track_arg(pl_track, seed), log);
      plot::write_svg(svg, pl_out);
      std::cout << log.size() << " samples -> " << pl_out << '\n';
      return 0;
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
