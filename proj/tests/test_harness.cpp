#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <thread>

#include "doctest.h"
#include "race/harness.hpp"

using namespace race;
using namespace race::harness;

namespace {

SubmissionResult row(const std::string& who, double sr, double aats, double nsi = 0.0, int stage = 1,
                     CameraConfig cams = CameraConfig::single) {
  SubmissionResult r;
  r.participant = who;
  r.stage = stage;
  r.camera_config = cams;
  r.cameras = cams == CameraConfig::single ? std::vector<std::string>{"front"}
                                           : std::vector<std::string>{"front", "left", "right"};
  r.report.sr = sr;
  r.report.aats_kph = aats;
  r.report.nsi = nsi;
  r.report.runs = 3;
  return r;
}

std::vector<SubmissionResult> table1() {
  const std::vector<std::tuple<const char*, double, double>> t{
      {"saleh9292", .5, 117.875},     {"White-Wolf", .7, 53.115},     {"SS", .7, 59.953},
      {"shan_osphere", .7, 60.968},   {"number9473", .7, 64.448},     {"kire", .8, 42.943},
      {"NotSoLate", .9, 32.485},      {"jiangwen_su", .9, 57.615},    {"agnprz", .9, 69.045},
      {"AnimeshSinha1309", .9, 69.045}, {"kobe_bb", .9, 78.910},      {"boliu0", 1, 36.140},
      {"avrl", 1, 63.080},            {"denis9", 1, 72.000},          {"any_name", 1, 80.760},
      {"ling_thoth", 1, 93.940},      {"TCS_Autoscape", 1, 95.960},   {"matthew_howe", 1, 102.010},
      {"UniTeam", 1, 105.350},        {"xLab_UPenn", 1, 115.660},     {"lachlan_mares", 1, 126.350},
      {"Downforce615", 1, 137.940},   {"Werner_Duvaud", 1, 152.090}};
  std::vector<SubmissionResult> out;
  for (const auto& [who, sr, aats] : t) out.push_back(row(who, sr, aats));
  return out;
}

std::vector<SubmissionResult> table2_single() {
  return {row("xLab_UPenn", 0.0, 31.098, 10.333, 2),  row("TCS_Autoscape", 0.1, 4.485, 4.333, 2),
          row("denis9", 0.667, 64.889, 3.667, 2),     row("any_name", 1, 30.44, 0, 2),
          row("Werner_Duvaud", 1, 45.253, 0, 2),      row("UniTeam", 1, 73.187, 0, 2),
          row("matthew_howe", 1, 85.22, 0, 2),        row("lachlan_mares", 1, 92.527, 0, 2)};
}

std::vector<SubmissionResult> table2_multi() {
  const auto m = CameraConfig::multi;
  return {row("UniTeam", 0.667, 62.094, 1, 2, m), row("any_name", 1, 51.373, 0, 2, m),
          row("lachlan_mares", 1, 80.723, 0, 2, m), row("matthew_howe", 1, 84.227, 0, 2, m)};
}

std::vector<std::string> names(const std::vector<LeaderboardEntry>& board) {
  std::vector<std::string> out;
  for (const auto& e : board) out.push_back(e.participant);
  return out;
}

std::vector<std::string> reversed_names(const std::vector<SubmissionResult>& rows) {
  std::vector<std::string> out;
  for (auto it = rows.rbegin(); it != rows.rend(); ++it) out.push_back(it->participant);
  return out;
}

// The stage 2 score written out longhand, independent of the library's helpers.
double score_by_hand(double aats, double nsi, const std::vector<double>& all_aats,
                     std::vector<double> all_nsi) {
  const double best = *std::max_element(all_aats.begin(), all_aats.end());
  std::sort(all_nsi.begin(), all_nsi.end());
  const std::size_t n = all_nsi.size();
  const double med = n % 2 ? all_nsi[n / 2] : (all_nsi[n / 2 - 1] + all_nsi[n / 2]) / 2;
  const double safety = med == 0 ? (nsi == 0 ? 1.0 : -1.0) : std::max(1.0 - nsi / med, -1.0);
  return aats / best + safety;
}

track::Track circle() {
  track::GeneratorSpec spec;
  spec.radius = 50.0;
  return track::generate_track(spec, 7);
}

std::filesystem::path temp_path(const std::string& stem) {
  return std::filesystem::temp_directory_path() /
         (stem + "-" + std::to_string(::getpid()) + "-" + std::to_string(std::random_device{}()));
}

}  // namespace

TEST_CASE("rank_stage1: 23-row single-camera board") {
  auto rows = table1();
  const auto board = rank_stage1(rows);
  REQUIRE(board.size() == 23);
  auto want = reversed_names(rows);
  auto got = names(board);
  // the exact tie may come out either way round
  const auto tie = std::find(got.begin(), got.end(), "agnprz");
  REQUIRE(tie != got.end());
  REQUIRE(tie + 1 != got.end());
  if (*(tie + 1) == "AnimeshSinha1309") std::iter_swap(tie, tie + 1);
  CHECK(got == want);
  for (std::size_t i = 0; i < board.size(); ++i) CHECK(board[i].rank == static_cast<int>(i) + 1);

  // any input order gives the same ranking, modulo the tie
  std::mt19937_64 rng(2);
  for (int k = 0; k < 20; ++k) {
    std::shuffle(rows.begin(), rows.end(), rng);
    auto again = names(rank_stage1(rows));
    auto t = std::find(again.begin(), again.end(), "agnprz");
    if (*(t + 1) == "AnimeshSinha1309") std::iter_swap(t, t + 1);
    CHECK(again == want);
  }
}

TEST_CASE("rank_stage1: stability, single entry, board errors") {
  std::vector<SubmissionResult> same{row("a", 1, 50), row("b", 1, 50), row("c", 1, 50)};
  CHECK(names(rank_stage1(same)) == std::vector<std::string>{"a", "b", "c"});
  std::vector<SubmissionResult> one{row("solo", 0.3, 1)};
  CHECK(rank_stage1(one).front().rank == 1);
  std::vector<SubmissionResult> mixed{row("a", 1, 50), row("b", 1, 50, 0, 2)};
  CHECK_THROWS_AS(rank_stage1(mixed), RankingError);
  std::vector<SubmissionResult> boards{row("a", 1, 50), row("b", 1, 50, 0, 1, CameraConfig::multi)};
  CHECK_THROWS_AS(rank_stage1(boards), RankingError);
  CHECK(rank_stage1(std::vector<SubmissionResult>{}).empty());
}

TEST_CASE("rank_stage2: single- and multi-camera stage 2 boards") {
  const auto single = table2_single();
  CHECK(names(rank_stage2(single)) == reversed_names(single));
  const auto multi = table2_multi();
  const auto board = rank_stage2(multi);
  CHECK(names(board) == reversed_names(multi));
  CHECK(board.front().participant == "matthew_howe");
  CHECK(board.front().score.has_value());
}

TEST_CASE("stage2_score: worked example, clamp and errors") {
  const std::vector<SubmissionResult> cohort{row("p", 1, 80, 2, 2), row("q", 1, 100, 4, 2)};
  CHECK(std::abs(stage2_score(cohort[0], cohort) - (80.0 / 100.0 + (1.0 - 2.0 / 3.0))) < 1e-12);
  CHECK(std::abs(stage2_score(cohort[1], cohort) - (100.0 / 100.0 + (1.0 - 4.0 / 3.0))) < 1e-12);
  CHECK(stage2_score(cohort[0], cohort) == doctest::Approx(1.1333).epsilon(1e-4));
  CHECK(stage2_score(cohort[1], cohort) == doctest::Approx(0.6667).epsilon(1e-4));

  const std::vector<SubmissionResult> at_median{row("a", 1, 100, 3, 2), row("b", 1, 50, 1, 2),
                                                row("c", 1, 50, 5, 2)};
  CHECK(stage2_score(at_median[0], at_median) == doctest::Approx(1.0));

  const std::vector<SubmissionResult> clamp{row("a", 1, 100, 1, 2), row("b", 1, 50, 5, 2),
                                            row("c", 1, 50, 1, 2)};
  CHECK(stage2_score(clamp[1], clamp) == doctest::Approx(0.5 - 1.0));

  const std::vector<SubmissionResult> parked{row("a", 1, 0, 1, 2), row("b", 1, 0, 1, 2)};
  CHECK_THROWS_AS(stage2_score(parked[0], parked), RankingError);
  CHECK_THROWS_AS(stage2_score(parked[0], std::vector<SubmissionResult>{}), RankingError);
}

TEST_CASE("stage2_score: bounds and brute-force rescoring on random cohorts") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<SubmissionResult> cohort;
    std::vector<double> aats, nsi;
    for (int i = 0; i < n; ++i) {
      const double a = 1.0 + 150.0 * u(rng);
      const double s = (rng() % 3 == 0) ? 0.0 : std::round(30.0 * u(rng)) / 3.0;
      cohort.push_back(row("p" + std::to_string(i), std::round(3 * u(rng)) / 3, a, s, 2));
      aats.push_back(a);
      nsi.push_back(s);
    }
    for (int i = 0; i < n; ++i) {
      const double s = stage2_score(cohort[i], cohort);
      REQUIRE(s > -1.0);
      REQUIRE(s <= 2.0);
      REQUIRE(s == doctest::Approx(score_by_hand(aats[i], nsi[i], aats, nsi)).epsilon(1e-12));
    }
    // ranking a ranked list changes nothing
    const auto board = rank_stage2(cohort);
    std::vector<SubmissionResult> ordered;
    for (const auto& e : board) {
      for (const auto& c : cohort) {
        if (c.participant == e.participant) ordered.push_back(c);
      }
    }
    REQUIRE(names(rank_stage2(ordered)) == names(board));
    for (std::size_t i = 1; i < board.size(); ++i) {
      REQUIRE(board[i - 1].sr >= board[i].sr);
      if (board[i - 1].sr == board[i].sr) REQUIRE(*board[i - 1].score >= *board[i].score);
    }
  }
}

TEST_CASE("median") {
  CHECK(median({3.0}) == 3.0);
  CHECK(median({4.0, 1.0, 3.0}) == 3.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK_THROWS_AS(median({}), RankingError);
}

TEST_CASE("ResultsStore: round trip, corruption, boards") {
  const auto path = temp_path("store") += ".jsonl";
  ResultsStore store(path);
  CHECK(store.load().results.empty());

  SubmissionResult a = row("alpha", 1, 80.5);
  metrics::EpisodeResult ep;
  ep.total_segments = 10;
  ep.completed_segments = 9;
  ep.infractions.push_back({metrics::InfractionKind::off_track, 120.5, 33.25, 4});
  ep.total_distance = 3790.0;
  ep.total_time = 170.125;
  ep.speed_trace = {{0.0, 0.0}, {170.125, 44.5}};
  a.runs = {ep};
  SubmissionResult b = row("beta", 2.0 / 3.0, 61.0, 1.0 / 3.0, 2);
  b.practice_nsi = 4;
  SubmissionResult c = row("gamma", 1, 70.0, 0, 1, CameraConfig::multi);
  c.valid = false;
  c.note = "stalled";
  for (const auto* r : {&a, &b, &c}) store.append(*r);

  auto loaded = store.load();
  REQUIRE(loaded.results.size() == 3);
  CHECK(loaded.results[0] == a);
  CHECK(loaded.results[1] == b);
  CHECK(loaded.results[2] == c);
  CHECK(loaded.skipped == 0);

  {
    std::ofstream f(path, std::ios::app);
    f << "{\"participant\": \"broken\"\n\n";
  }
  store.append(row("delta", 1, 90.0, 0, 1, CameraConfig::multi));
  loaded = store.load();
  CHECK(loaded.results.size() == 4);
  CHECK(loaded.skipped == 1);
  REQUIRE(loaded.warnings.size() == 1);
  CHECK(loaded.warnings[0].find(":4:") != std::string::npos);

  CHECK(names(leaderboard(loaded.results, 1, CameraConfig::single)) == std::vector<std::string>{"alpha"});
  // gamma is invalid and stays off the board
  CHECK(names(leaderboard(loaded.results, 1, CameraConfig::multi)) == std::vector<std::string>{"delta"});
  CHECK(names(leaderboard(loaded.results, 2, CameraConfig::single)) == std::vector<std::string>{"beta"});
  CHECK(leaderboard(loaded.results, 2, CameraConfig::multi).empty());
  std::filesystem::remove(path);
}

TEST_CASE("ResultsStore: concurrent appends stay line-atomic") {
  const auto path = temp_path("store-mt") += ".jsonl";
  ResultsStore store(path);
  std::vector<std::thread> writers;
  for (int t = 0; t < 4; ++t) {
    writers.emplace_back([&, t] {
      for (int i = 0; i < 25; ++i) store.append(row("w" + std::to_string(t), 1, 10.0 + i));
    });
  }
  for (auto& w : writers) w.join();
  const auto loaded = store.load();
  CHECK(loaded.results.size() == 100);
  CHECK(loaded.skipped == 0);
  std::filesystem::remove(path);
}

TEST_CASE("leaderboard keeps each participant's best and counts entries") {
  std::vector<SubmissionResult> all{row("a", 0.9, 100), row("b", 1, 50), row("a", 1, 40), row("a", 1, 30)};
  const auto board = leaderboard(all, 1, CameraConfig::single);
  REQUIRE(board.size() == 2);
  CHECK(board[0].participant == "b");
  CHECK(board[1].participant == "a");
  CHECK(board[1].aats_kph == 40);
  CHECK(board[1].entries == 3);
}

TEST_CASE("camera_config_of") {
  CHECK(camera_config_of({"front"}) == CameraConfig::single);
  CHECK(camera_config_of({"left"}) == CameraConfig::multi);
  CHECK(camera_config_of({"front", "left"}) == CameraConfig::multi);
  CHECK(parse_camera_config("multi") == CameraConfig::multi);
  CHECK_THROWS(parse_camera_config("dual"));
}

TEST_CASE("run_stage1: pure pursuit on the circle") {
  StageOptions opts;
  std::vector<env::TrajectoryRecord> log;
  opts.trajectory = &log;
  const auto r = run_stage1("builtin:pure_pursuit", circle(), opts);
  CHECK(r.valid);
  CHECK(r.participant == "pure_pursuit");
  CHECK(r.stage == 1);
  CHECK(r.track == "circle");
  CHECK(r.camera_config == CameraConfig::single);
  REQUIRE(r.runs.size() == 3);
  CHECK(r.report.sr == 1.0);
  CHECK(r.report.nsi == 0.0);
  CHECK(r.report.runs == 3);
  CHECK_FALSE(r.practice_nsi.has_value());
  CHECK(r.report.aats_kph > 20.0);
  long steps = 0;
  for (const auto& run : r.runs) steps += std::lround(run.total_time / opts.dt);
  CHECK(static_cast<long>(log.size()) == steps);
}

TEST_CASE("run_stage1: straight agent fails and a single run aggregates to itself") {
  StageOptions opts;
  opts.runs = 1;
  const auto r = run_stage1("builtin:straight", circle(), opts);
  CHECK(r.valid);
  REQUIRE(r.runs.size() == 1);
  CHECK(r.report.sr < 1.0);
  CHECK(r.report == metrics::report(r.runs[0]));
  const auto& inf = r.runs[0].infractions;
  CHECK(std::any_of(inf.begin(), inf.end(),
                    [](const metrics::Infraction& i) { return i.kind == metrics::InfractionKind::off_track; }));
  opts.runs = 0;
  CHECK_THROWS_AS(run_stage1("builtin:idle", circle(), opts), HarnessError);
}

TEST_CASE("run_stage2: training track, zero budget and idle practice") {
  StageOptions opts;
  opts.runs = 1;
  CHECK_THROWS_AS(run_stage2("builtin:idle", track::standin_track("thruxton_standin"), opts), HarnessError);

  opts.practice_budget = 0.0;
  const auto skip = run_stage2("builtin:pure_pursuit", circle(), opts);
  CHECK(skip.valid);
  REQUIRE(skip.practice_nsi.has_value());
  CHECK(*skip.practice_nsi == 0);
  CHECK(skip.report.nsi == 0.0);
  CHECK(skip.report.sr == 1.0);

  // idle: one no_progress per 10 s window; a lap of 10 segments resolves at
  // t = 100 s, so 125 s of practice holds 10 + 2 infractions
  opts.practice_budget = 125.0;
  const auto idle = run_stage2("builtin:idle", circle(), opts);
  REQUIRE(idle.practice_nsi.has_value());
  CHECK(*idle.practice_nsi == 12);
  CHECK(idle.report.nsi == 12.0);
  CHECK(idle.report.sr == 0.0);
  CHECK(idle.valid);
}

TEST_CASE("aborted sessions are flagged invalid") {
  auto [server, client] = protocol::make_channel_pair();
  std::thread rogue([ch = client.get()] {
    while (auto m = ch->receive(std::chrono::seconds(5))) {
      if (std::holds_alternative<protocol::Hello>(*m)) ch->send(protocol::ActionMsg{});
      if (std::holds_alternative<protocol::Shutdown>(*m)) break;
    }
  });
  StageOptions opts;
  opts.participant = "rogue";
  const auto r = run_stage1(*server, circle(), opts);
  rogue.join();
  CHECK_FALSE(r.valid);
  CHECK(r.note.find("protocol_violation") != std::string::npos);
  CHECK(r.runs.empty());
}
