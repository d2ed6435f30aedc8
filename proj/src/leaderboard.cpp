#include <algorithm>
#include <numeric>

#include "race/harness.hpp"

namespace race::harness {

std::string to_string(CameraConfig c) { return c == CameraConfig::single ? "single" : "multi"; }

CameraConfig parse_camera_config(const std::string& name) {
  if (name == "single") return CameraConfig::single;
  if (name == "multi") return CameraConfig::multi;
  throw std::invalid_argument("camera config must be single or multi, got '" + name + "'");
}

CameraConfig camera_config_of(const std::vector<std::string>& cameras) {
  return cameras.size() == 1 && cameras.front() == "front" ? CameraConfig::single
                                                           : CameraConfig::multi;
}

double median(std::vector<double> values) {
  if (values.empty()) throw RankingError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

void check_board(std::span<const SubmissionResult> entries, int stage) {
  if (entries.empty()) return;
  for (const auto& e : entries) {
    if (e.stage != stage) {
      throw RankingError("entry '" + e.participant + "' is stage " + std::to_string(e.stage) +
                         ", expected " + std::to_string(stage));
    }
    if (e.camera_config != entries.front().camera_config) {
      throw RankingError("entries mix single- and multi-camera boards");
    }
  }
}

LeaderboardEntry entry_of(const SubmissionResult& r) {
  LeaderboardEntry e;
  e.participant = r.participant;
  e.sr = r.report.sr;
  e.aats_kph = r.report.aats_kph;
  e.nsi = r.report.nsi;
  e.entries = r.entries;
  return e;
}

// Whether `a` beats `b` as a participant's own best run. Stage 2 compares
// NSI before AATS since the score needs the whole cohort.
bool better(const SubmissionResult& a, const SubmissionResult& b, int stage) {
  if (a.report.sr != b.report.sr) return a.report.sr > b.report.sr;
  if (stage == 2 && a.report.nsi != b.report.nsi) return a.report.nsi < b.report.nsi;
  return a.report.aats_kph > b.report.aats_kph;
}

}  // namespace

std::vector<LeaderboardEntry> rank_stage1(std::span<const SubmissionResult> entries) {
  check_board(entries, 1);
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = entries[a].report;
    const auto& rb = entries[b].report;
    if (ra.sr != rb.sr) return ra.sr > rb.sr;
    return ra.aats_kph > rb.aats_kph;
  });
  std::vector<LeaderboardEntry> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.push_back(entry_of(entries[order[i]]));
    out.back().rank = static_cast<int>(i) + 1;
  }
  return out;
}

double stage2_score(const SubmissionResult& entry, std::span<const SubmissionResult> cohort) {
  if (cohort.empty()) throw RankingError("empty cohort");
  double best = 0.0;
  std::vector<double> nsis;
  for (const auto& c : cohort) {
    best = std::max(best, c.report.aats_kph);
    nsis.push_back(c.report.nsi);
  }
  if (!(best > 0.0)) throw RankingError("maximum AATS in the cohort is zero");
  const double med = median(std::move(nsis));
  const double speed_term = entry.report.aats_kph / best;
  double safety_term;
  if (med == 0.0) {
    safety_term = entry.report.nsi == 0.0 ? 1.0 : -1.0;
  } else {
    safety_term = std::max(1.0 - entry.report.nsi / med, -1.0);
  }
  return speed_term + safety_term;
}

std::vector<LeaderboardEntry> rank_stage2(std::span<const SubmissionResult> entries) {
  check_board(entries, 2);
  std::vector<double> scores;
  for (const auto& e : entries) scores.push_back(stage2_score(e, entries));
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (entries[a].report.sr != entries[b].report.sr) return entries[a].report.sr > entries[b].report.sr;
    return scores[a] > scores[b];
  });
  std::vector<LeaderboardEntry> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.push_back(entry_of(entries[order[i]]));
    out.back().rank = static_cast<int>(i) + 1;
    out.back().score = scores[order[i]];
  }
  return out;
}

std::vector<LeaderboardEntry> leaderboard(std::span<const SubmissionResult> results, int stage,
                                          CameraConfig cameras) {
  std::vector<SubmissionResult> board;
  for (const auto& r : results) {
    if (r.stage == stage && r.camera_config == cameras && r.valid) board.push_back(r);
  }
  if (board.empty()) return {};
  // keep each participant's best submission; first appearance fixes order
  std::vector<SubmissionResult> best;
  std::map<std::string, std::size_t> index;
  for (const auto& r : board) {
    auto it = index.find(r.participant);
    if (it == index.end()) {
      index.emplace(r.participant, best.size());
      best.push_back(r);
      best.back().entries = 1;
      continue;
    }
    SubmissionResult& held = best[it->second];
    const int count = held.entries + 1;
    if (better(r, held, stage)) held = r;
    held.entries = count;
  }
  return stage == 1 ? rank_stage1(best) : rank_stage2(best);
}

}  // namespace race::harness
