#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "race/env.hpp"
#include "race/metrics.hpp"
#include "race/protocol.hpp"

namespace race::harness {

enum class CameraConfig { single, multi };
std::string to_string(CameraConfig c);
CameraConfig parse_camera_config(const std::string& name);

/// single iff the declared set is exactly {front}.
CameraConfig camera_config_of(const std::vector<std::string>& cameras);

struct SubmissionResult {
  std::string participant;
  int stage = 1;
  CameraConfig camera_config = CameraConfig::single;
  std::vector<std::string> cameras;
  std::string track;
  std::vector<metrics::EpisodeResult> runs;
  metrics::MetricsReport report;
  std::optional<int> practice_nsi;  // stage 2 only
  int entries = 1;
  bool valid = true;
  std::string note;
  bool operator==(const SubmissionResult&) const = default;
};

struct LeaderboardEntry {
  int rank = 0;
  std::string participant;
  double sr = 0.0;
  double aats_kph = 0.0;
  double nsi = 0.0;
  std::optional<double> score;  // stage 2 only
  int entries = 1;
};

class RankingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Descending SR, ties by descending AATS; residual ties keep input order.
std::vector<LeaderboardEntry> rank_stage1(std::span<const SubmissionResult> entries);

/// AATS_i / max AATS + max(1 - NSI_i / median NSI, -1), with +1/-1 for a
/// zero median depending on whether NSI_i is zero.
double stage2_score(const SubmissionResult& entry, std::span<const SubmissionResult> cohort);

/// Descending SR, ties by descending stage2_score.
std::vector<LeaderboardEntry> rank_stage2(std::span<const SubmissionResult> entries);

/// Median; the mean of the middle pair for even counts.
double median(std::vector<double> values);

// ---- running submissions ----

struct StageOptions {
  std::string participant;
  int runs = 3;
  double practice_budget = 3600.0;  // simulated s
  bool wall_clock_budget = false;
  double dt = 0.05;
  std::optional<int> n_segments;
  env::Watchdog watchdog;
  double max_episode_time = 1200.0;
  vehicle::VehicleParams vehicle;
  std::chrono::milliseconds action_timeout{1000};
  std::chrono::milliseconds connect_timeout{30000};
  /// Stage 2 refuses to evaluate on these.
  std::set<std::string> training_tracks{"thruxton_standin"};
  std::uint64_t seed = 0;
  /// Evaluation-phase steps are appended here when set.
  std::vector<env::TrajectoryRecord>* trajectory = nullptr;
};

protocol::EnvFactory env_factory(const track::Track& track, const StageOptions& options);

SubmissionResult run_stage1(protocol::MessageChannel& channel, const track::Track& track,
                            const StageOptions& options);
SubmissionResult run_stage2(protocol::MessageChannel& channel, const track::Track& track,
                            const StageOptions& options);

/// Endpoint forms: builtin:<name> runs the agent on a thread in-process;
/// tcp://host:port listens there for one agent connection.
SubmissionResult run_stage1(const std::string& agent_endpoint, const track::Track& track,
                            const StageOptions& options);
SubmissionResult run_stage2(const std::string& agent_endpoint, const track::Track& track,
                            const StageOptions& options);

// ---- persistence ----

void to_json(nlohmann::json& j, const SubmissionResult& v);
void from_json(const nlohmann::json& j, SubmissionResult& v);

/// Append-only JSON-lines store.
class ResultsStore {
 public:
  explicit ResultsStore(std::filesystem::path path) : path_(std::move(path)) {}

  void append(const SubmissionResult& result);

  struct Loaded {
    std::vector<SubmissionResult> results;
    int skipped = 0;
    std::vector<std::string> warnings;
  };
  Loaded load() const;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
};

/// Best submission per participant on one (stage, camera) board, ranked.
/// `entries` counts that participant's submissions on the board.
std::vector<LeaderboardEntry> leaderboard(std::span<const SubmissionResult> results, int stage,
                                          CameraConfig cameras);

}  // namespace race::harness
