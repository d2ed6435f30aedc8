#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "race/env.hpp"
#include "race/metrics.hpp"
#include "race/planner.hpp"

namespace race::agents {

using vehicle::Action;

/// The select-action contract. One instance drives one session.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;
  virtual std::vector<std::string> cameras() const { return {"front"}; }
  virtual void on_hello(const std::string& /*mode*/, const std::string& /*track*/) {}
  virtual Action act(const env::Observation& obs) = 0;
  virtual void on_episode_end(const metrics::MetricsReport& /*result*/) {}
};

/// Uniform actions in [-1, 1]^2.
class RandomAgent : public Agent {
 public:
  explicit RandomAgent(std::uint64_t seed) : rng_(seed) {}
  std::string name() const override { return "random"; }
  Action act(const env::Observation& obs) override;

 private:
  double uniform();
  std::mt19937_64 rng_;
};

/// Full throttle, wheel straight.
class StraightAgent : public Agent {
 public:
  std::string name() const override { return "straight"; }
  Action act(const env::Observation&) override { return {0.0, 1.0}; }
};

class IdleAgent : public Agent {
 public:
  std::string name() const override { return "idle"; }
  Action act(const env::Observation&) override { return {}; }
};

/// Centerline follower on perceived track limits.
class PurePursuitAgent : public Agent {
 public:
  explicit PurePursuitAgent(planner::PurePursuitParams params = {},
                            std::vector<std::string> cameras = {"front"});
  std::string name() const override { return "pure_pursuit"; }
  std::vector<std::string> cameras() const override { return cameras_; }
  Action act(const env::Observation& obs) override;

 private:
  planner::PurePursuitParams params_;
  std::vector<std::string> cameras_;
  std::map<std::string, camera::CameraCalibration> calibs_;
  Action last_;
};

class MpcAgent : public Agent {
 public:
  explicit MpcAgent(planner::MpcParams params = planner::tuned_mpc_params(),
                    std::vector<std::string> cameras = {"front"});
  std::string name() const override { return "mpc"; }
  std::vector<std::string> cameras() const override { return cameras_; }
  Action act(const env::Observation& obs) override;

  const std::optional<planner::MpcResult>& last_plan() const { return last_plan_; }
  int perception_failures() const { return failures_; }

 private:
  planner::MpcParams params_;
  std::vector<std::string> cameras_;
  std::map<std::string, camera::CameraCalibration> calibs_;
  std::optional<planner::MpcResult> last_plan_;
  Action last_;
  int failures_ = 0;
};

/// "random", "straight", "idle", "pure_pursuit", "mpc".
std::unique_ptr<Agent> make_builtin_agent(const std::string& name, std::uint64_t seed = 0);
std::vector<std::string> builtin_agent_names();

}  // namespace race::agents
