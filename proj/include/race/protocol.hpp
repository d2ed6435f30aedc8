#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "race/env.hpp"
#include "race/metrics.hpp"

namespace race::agents {
class Agent;
}

namespace race::protocol {

constexpr int kProtocolVersion = 1;

enum class Mode { practice, evaluate };
std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);

struct Hello {
  int protocol = kProtocolVersion;
  Mode mode = Mode::evaluate;
  std::string track;
  bool operator==(const Hello&) const = default;
};

struct Declare {
  std::vector<std::string> cameras;
  bool operator==(const Declare&) const = default;
};

struct Obs {
  int episode = 0;
  long step = 0;
  env::Observation observation;  // speed, cameras, optional privileged payload
  bool operator==(const Obs&) const = default;
};

struct ActionMsg {
  double steering = 0.0;
  double acceleration = 0.0;
  bool operator==(const ActionMsg&) const = default;
};

/// Per-episode summary; "nsi" travels as an integer.
struct EpisodeEnd {
  double sr = 0.0;
  double aats_kph = 0.0;
  int nsi = 0;
  double ed_s = 0.0;
  bool operator==(const EpisodeEnd&) const = default;
};

struct RunEnd {
  nlohmann::json report = nlohmann::json::object();
  bool operator==(const RunEnd&) const = default;
};

struct Shutdown {
  bool operator==(const Shutdown&) const = default;
};

struct Error {
  std::string code;
  std::string detail;
  bool operator==(const Error&) const = default;
};

using Message = std::variant<Hello, Declare, Obs, ActionMsg, EpisodeEnd, RunEnd, Shutdown, Error>;

std::string type_name(const Message& m);

/// Malformed line, unknown type, missing or mistyped field.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(std::string code, std::string field, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)), field_(std::move(field)) {}
  const std::string& code() const { return code_; }
  const std::string& field() const { return field_; }

 private:
  std::string code_;
  std::string field_;
};

/// One JSON object, no trailing newline.
std::string encode_message(const Message& m);
Message decode_message(std::string_view line);

EpisodeEnd episode_summary(const metrics::EpisodeResult& r);

// ---- session state machine ----

enum class Phase { awaiting_declare, idle, awaiting_action, closed };
std::string to_string(Phase phase);

struct SessionState {
  Phase phase = Phase::idle;
  std::vector<std::string> cameras;
  Mode mode = Mode::evaluate;
  int clamp_warnings = 0;
};

class ProtocolViolation : public std::runtime_error {
 public:
  ProtocolViolation(std::string expected, const std::string& what)
      : std::runtime_error(what), expected_(std::move(expected)) {}
  const std::string& expected() const { return expected_; }

 private:
  std::string expected_;
};

/// Applies one message (sent or received) to the session. Action channels
/// outside [-1, 1] are clamped in place and counted.
SessionState validate_transition(const SessionState& s, Message& m);

// ---- transport ----

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MessageChannel {
 public:
  virtual ~MessageChannel() = default;
  virtual void send(const Message& m) = 0;
  /// nullopt on timeout; throws TransportError once the peer is gone and
  /// DecodeError for a bad line.
  virtual std::optional<Message> receive(std::chrono::milliseconds timeout) = 0;
  virtual void close() = 0;
};

/// Two connected in-process ends. With `through_codec`, every message is
/// encoded and decoded on the way.
std::pair<std::unique_ptr<MessageChannel>, std::unique_ptr<MessageChannel>> make_channel_pair(
    bool through_codec = false);

/// Newline-delimited messages over a pair of file descriptors.
std::unique_ptr<MessageChannel> make_fd_channel(int in_fd, int out_fd, bool owns_fds);

struct Endpoint {
  enum class Kind { builtin, tcp, stdio };
  Kind kind = Kind::builtin;
  std::string name;  // builtin agent name or tcp host
  int port = 0;
};

/// "builtin:<name>", "tcp://host:port" or "stdio".
Endpoint parse_endpoint(const std::string& text);

/// Listens on host:port and accepts a single connection.
std::unique_ptr<MessageChannel> accept_tcp(const std::string& host, int port,
                                           std::chrono::milliseconds timeout);
std::unique_ptr<MessageChannel> connect_tcp(const std::string& host, int port,
                                            std::chrono::milliseconds timeout);

// ---- server side ----

struct SessionConfig {
  Mode mode = Mode::evaluate;
  std::string track_id;
  int episodes = 3;                // evaluate mode
  double practice_budget = 3600.0;  // seconds, practice mode
  /// Measure the practice budget in wall-clock instead of simulated time.
  bool wall_clock_budget = false;
  std::chrono::milliseconds action_timeout{1000};
  std::chrono::milliseconds declare_timeout{10000};
  int max_consecutive_stalls = 10;
  bool send_shutdown = true;
};

using EnvFactory = std::function<env::Env(Mode, const std::vector<std::string>& cameras)>;

struct SessionOutcome {
  std::vector<metrics::EpisodeResult> results;
  std::vector<std::string> cameras;
  long steps = 0;
  long actions = 0;
  int stalls = 0;
  int clamp_warnings = 0;
  double simulated_time = 0.0;
  bool aborted = false;
  std::string abort_reason;
  SessionState state;
};

/// Drives hello, declare, per-episode obs/action exchanges, episode_end,
/// run_end and (optionally) shutdown over one channel. `state` carries the
/// session across consecutive calls on the same connection.
SessionOutcome serve(const EnvFactory& factory, MessageChannel& channel,
                     const SessionConfig& config, SessionState state = {});

/// Optional per-step hook for logging (env after the step).
using StepObserver = std::function<void(const env::Env&, const env::StepOutcome&, vehicle::Action)>;
SessionOutcome serve(const EnvFactory& factory, MessageChannel& channel,
                     const SessionConfig& config, SessionState state, const StepObserver& observer);

// ---- client side ----

struct ClientOutcome {
  std::vector<EpisodeEnd> episodes;
  std::vector<nlohmann::json> run_reports;
  long actions = 0;
  bool clean_shutdown = false;
  std::optional<Error> error;
};

/// Answers every obs with the agent's action until shutdown or error.
ClientOutcome run_client(MessageChannel& channel, agents::Agent& agent,
                         std::chrono::milliseconds timeout = std::chrono::seconds(60));

}  // namespace race::protocol
