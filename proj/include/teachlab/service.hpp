#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "teachlab/env.hpp"
#include "teachlab/learner.hpp"
#include "teachlab/teaching.hpp"

namespace teachlab {

struct SessionConfig {
  std::string condition = "Q0";  // Q0, Q1, Q45, Q9, AS1, AS2
  bool sync = true;
  int n_dogs = 3;
  int max_steps = 40;
  double epsilon = 0.1;
  std::uint64_t seed = 0;
};

/// Throws RequestError on unknown condition or out-of-range fields.
SessionConfig session_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const SessionConfig& cfg);

enum class Phase { kAwaitingFeedback, kDogFinished, kSessionFinished };
std::string to_string(Phase phase);

/// One cell of the brain scanner. Arrow lengths are |Q| divided by
/// max(max |Q| over the table, 0.1); sign +1 draws a solid blue arrow,
/// -1 a dotted red one.
struct ScannerCell {
  double q_left = 0.0;
  double q_right = 0.0;
  double left_length = 0.0;
  double right_length = 0.0;
  int left_sign = 0;
  int right_sign = 0;
  std::string greedy;  // "left", "right" or "tie"
  bool goal_match = false;
  friend bool operator==(const ScannerCell&, const ScannerCell&) = default;
};

struct ScannerDisplay {
  double scale = 0.1;
  std::vector<ScannerCell> cells;
  friend bool operator==(const ScannerDisplay&, const ScannerDisplay&) = default;
};

inline constexpr double kArrowScaleFloor = 0.1;

ScannerDisplay scanner_display(const QTable& q, const TeachingGoal& goal);
nlohmann::json to_json(const ScannerDisplay& display);

struct PendingMove {
  int s = 0;
  int a = 0;
  int s_next = 0;
  bool reached_absorb = false;
  bool squirrel = false;  // exploration step; the squirrel sits on the side of `a`
};

struct DogResult {
  int dog_index = 0;
  OutcomeKind outcome = OutcomeKind::kInProgress;
  int steps = 0;
};

struct SessionState {
  std::string session_id;
  SessionConfig config;
  int dog_index = 0;
  Phase phase = Phase::kAwaitingFeedback;
  std::optional<PendingMove> pending;
  int step_counter = 0;
  int position = 0;  // where the dog stands before the pending move
  ScannerDisplay display;
  std::vector<DogResult> finished_dogs;
};

nlohmann::json to_json(const SessionState& state);

/// Exactly one of value / do_nothing.
struct FeedbackRequest {
  std::optional<double> value;
  bool do_nothing = false;
};

FeedbackRequest feedback_request_from_json(const nlohmann::json& doc);

/// Live learner state per participant. Sessions are independent; each
/// session serializes its mutations while reads share a lock. With a data
/// directory every dog header and committed step is appended and flushed to
/// `<data_dir>/<session_id>.ndjson` as it happens.
class SessionService {
 public:
  explicit SessionService(std::optional<std::string> data_dir = std::nullopt, EnvModel env = dog_env());
  ~SessionService();
  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  /// Places dog 1 on its start tile with an all-zero table and makes its
  /// first move.
  SessionState create_session(const SessionConfig& cfg);
  SessionState get(const std::string& id) const;
  /// Display the table would show after feedback `value`; state unchanged.
  ScannerDisplay preview_feedback(const std::string& id, double value) const;
  SessionState submit_feedback(const std::string& id, const FeedbackRequest& req);
  /// Moves from DogFinished to the next dog's first pending move.
  SessionState next_dog(const std::string& id);
  /// Finished dogs plus the in-progress prefix of the current one.
  std::vector<SessionLog> export_session(const std::string& id) const;

  /// Uniform draw of (condition, sync) for deployments that randomize.
  std::pair<std::string, bool> assign_condition();

  const EnvModel& env() const { return env_; }

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;

  EnvModel env_;
  std::optional<std::string> data_dir_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
  std::mutex assign_mutex_;
  RandomSource assign_rng_;
};

/// Transport-independent request routing, used by the HTTP server and tests.
struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

HttpResponse handle_request(SessionService& service, const std::string& method, const std::string& path,
                            const std::map<std::string, std::string>& query, const std::string& body);

/// cpp-httplib front end; listen() blocks until stop() is called from another thread.
class HttpServer {
 public:
  explicit HttpServer(SessionService& service);
  ~HttpServer();
  /// Returns the bound port (useful with port 0).
  int bind(const std::string& host, int port);
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace teachlab
