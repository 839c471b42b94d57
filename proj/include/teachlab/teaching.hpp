#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "teachlab/env.hpp"
#include "teachlab/learner.hpp"

namespace teachlab {

/// What the teacher sees before choosing a reward: the transition just made
/// and the learner's tables before the pending update.
struct TeacherObservation {
  StateId s;
  ActionId a;
  StateId s_next;
  bool reached_absorb = false;
  bool explored = false;
  QTable q_snapshot;
  VisitCounts visits_snapshot;
  int step_index = 0;
};

struct FeedbackValue {
  double value = 0.0;
  bool is_do_nothing = false;

  static FeedbackValue do_nothing() { return {0.0, true}; }
  static FeedbackValue reward(double r) { return {r, false}; }
  friend bool operator==(const FeedbackValue&, const FeedbackValue&) = default;
};

struct TeachingGoal {
  std::vector<ActionId> target_action;  // one per state
};

/// Right at every tile.
TeachingGoal dog_goal(const EnvModel& env);

inline constexpr double kUnboundedReward = std::numeric_limits<double>::infinity();
inline constexpr int kUnboundedSteps = std::numeric_limits<int>::max();

struct EpisodeConfig {
  double epsilon = 0.1;
  int max_steps = 40;
  std::uint64_t seed = 0;
  double r_max = 1.0;  // kUnboundedReward for theory runs
};

struct StepRecord {
  int step_index = 0;
  StateId s;
  ActionId a;
  bool explored = false;
  StateId s_next;
  bool reached_absorb = false;
  FeedbackValue feedback;
  QTable q_before;
  QTable q_after;
  bool goal_after = false;
};

enum class OutcomeKind { kSuccess, kTimeout, kInProgress };

struct EpisodeOutcome {
  OutcomeKind kind = OutcomeKind::kInProgress;
  int steps_used = 0;  // meaningful for kSuccess
};

struct SessionLog {
  LearnerSpec learner_spec;
  EpisodeConfig episode_config;
  TeachingGoal goal;
  QTable initial_q;
  nlohmann::json meta = nlohmann::json::object();  // participant/condition tags, free-form
  std::vector<StepRecord> steps;

  /// Success at the first goal_after step; Timeout once max_steps records
  /// exist without success; otherwise in progress.
  EpisodeOutcome outcome() const;
};

/// Strict preference for the target action at every state.
bool goal_reached(const QTable& q, const TeachingGoal& goal);

class TeacherPolicy {
 public:
  virtual ~TeacherPolicy() = default;
  virtual FeedbackValue feedback(const TeacherObservation& obs) = 0;
};

class FunctionTeacher final : public TeacherPolicy {
 public:
  explicit FunctionTeacher(std::function<FeedbackValue(const TeacherObservation&)> fn) : fn_(std::move(fn)) {}
  FeedbackValue feedback(const TeacherObservation& obs) override { return fn_(obs); }

 private:
  std::function<FeedbackValue(const TeacherObservation&)> fn_;
};

/// Step-wise teaching episode: the learner moves (advance), the teacher
/// answers (commit), the goal is checked after every update. Used directly
/// by the session service and by run_episode.
class TeachingEpisode {
 public:
  TeachingEpisode(const EnvModel& env, LearnerState learner, TeachingGoal goal, EpisodeConfig cfg);

  /// Samples the next move. Requires no pending observation and !finished().
  const TeacherObservation& advance();

  bool has_pending() const { return pending_.has_value(); }
  const TeacherObservation& pending() const;

  /// Applies feedback to the pending move and records the step. Throws
  /// ContractError if |value| > r_max or a do-nothing carries a value.
  const StepRecord& commit(const FeedbackValue& fb);

  /// Learner state that commit(fb) would produce; no side effects.
  LearnerState preview(const FeedbackValue& fb) const;

  bool finished() const;
  const LearnerState& learner() const { return learner_; }
  StateId position() const { return position_; }
  const SessionLog& log() const { return log_; }
  SessionLog& log() { return log_; }

 private:
  void check_feedback(const FeedbackValue& fb) const;

  const EnvModel* env_;
  LearnerState learner_;
  RandomSource rng_;
  StateId position_;
  std::optional<TeacherObservation> pending_;
  SessionLog log_;
};

/// Runs to success or max_steps. Deterministic in cfg.seed.
SessionLog run_episode(const EnvModel& env, const LearnerState& learner, TeacherPolicy& teacher,
                       const EpisodeConfig& cfg, const TeachingGoal& goal);

/// Re-applies recorded actions and feedback through the update rules and
/// checks every recorded table within 1e-12. Throws LogCorruptionError.
SessionLog replay(const SessionLog& log);

inline constexpr double kReplayTolerance = 1e-12;

// Newline-delimited log format: one {"kind": "header", ...} object, then one
// object per step with the StepRecord field names. Several logs may follow
// each other in one stream.
nlohmann::json header_to_json(const SessionLog& log);
nlohmann::json step_to_json(const StepRecord& step);
void write_session_log(std::ostream& out, const SessionLog& log);
std::vector<SessionLog> read_session_logs(std::istream& in);
std::vector<SessionLog> read_session_log_file(const std::string& path);
void write_session_log_file(const std::string& path, const std::vector<SessionLog>& logs);

nlohmann::json qtable_to_json(const QTable& q);
QTable qtable_from_json(const nlohmann::json& doc);

}  // namespace teachlab
