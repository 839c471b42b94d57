#include "teachlab/teaching.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "teachlab/errors.hpp"

namespace teachlab {

TeachingGoal dog_goal(const EnvModel& env) {
  return TeachingGoal{std::vector<ActionId>(static_cast<std::size_t>(env.n_states()), kRight)};
}

bool goal_reached(const QTable& q, const TeachingGoal& goal) {
  if (goal.target_action.size() != static_cast<std::size_t>(q.n_states())) {
    throw DomainError("goal_reached: goal does not cover every state");
  }
  for (int s = 0; s < q.n_states(); ++s) {
    const ActionId target = goal.target_action[static_cast<std::size_t>(s)];
    const double best = q.at(s, target.index);
    for (int a = 0; a < q.n_actions(); ++a) {
      if (a != target.index && !(best > q.at(s, a))) return false;
    }
  }
  return true;
}

EpisodeOutcome SessionLog::outcome() const {
  for (const auto& step : steps) {
    if (step.goal_after) return {OutcomeKind::kSuccess, step.step_index + 1};
  }
  if (static_cast<long long>(steps.size()) >= episode_config.max_steps) {
    return {OutcomeKind::kTimeout, static_cast<int>(steps.size())};
  }
  return {OutcomeKind::kInProgress, static_cast<int>(steps.size())};
}

// env must outlive the episode.
TeachingEpisode::TeachingEpisode(const EnvModel& env, LearnerState learner, TeachingGoal goal, EpisodeConfig cfg)
    : env_(&env), learner_(std::move(learner)), rng_(cfg.seed) {
  if (cfg.max_steps < 1) throw DomainError("max_steps must be at least 1");
  if (learner_.q.n_states() != env.n_states() || learner_.q.n_actions() != env.n_actions()) {
    throw DomainError("learner table does not match the environment");
  }
  if (goal.target_action.size() != static_cast<std::size_t>(env.n_states())) {
    throw DomainError("goal must name a target action for every state");
  }
  log_.learner_spec = learner_.spec;
  log_.episode_config = cfg;
  log_.goal = std::move(goal);
  log_.initial_q = learner_.q;
  position_ = initial_state(env, rng_);
}

bool TeachingEpisode::finished() const {
  return log_.outcome().kind != OutcomeKind::kInProgress;
}

const TeacherObservation& TeachingEpisode::pending() const {
  if (!pending_) throw ConflictError("no pending move");
  return *pending_;
}

const TeacherObservation& TeachingEpisode::advance() {
  if (pending_) throw ConflictError("a move is already awaiting feedback");
  if (finished()) throw ConflictError("episode already finished");
  const auto choice = select_action(learner_, position_, {log_.episode_config.epsilon}, rng_);
  const auto step = step_env(*env_, position_, choice.action, rng_);
  pending_ = TeacherObservation{position_,
                                choice.action,
                                step.next_state,
                                step.reached_absorb,
                                choice.explored,
                                learner_.q,
                                learner_.visits,
                                static_cast<int>(log_.steps.size())};
  return *pending_;
}

void TeachingEpisode::check_feedback(const FeedbackValue& fb) const {
  if (!std::isfinite(fb.value)) throw ContractError("feedback is not finite");
  if (fb.is_do_nothing && fb.value != 0.0) throw ContractError("do-nothing feedback must carry value 0");
  if (std::abs(fb.value) > log_.episode_config.r_max) {
    throw ContractError("feedback " + std::to_string(fb.value) + " exceeds r_max " +
                        std::to_string(log_.episode_config.r_max));
  }
}

LearnerState TeachingEpisode::preview(const FeedbackValue& fb) const {
  const auto& obs = pending();
  check_feedback(fb);
  return dispatch_update(learner_, {obs.s, obs.a, obs.s_next, obs.reached_absorb, fb.value});
}

const StepRecord& TeachingEpisode::commit(const FeedbackValue& fb) {
  const auto& obs = pending();
  check_feedback(fb);
  StepRecord rec;
  rec.step_index = obs.step_index;
  rec.s = obs.s;
  rec.a = obs.a;
  rec.explored = obs.explored;
  rec.s_next = obs.s_next;
  rec.reached_absorb = obs.reached_absorb;
  rec.feedback = fb;
  rec.q_before = learner_.q;
  apply_update(learner_, {obs.s, obs.a, obs.s_next, obs.reached_absorb, fb.value});
  rec.q_after = learner_.q;
  rec.goal_after = goal_reached(learner_.q, log_.goal);
  position_ = obs.s_next;
  pending_.reset();
  log_.steps.push_back(std::move(rec));
  return log_.steps.back();
}

SessionLog run_episode(const EnvModel& env, const LearnerState& learner, TeacherPolicy& teacher,
                       const EpisodeConfig& cfg, const TeachingGoal& goal) {
  TeachingEpisode episode(env, learner, goal, cfg);
  while (!episode.finished()) {
    const auto& obs = episode.advance();
    episode.commit(teacher.feedback(obs));
  }
  return std::move(episode.log());
}

SessionLog replay(const SessionLog& log) {
  LearnerState learner{log.learner_spec, log.initial_q,
                       VisitCounts(log.initial_q.n_states(), log.initial_q.n_actions(), 0)};
  SessionLog out = log;
  out.steps.clear();
  bool reached = false;
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const auto& rec = log.steps[i];
    auto fail = [&](const std::string& why) {
      throw LogCorruptionError("step " + std::to_string(i) + ": " + why);
    };
    if (reached) fail("steps recorded after the goal was reached");
    if (rec.step_index != static_cast<int>(i)) fail("step_index out of sequence");
    if (i > 0 && rec.s != log.steps[i - 1].s_next) fail("state does not continue from previous s_next");
    if (rec.q_before.n_states() != learner.q.n_states() || rec.q_before.n_actions() != learner.q.n_actions() ||
        rec.q_after.n_states() != learner.q.n_states() || rec.q_after.n_actions() != learner.q.n_actions()) {
      fail("table shape mismatch");
    }
    if (max_abs_diff(rec.q_before, learner.q) > kReplayTolerance) fail("q_before disagrees with replayed table");
    if (!std::isfinite(rec.feedback.value) || std::abs(rec.feedback.value) > log.episode_config.r_max ||
        (rec.feedback.is_do_nothing && rec.feedback.value != 0.0)) {
      fail("feedback outside the configured bounds");
    }
    StepRecord fresh = rec;
    fresh.q_before = learner.q;
    try {
      apply_update(learner, {rec.s, rec.a, rec.s_next, rec.reached_absorb, rec.feedback.value});
    } catch (const DomainError& e) {
      fail(e.what());
    }
    if (max_abs_diff(rec.q_after, learner.q) > kReplayTolerance) fail("q_after disagrees with replayed update");
    fresh.q_after = learner.q;
    fresh.goal_after = goal_reached(learner.q, log.goal);
    if (fresh.goal_after != rec.goal_after) fail("goal_after disagrees with replayed table");
    reached = fresh.goal_after;
    out.steps.push_back(std::move(fresh));
  }
  if (static_cast<long long>(log.steps.size()) > log.episode_config.max_steps) {
    throw LogCorruptionError("more steps than max_steps");
  }
  return out;
}

nlohmann::json qtable_to_json(const QTable& q) {
  nlohmann::json rows = nlohmann::json::array();
  for (int s = 0; s < q.n_states(); ++s) {
    const auto row = q.row(StateId{s});
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

QTable qtable_from_json(const nlohmann::json& doc) {
  const auto rows = doc.get<std::vector<std::vector<double>>>();
  if (rows.empty() || rows.front().empty()) throw DomainError("empty Q table");
  QTable q(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (std::size_t s = 0; s < rows.size(); ++s) {
    if (rows[s].size() != rows.front().size()) throw DomainError("ragged Q table");
    for (std::size_t a = 0; a < rows[s].size(); ++a) q.at(static_cast<int>(s), static_cast<int>(a)) = rows[s][a];
  }
  return q;
}

namespace {

nlohmann::json bounded(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

nlohmann::json config_to_json(const EpisodeConfig& cfg) {
  return {{"epsilon", cfg.epsilon},
          {"max_steps", cfg.max_steps == kUnboundedSteps ? nlohmann::json(nullptr) : nlohmann::json(cfg.max_steps)},
          {"seed", cfg.seed},
          {"r_max", bounded(cfg.r_max)}};
}

EpisodeConfig config_from_json(const nlohmann::json& j) {
  EpisodeConfig cfg;
  cfg.epsilon = j.at("epsilon").get<double>();
  cfg.max_steps = j.at("max_steps").is_null() ? kUnboundedSteps : j.at("max_steps").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.r_max = j.at("r_max").is_null() ? kUnboundedReward : j.at("r_max").get<double>();
  return cfg;
}

StepRecord step_from_json(const nlohmann::json& j) {
  StepRecord rec;
  rec.step_index = j.at("step_index").get<int>();
  rec.s = StateId{j.at("s").get<int>()};
  rec.a = ActionId{j.at("a").get<int>()};
  rec.explored = j.at("explored").get<bool>();
  rec.s_next = StateId{j.at("s_next").get<int>()};
  rec.reached_absorb = j.at("reached_absorb").get<bool>();
  rec.feedback = {j.at("feedback").at("value").get<double>(), j.at("feedback").at("is_do_nothing").get<bool>()};
  rec.q_before = qtable_from_json(j.at("q_before"));
  rec.q_after = qtable_from_json(j.at("q_after"));
  rec.goal_after = j.at("goal_after").get<bool>();
  return rec;
}

}  // namespace

nlohmann::json header_to_json(const SessionLog& log) {
  std::vector<int> targets;
  for (auto a : log.goal.target_action) targets.push_back(a.index);
  return {{"kind", "header"},
          {"learner_spec", learner_spec_to_json(log.learner_spec)},
          {"episode_config", config_to_json(log.episode_config)},
          {"goal", {{"target_action", targets}}},
          {"initial_q", qtable_to_json(log.initial_q)},
          {"meta", log.meta}};
}

nlohmann::json step_to_json(const StepRecord& rec) {
  return {{"step_index", rec.step_index},
          {"s", rec.s.index},
          {"a", rec.a.index},
          {"explored", rec.explored},
          {"s_next", rec.s_next.index},
          {"reached_absorb", rec.reached_absorb},
          {"feedback", {{"value", rec.feedback.value}, {"is_do_nothing", rec.feedback.is_do_nothing}}},
          {"q_before", qtable_to_json(rec.q_before)},
          {"q_after", qtable_to_json(rec.q_after)},
          {"goal_after", rec.goal_after}};
}

void write_session_log(std::ostream& out, const SessionLog& log) {
  out << header_to_json(log).dump() << '\n';
  for (const auto& rec : log.steps) out << step_to_json(rec).dump() << '\n';
}

std::vector<SessionLog> read_session_logs(std::istream& in) {
  std::vector<SessionLog> logs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.value("kind", std::string()) == "header") {
        SessionLog log;
        log.learner_spec = learner_spec_from_json(j.at("learner_spec"));
        log.episode_config = config_from_json(j.at("episode_config"));
        for (int a : j.at("goal").at("target_action").get<std::vector<int>>()) log.goal.target_action.push_back({a});
        log.initial_q = qtable_from_json(j.at("initial_q"));
        log.meta = j.value("meta", nlohmann::json::object());
        logs.push_back(std::move(log));
      } else {
        if (logs.empty()) throw LogCorruptionError("step record before any header");
        logs.back().steps.push_back(step_from_json(j));
      }
    } catch (const nlohmann::json::exception& e) {
      throw LogCorruptionError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DomainError& e) {
      throw LogCorruptionError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return logs;
}

std::vector<SessionLog> read_session_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open log file " + path);
  return read_session_logs(in);
}

void write_session_log_file(const std::string& path, const std::vector<SessionLog>& logs) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write log file " + path);
  for (const auto& log : logs) write_session_log(out, log);
}

}  // namespace teachlab
