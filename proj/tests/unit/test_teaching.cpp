#include <sstream>

#include "doctest.h"
#include "teachlab/errors.hpp"
#include "teachlab/teaching.hpp"

using namespace teachlab;

namespace {

QTable strict_right() {
  QTable q(4, 2);
  for (int s = 0; s < 4; ++s) q.at(s, 1) = 0.1;
  return q;
}

FunctionTeacher silent() {
  return FunctionTeacher([](const TeacherObservation&) { return FeedbackValue::do_nothing(); });
}

// Rewards right moves, punishes left ones; magnitude from the table so
// logs carry varied numbers.
FunctionTeacher shaping(double scale) {
  return FunctionTeacher([scale](const TeacherObservation& obs) {
    const double r = obs.a == kRight ? scale : -scale;
    return FeedbackValue::reward(r * (0.5 + 0.5 * ((obs.step_index % 3) / 2.0)));
  });
}

}  // namespace

TEST_CASE("goal membership needs strict preference everywhere") {
  const auto goal = dog_goal(dog_env());
  CHECK_FALSE(goal_reached(QTable(4, 2), goal));
  CHECK(goal_reached(strict_right(), goal));
  auto q = strict_right();
  q.at(2, 1) = 0.0;
  CHECK_FALSE(goal_reached(q, goal));
  q.at(2, 0) = -1.0;
  CHECK(goal_reached(q, goal));
}

TEST_CASE("goal membership invariant under monotone row transforms") {
  RandomSource rng(3);
  const auto goal = dog_goal(dog_env());
  for (int t = 0; t < 2000; ++t) {
    QTable q(4, 2);
    for (int s = 0; s < 4; ++s) {
      for (int a = 0; a < 2; ++a) q.at(s, a) = static_cast<double>(rng.uniform_index(3)) - 1.0;
    }
    QTable w = q;
    for (int s = 0; s < 4; ++s) {
      const double scale = 0.1 + rng.uniform01();
      const double shift = rng.uniform01() * 4 - 2;
      for (int a = 0; a < 2; ++a) w.at(s, a) = std::exp(scale * q.at(s, a)) + shift;
    }
    CHECK(goal_reached(q, goal) == goal_reached(w, goal));
  }
}

TEST_CASE("silent teacher times out") {
  const auto env = dog_env();
  for (const LearnerSpec spec : {LearnerSpec{QLearningParams{0.9, 0.9}}, LearnerSpec{As1Params{1.0}},
                                 LearnerSpec{As2Params{}}}) {
    auto teacher = silent();
    const auto log = run_episode(env, make_learner(spec, env), teacher, EpisodeConfig{0.1, 40, 5, 1.0}, dog_goal(env));
    CHECK(log.steps.size() == 40);
    CHECK(log.outcome().kind == OutcomeKind::kTimeout);
    CHECK(log.steps.back().q_after == QTable(4, 2));
  }
}

TEST_CASE("pre-set strict table succeeds at the first check") {
  const auto env = dog_env();
  auto learner = make_learner(QLearningParams{0.9, 0.0}, env);
  learner.q = strict_right();
  auto teacher = silent();
  const auto log = run_episode(env, learner, teacher, EpisodeConfig{0.1, 40, 8, 1.0}, dog_goal(env));
  REQUIRE(log.steps.size() == 1);
  CHECK(log.outcome().kind == OutcomeKind::kSuccess);
  CHECK(log.outcome().steps_used == 1);
}

TEST_CASE("episodes are reproducible and consistent") {
  const auto env = dog_env();
  const LearnerSpec spec = QLearningParams{0.5, 0.45};
  const EpisodeConfig cfg{0.1, 40, 1234, 1.0};
  auto t1 = shaping(0.6);
  auto t2 = shaping(0.6);
  const auto a = run_episode(env, make_learner(spec, env), t1, cfg, dog_goal(env));
  const auto b = run_episode(env, make_learner(spec, env), t2, cfg, dog_goal(env));
  std::ostringstream sa;
  std::ostringstream sb;
  write_session_log(sa, a);
  write_session_log(sb, b);
  CHECK(sa.str() == sb.str());

  CHECK(a.steps.front().s == StateId{3});
  for (std::size_t i = 1; i < a.steps.size(); ++i) CHECK(a.steps[i].s == a.steps[i - 1].s_next);
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].goal_after == goal_reached(a.steps[i].q_after, a.goal));
    if (i > 0) CHECK(a.steps[i].q_before == a.steps[i - 1].q_after);
  }
  if (a.outcome().kind == OutcomeKind::kSuccess) CHECK(a.outcome().steps_used == static_cast<int>(a.steps.size()));
}

TEST_CASE("teacher rewards beyond r_max are a contract error") {
  const auto env = dog_env();
  FunctionTeacher loud([](const TeacherObservation&) { return FeedbackValue::reward(1.5); });
  CHECK_THROWS_AS(run_episode(env, make_learner(As2Params{}, env), loud, EpisodeConfig{}, dog_goal(env)),
                  ContractError);
  FunctionTeacher bad_nothing([](const TeacherObservation&) { return FeedbackValue{0.3, true}; });
  CHECK_THROWS_AS(run_episode(env, make_learner(As2Params{}, env), bad_nothing, EpisodeConfig{}, dog_goal(env)),
                  ContractError);
  FunctionTeacher unbounded([](const TeacherObservation&) { return FeedbackValue::reward(-50.0); });
  CHECK_NOTHROW(run_episode(env, make_learner(As2Params{}, env), unbounded,
                            EpisodeConfig{0.1, 5, 1, kUnboundedReward}, dog_goal(env)));
}

TEST_CASE("stepwise episode matches run_episode") {
  const auto env = dog_env();
  const LearnerSpec spec = As1Params{1.0};
  const EpisodeConfig cfg{0.1, 40, 77, 1.0};
  auto teacher = shaping(0.9);
  const auto whole = run_episode(env, make_learner(spec, env), teacher, cfg, dog_goal(env));

  TeachingEpisode ep(env, make_learner(spec, env), dog_goal(env), cfg);
  auto again = shaping(0.9);
  while (!ep.finished()) {
    const auto& obs = ep.advance();
    const auto fb = again.feedback(obs);
    const auto hypothetical = ep.preview(fb);
    const auto& rec = ep.commit(fb);
    CHECK(rec.q_after == hypothetical.q);
  }
  CHECK(ep.log().steps.size() == whole.steps.size());
  CHECK(ep.log().steps.back().q_after == whole.steps.back().q_after);
  CHECK_THROWS_AS(ep.advance(), ConflictError);
}

TEST_CASE("replay accepts genuine logs and rejects tampering") {
  const auto env = dog_env();
  auto teacher = shaping(0.7);
  const auto log = run_episode(env, make_learner(QLearningParams{0.9, 0.9}, env), teacher,
                               EpisodeConfig{0.1, 40, 9, 1.0}, dog_goal(env));
  const auto again = replay(log);
  CHECK(again.steps.size() == log.steps.size());
  CHECK(again.steps.back().q_after == log.steps.back().q_after);

  auto tampered = log;
  tampered.steps[tampered.steps.size() / 2].q_after.at(1, 1) += 1e-6;
  CHECK_THROWS_AS(replay(tampered), LogCorruptionError);

  tampered = log;
  tampered.steps[0].feedback.value += 0.25;
  CHECK_THROWS_AS(replay(tampered), LogCorruptionError);

  if (log.steps.size() > 2) {
    tampered = log;
    tampered.steps[1].s = StateId{(tampered.steps[0].s_next.index + 1) % 4};
    CHECK_THROWS_AS(replay(tampered), LogCorruptionError);
  }
}

TEST_CASE("ndjson round trip") {
  const auto env = dog_env();
  std::vector<SessionLog> logs;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto teacher = shaping(1.0 / 3.0);
    logs.push_back(run_episode(env, make_learner(QLearningParams{0.1, 0.9}, env), teacher,
                               EpisodeConfig{0.1, seed == 2 ? kUnboundedSteps : 40, seed, 1.0}, dog_goal(env)));
    logs.back().meta["dog_index"] = static_cast<int>(seed);
  }
  std::stringstream ss;
  for (const auto& l : logs) write_session_log(ss, l);
  const auto back = read_session_logs(ss);
  REQUIRE(back.size() == logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) {
    CHECK(back[i].learner_spec == logs[i].learner_spec);
    CHECK(back[i].episode_config.max_steps == logs[i].episode_config.max_steps);
    CHECK(back[i].meta == logs[i].meta);
    REQUIRE(back[i].steps.size() == logs[i].steps.size());
    for (std::size_t k = 0; k < logs[i].steps.size(); ++k) {
      CHECK(back[i].steps[k].q_after == logs[i].steps[k].q_after);
      CHECK(back[i].steps[k].feedback == logs[i].steps[k].feedback);
    }
    CHECK_NOTHROW(replay(back[i]));
  }
  const auto first_line = ss.str().substr(0, ss.str().find('\n'));
  const auto header = nlohmann::json::parse(first_line);
  CHECK(header["kind"] == "header");
  CHECK(header["episode_config"]["r_max"] == 1.0);

  std::stringstream broken("{\"step_index\": 0}\n");
  CHECK_THROWS_AS(read_session_logs(broken), LogCorruptionError);
  std::stringstream garbage(first_line + "\nnot json\n");
  CHECK_THROWS_AS(read_session_logs(garbage), LogCorruptionError);
}
