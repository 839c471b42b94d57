#include "teachlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "teachlab/errors.hpp"
#include "teachlab/parallel.hpp"

namespace teachlab {

namespace {

struct TagEntry {
  const char* tag;
  LearnerSpec spec;
};

const std::vector<TagEntry>& tag_table() {
  static const std::vector<TagEntry> table{
      {"Q0", QLearningParams{0.9, 0.0}},  {"Q1", QLearningParams{0.9, 0.1}}, {"Q45", QLearningParams{0.9, 0.45}},
      {"Q9", QLearningParams{0.9, 0.9}},  {"AS1", As1Params{1.0}},           {"AS2", As2Params{}},
  };
  return table;
}

int tag_rank(const std::string& tag) {
  const auto& tags = condition_tags();
  const auto it = std::find(tags.begin(), tags.end(), tag);
  return it == tags.end() ? static_cast<int>(tags.size()) : static_cast<int>(it - tags.begin());
}

}  // namespace

const std::vector<std::string>& condition_tags() {
  static const std::vector<std::string> tags = [] {
    std::vector<std::string> out;
    for (const auto& e : tag_table()) out.emplace_back(e.tag);
    return out;
  }();
  return tags;
}

std::string condition_tag(const LearnerSpec& spec) {
  for (const auto& e : tag_table()) {
    if (e.spec == spec) return e.tag;
  }
  return to_string(spec);
}

LearnerSpec condition_spec(const std::string& tag) {
  for (const auto& e : tag_table()) {
    if (tag == e.tag) return e.spec;
  }
  throw DomainError("unknown learner condition '" + tag + "'");
}

bool ParticipantRecord::complete() const {
  if (static_cast<int>(logs.size()) < expected_dogs) return false;
  return std::all_of(logs.begin(), logs.end(),
                     [](const SessionLog& l) { return l.outcome().kind != OutcomeKind::kInProgress; });
}

std::vector<ParticipantRecord> group_participants(const std::vector<SessionLog>& logs, const std::string& fallback_id) {
  std::vector<ParticipantRecord> out;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const auto& log = logs[i];
    const std::string id = log.meta.value("participant_id", std::string());
    auto it = id.empty() ? out.end()
                         : std::find_if(out.begin(), out.end(), [&](const auto& r) { return r.participant_id == id; });
    if (it == out.end()) {
      ParticipantRecord rec;
      rec.participant_id = id.empty() ? fallback_id + (logs.size() > 1 ? "#" + std::to_string(i) : "") : id;
      rec.spec = log.learner_spec;
      rec.condition = log.meta.value("condition", condition_tag(log.learner_spec));
      rec.sync = log.meta.value("sync", false);
      rec.expected_dogs = id.empty() ? 1 : log.meta.value("n_dogs", 1);
      out.push_back(std::move(rec));
      it = out.end() - 1;
    }
    it->logs.push_back(log);
  }
  return out;
}

std::vector<ParticipantRecord> load_participants(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DomainError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ndjson") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ParticipantRecord> out;
  for (const auto& path : files) {
    std::vector<SessionLog> logs;
    try {
      logs = read_session_log_file(path.string());
    } catch (const LogCorruptionError&) {
      ParticipantRecord broken;
      broken.participant_id = path.stem().string();
      broken.experiment_error = true;
      out.push_back(std::move(broken));
      continue;
    }
    for (auto& rec : group_participants(logs, path.stem().string())) out.push_back(std::move(rec));
  }
  return out;
}

void write_participant(const std::string& path, const ParticipantRecord& record) {
  write_session_log_file(path, record.logs);
}

std::string to_string(ExclusionReason reason) {
  switch (reason) {
    case ExclusionReason::kIncomplete:
      return "Incomplete";
    case ExclusionReason::kExperimentError:
      return "ExperimentError";
    case ExclusionReason::kDoNothingOveruse:
      return "DoNothingOveruse";
    case ExclusionReason::kFasterThanOptimal:
      return "FasterThanOptimal";
  }
  return "Unknown";
}

int do_nothing_count(const SessionLog& log) {
  return static_cast<int>(
      std::count_if(log.steps.begin(), log.steps.end(), [](const StepRecord& s) { return s.feedback.is_do_nothing; }));
}

ExclusionReport exclusion_filter(const std::vector<ParticipantRecord>& records, int optimal_length,
                                 int do_nothing_threshold) {
  ExclusionReport report;
  for (const auto& rec : records) {
    if (rec.experiment_error) {
      report.excluded.push_back({rec.participant_id, -1, ExclusionReason::kExperimentError});
      continue;
    }
    bool replays = true;
    for (const auto& log : rec.logs) {
      try {
        replay(log);
      } catch (const LogCorruptionError&) {
        replays = false;
      }
    }
    if (!replays) {
      report.excluded.push_back({rec.participant_id, -1, ExclusionReason::kExperimentError});
      continue;
    }
    if (!rec.complete()) {
      report.excluded.push_back({rec.participant_id, -1, ExclusionReason::kIncomplete});
      continue;
    }
    const bool overuse = std::any_of(rec.logs.begin(), rec.logs.end(), [&](const SessionLog& l) {
      return do_nothing_count(l) >= do_nothing_threshold;
    });
    if (overuse) {
      report.excluded.push_back({rec.participant_id, -1, ExclusionReason::kDoNothingOveruse});
      continue;
    }
    ParticipantRecord kept = rec;
    kept.logs.clear();
    for (std::size_t i = 0; i < rec.logs.size(); ++i) {
      const auto outcome = rec.logs[i].outcome();
      if (outcome.kind == OutcomeKind::kSuccess && outcome.steps_used < optimal_length) {
        report.excluded.push_back(
            {rec.participant_id, rec.logs[i].meta.value("dog_index", static_cast<int>(i)), ExclusionReason::kFasterThanOptimal});
      } else {
        kept.logs.push_back(rec.logs[i]);
      }
    }
    // Dropped dogs do not make the participant incomplete on a second pass.
    kept.expected_dogs = std::min(kept.expected_dogs, static_cast<int>(kept.logs.size()));
    report.kept.push_back(std::move(kept));
  }
  return report;
}

int optimal_length(const ValueTable& vt, const EnvModel& env) {
  const int rounded = static_cast<int>(std::lround(teaching_dimension(vt, env)));
  return std::max(rounded, shortest_success_path(env, vt.goal(), vt.epsilon()));
}

Interval wilson_interval(int successes, int n) {
  if (n <= 0) throw DomainError("wilson_interval: empty sample");
  const double p = static_cast<double>(successes) / n;
  const double z2 = kZ95 * kZ95;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = kZ95 / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * static_cast<double>(n)));
  return {std::clamp(center - half, 0.0, 1.0), std::clamp(center + half, 0.0, 1.0)};
}

Interval t_interval(const std::vector<double>& sample) {
  if (sample.empty()) throw DomainError("t_interval: empty sample");
  const auto n = static_cast<double>(sample.size());
  const double mean = std::accumulate(sample.begin(), sample.end(), 0.0) / n;
  if (sample.size() == 1) return {mean, mean};
  double ss = 0.0;
  for (double x : sample) ss += (x - mean) * (x - mean);
  const double se = std::sqrt(ss / (n - 1.0) / n);
  const boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(dist, 0.975);
  return {mean - t * se, mean + t * se};
}

std::vector<ConditionStats> compute_condition_stats(const std::vector<ParticipantRecord>& records) {
  std::map<std::tuple<int, std::string, bool>, std::vector<const ParticipantRecord*>> groups;
  for (const auto& rec : records) groups[{tag_rank(rec.condition), rec.condition, !rec.sync}].push_back(&rec);
  std::vector<ConditionStats> rows;
  for (const auto& [key, members] : groups) {
    ConditionStats row;
    row.condition = std::get<1>(key);
    row.sync = !std::get<2>(key);
    std::vector<double> steps;
    for (const auto* rec : members) {
      if (!rec->logs.empty()) ++row.n_subjects;
      for (const auto& log : rec->logs) {
        ++row.n_dogs;
        const auto outcome = log.outcome();
        if (outcome.kind == OutcomeKind::kSuccess) {
          ++row.n_success;
          steps.push_back(outcome.steps_used);
        }
      }
    }
    if (row.n_dogs == 0) continue;
    row.success_rate = 100.0 * row.n_success / row.n_dogs;
    const auto ci = wilson_interval(row.n_success, row.n_dogs);
    row.success_ci = {100.0 * ci.low, 100.0 * ci.high};
    if (!steps.empty()) {
      std::sort(steps.begin(), steps.end());  // order-free sums
      row.mean_steps = std::accumulate(steps.begin(), steps.end(), 0.0) / static_cast<double>(steps.size());
      row.steps_ci = t_interval(steps);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string stats_to_csv(const std::vector<ConditionStats>& rows) {
  std::ostringstream out;
  out << "Learner Type,Slider Sync,# Subjects,# Dogs,Success Rate (%),Success CI Low (%),Success CI High (%),"
         "Avg Steps when Successful,Avg Steps CI Low,Avg Steps CI High\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    out << r.condition << ',' << (r.sync ? "on" : "off") << ',' << r.n_subjects << ',' << r.n_dogs << ','
        << r.success_rate << ',' << r.success_ci.low << ',' << r.success_ci.high << ',';
    if (r.mean_steps) {
      out << *r.mean_steps << ',' << r.steps_ci.low << ',' << r.steps_ci.high;
    } else {
      out << ",,";
    }
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Permutation test

PairFeedback collect_pair_feedback(const std::vector<SessionLog>& logs) {
  PairFeedback out;
  for (const auto& log : logs) {
    for (const auto& step : log.steps) out[{step.s.index, step.a.index}].push_back(step.feedback.value);
  }
  return out;
}

PairFeedback permute_pair_feedback(const PairFeedback& feedback, RandomSource& rng) {
  PairFeedback out = feedback;
  for (auto& [pair, values] : out) {
    for (std::size_t i = values.size(); i > 1; --i) std::swap(values[i - 1], values[rng.uniform_index(i)]);
  }
  return out;
}

EpisodeOutcome replay_recorded_trajectory(const SessionLog& log, const PairFeedback& feedback) {
  LearnerState learner{log.learner_spec, log.initial_q,
                       VisitCounts(log.initial_q.n_states(), log.initial_q.n_actions(), 0)};
  std::map<Pair, std::size_t> cursor;
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const auto& step = log.steps[i];
    const Pair key{step.s.index, step.a.index};
    const auto it = feedback.find(key);
    auto& c = cursor[key];
    if (it == feedback.end() || c >= it->second.size()) {
      throw DomainError("replay_recorded_trajectory: feedback exhausted for a recorded pair");
    }
    apply_update(learner, {step.s, step.a, step.s_next, step.reached_absorb, it->second[c++]});
    if (goal_reached(learner.q, log.goal)) return {OutcomeKind::kSuccess, static_cast<int>(i) + 1};
  }
  if (static_cast<long long>(log.steps.size()) >= log.episode_config.max_steps) {
    return {OutcomeKind::kTimeout, static_cast<int>(log.steps.size())};
  }
  return {OutcomeKind::kInProgress, static_cast<int>(log.steps.size())};
}

PermutationResult permutation_test(const EnvModel& env, const ParticipantRecord& record, int n_sim,
                                   std::uint64_t seed, unsigned threads) {
  if (n_sim < 1) throw DomainError("permutation_test: n_sim must be at least 1");
  const auto feedback = collect_pair_feedback(record.logs);
  if (feedback.empty()) throw DomainError("permutation_test: participant gave no feedback");
  const auto& first = record.logs.front();
  const int budget = first.episode_config.max_steps;
  const double epsilon = first.episode_config.epsilon;
  const auto goal = first.goal;

  PermutationResult result;
  result.participant_id = record.participant_id;
  result.n_simulations = n_sim;
  result.seeds.resize(static_cast<std::size_t>(n_sim));
  std::vector<char> reached(static_cast<std::size_t>(n_sim), 0);
  parallel_for(static_cast<std::size_t>(n_sim), threads, [&](std::size_t i) {
    const auto sim_seed = split_seed(seed, i);
    result.seeds[i] = sim_seed;
    RandomSource rng(sim_seed);
    const auto permuted = permute_pair_feedback(feedback, rng);
    std::map<Pair, std::size_t> cursor;
    auto learner = make_learner(record.spec, env);
    StateId pos = initial_state(env, rng);
    for (int t = 0; t < budget; ++t) {
      const auto choice = select_action(learner, pos, {epsilon}, rng);
      const auto step = step_env(env, pos, choice.action, rng);
      const Pair key{pos.index, choice.action.index};
      double r = 0.0;
      if (const auto it = permuted.find(key); it != permuted.end()) {
        auto& c = cursor[key];
        r = c < it->second.size() ? it->second[c++] : it->second[rng.uniform_index(it->second.size())];
      }
      apply_update(learner, {pos, choice.action, step.next_state, step.reached_absorb, r});
      if (goal_reached(learner.q, goal)) {
        reached[i] = 1;
        break;
      }
      pos = step.next_state;
    }
  });
  result.n_target_reached = static_cast<int>(std::count(reached.begin(), reached.end(), 1));
  return result;
}

// ---------------------------------------------------------------------------
// Synthetic data

SyntheticTeacher parse_synthetic_teacher(const std::string& text) {
  if (text == "optimal") return {SyntheticTeacher::Kind::kOptimal, 0.0};
  if (text == "random") return {SyntheticTeacher::Kind::kRandom, 0.0};
  if (text.rfind("noisy:", 0) == 0) {
    std::size_t used = 0;
    double p = -1.0;
    try {
      p = std::stod(text.substr(6), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size() - 6 || !(p >= 0.0 && p <= 1.0)) {
      throw DomainError("noisy teacher needs p_flip in [0, 1]");
    }
    return {SyntheticTeacher::Kind::kNoisy, p};
  }
  throw DomainError("teacher must be optimal, noisy:<p> or random, got '" + text + "'");
}

namespace {

RankAction mirrored(const RankAction& c, int n_levels) {
  if (c.join) return {n_levels - 1 - c.position, true};
  return {n_levels - c.position, false};
}

class NoisyTeacher final : public TeacherPolicy {
 public:
  NoisyTeacher(RealizedTeacherPolicy policy, double p_flip, std::uint64_t seed)
      : policy_(std::move(policy)), p_flip_(p_flip), rng_(seed) {}

  FeedbackValue feedback(const TeacherObservation& obs) override {
    const bool flip = rng_.bernoulli(p_flip_);
    if (!flip) return optimal_feedback(policy_, obs);
    const auto& vt = *policy_.value_table;
    const auto code = vt.space().encode(abstract(obs.q_snapshot, vt.space().orders()));
    const auto best = vt.choice(obs.s, code, obs.a, obs.s_next);
    const int order = vt.space().order_at(code, obs.s);
    const auto options = vt.space().choices(order, obs.a);
    const int levels = static_cast<int>(std::count_if(options.begin(), options.end(), [](const RankAction& c) { return c.join; }));
    const auto choice = mirrored(best, levels);
    double r = 0.0;
    try {
      r = realize_reward_bounded(policy_.learner_spec, obs.q_snapshot, obs.visits_snapshot, obs, choice, policy_.margin,
                                 policy_.r_max);
    } catch (const InfeasibleRealization& e) {
      r = std::clamp(e.required_reward(), -policy_.r_max, policy_.r_max);
    }
    return r == 0.0 ? FeedbackValue::do_nothing() : FeedbackValue::reward(r);
  }

 private:
  RealizedTeacherPolicy policy_;
  double p_flip_;
  RandomSource rng_;
};

class RandomTeacher final : public TeacherPolicy {
 public:
  RandomTeacher(double r_max, std::uint64_t seed) : r_max_(r_max), rng_(seed) {}
  FeedbackValue feedback(const TeacherObservation&) override {
    return FeedbackValue::reward((2.0 * rng_.uniform01() - 1.0) * r_max_);
  }

 private:
  double r_max_;
  RandomSource rng_;
};

}  // namespace

std::vector<ParticipantRecord> generate_synthetic_logs(const EnvModel& env, const LearnerSpec& spec,
                                                       const SyntheticTeacher& teacher, int n_dogs,
                                                       std::uint64_t seed, std::shared_ptr<const ValueTable> vt,
                                                       const SyntheticOptions& opts) {
  if (n_dogs < 1) throw DomainError("generate_synthetic_logs: n_dogs must be at least 1");
  if (opts.dogs_per_participant < 1) throw DomainError("dogs_per_participant must be at least 1");
  if (teacher.kind != SyntheticTeacher::Kind::kRandom && !vt) {
    throw DomainError("optimal and noisy teachers need a value table");
  }
  if (!std::isfinite(opts.episode.r_max)) throw DomainError("synthetic teachers need a finite r_max");
  validate(spec);
  const RealizedTeacherPolicy policy{vt, opts.margin, opts.episode.r_max, spec, true, true};
  const auto goal = vt ? vt->goal() : dog_goal(env);
  const std::string tag = condition_tag(spec);
  const int per = opts.dogs_per_participant;
  std::vector<ParticipantRecord> out;
  for (int dog = 0; dog < n_dogs; ++dog) {
    const int participant = dog / per;
    const int dog_index = dog % per;
    if (dog_index == 0) {
      ParticipantRecord rec;
      std::ostringstream id;
      id << "synthetic-" << std::setw(5) << std::setfill('0') << participant;
      rec.participant_id = id.str();
      rec.spec = spec;
      rec.condition = tag;
      rec.sync = opts.sync;
      rec.expected_dogs = std::min(per, n_dogs - dog);
      out.push_back(std::move(rec));
    }
    auto& rec = out.back();
    EpisodeConfig cfg = opts.episode;
    cfg.seed = split_seed(seed, static_cast<std::uint64_t>(dog));
    const auto teacher_seed = split_seed(cfg.seed, 0x7eac4e5ULL);
    std::unique_ptr<TeacherPolicy> t;
    switch (teacher.kind) {
      case SyntheticTeacher::Kind::kOptimal:
        t = std::make_unique<OptimalTeacher>(policy);
        break;
      case SyntheticTeacher::Kind::kNoisy:
        t = std::make_unique<NoisyTeacher>(policy, teacher.p_flip, teacher_seed);
        break;
      case SyntheticTeacher::Kind::kRandom:
        t = std::make_unique<RandomTeacher>(cfg.r_max, teacher_seed);
        break;
    }
    auto log = run_episode(env, make_learner(spec, env), *t, cfg, goal);
    log.meta = {{"participant_id", rec.participant_id},
                {"condition", tag},
                {"sync", opts.sync},
                {"dog_index", dog_index},
                {"n_dogs", rec.expected_dogs}};
    rec.logs.push_back(std::move(log));
  }
  return out;
}

}  // namespace teachlab
