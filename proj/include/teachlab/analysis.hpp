#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "teachlab/env.hpp"
#include "teachlab/learner.hpp"
#include "teachlab/optimal_teacher.hpp"
#include "teachlab/teaching.hpp"

namespace teachlab {

/// Experiment condition tags: Q0, Q1, Q45, Q9 (alpha 0.9, gamma 0 / 0.1 /
/// 0.45 / 0.9), AS1 (kappa 1) and AS2. Other specs fall back to to_string.
std::string condition_tag(const LearnerSpec& spec);
/// Throws DomainError for an unknown tag.
LearnerSpec condition_spec(const std::string& tag);
const std::vector<std::string>& condition_tags();

struct ParticipantRecord {
  std::string participant_id;
  LearnerSpec spec;
  std::string condition;  // tag
  bool sync = false;
  int expected_dogs = 3;
  bool experiment_error = false;
  std::vector<SessionLog> logs;  // one per dog

  /// Every expected dog present and finished.
  bool complete() const;
};

/// Groups logs into participants using the header meta fields
/// (participant_id, condition, sync, n_dogs); logs without a participant id
/// become single-dog participants named after `fallback_id`.
std::vector<ParticipantRecord> group_participants(const std::vector<SessionLog>& logs, const std::string& fallback_id);
/// Every *.ndjson file below `dir`, sorted by path.
std::vector<ParticipantRecord> load_participants(const std::string& dir);
void write_participant(const std::string& path, const ParticipantRecord& record);

enum class ExclusionReason { kIncomplete, kExperimentError, kDoNothingOveruse, kFasterThanOptimal };
std::string to_string(ExclusionReason reason);

struct Exclusion {
  std::string participant_id;
  int dog_index = -1;  // -1: whole participant
  ExclusionReason reason;
};

struct ExclusionReport {
  std::vector<ParticipantRecord> kept;
  std::vector<Exclusion> excluded;
};

inline constexpr int kDefaultDoNothingThreshold = 36;

int do_nothing_count(const SessionLog& log);

/// Participant-level rules first (incomplete, replay failure, a dog with at
/// least `do_nothing_threshold` do-nothing steps), then dogs that succeeded
/// in fewer than `optimal_length` steps are dropped individually.
ExclusionReport exclusion_filter(const std::vector<ParticipantRecord>& records, int optimal_length,
                                 int do_nothing_threshold = kDefaultDoNothingThreshold);

/// Solver-derived optimal length: the teaching dimension rounded to the
/// nearest step. Never below the shortest lucky success path.
int optimal_length(const ValueTable& vt, const EnvModel& env);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

inline constexpr double kZ95 = 1.959963984540054;

/// Wilson score interval at 95%; n must be positive.
Interval wilson_interval(int successes, int n);
/// Student-t 95% interval for the mean; degenerates to the point for n = 1.
Interval t_interval(const std::vector<double>& sample);

struct ConditionStats {
  std::string condition;
  bool sync = false;
  int n_subjects = 0;
  int n_dogs = 0;
  int n_success = 0;
  double success_rate = 0.0;  // percent
  Interval success_ci;        // percent
  std::optional<double> mean_steps;
  Interval steps_ci;
};

/// One row per (condition, sync) group that has at least one dog, in tag
/// order with sync on before off.
std::vector<ConditionStats> compute_condition_stats(const std::vector<ParticipantRecord>& records);
std::string stats_to_csv(const std::vector<ConditionStats>& rows);

// Permutation test ---------------------------------------------------------

using Pair = std::pair<int, int>;  // (state, action)
using PairFeedback = std::map<Pair, std::vector<double>>;

/// Feedback values per (s, a) in the order they were given, across logs.
PairFeedback collect_pair_feedback(const std::vector<SessionLog>& logs);
/// Independent uniform shuffle of every pair's sequence.
PairFeedback permute_pair_feedback(const PairFeedback& feedback, RandomSource& rng);

/// Replays the recorded trajectory of `log`, drawing each step's feedback
/// from `feedback` in order for its (s, a). The identity permutation
/// reproduces the original outcome.
EpisodeOutcome replay_recorded_trajectory(const SessionLog& log, const PairFeedback& feedback);

struct PermutationResult {
  std::string participant_id;
  int n_simulations = 0;
  int n_target_reached = 0;
  std::vector<std::uint64_t> seeds;
};

/// For every simulation: shuffle each pair's feedback, roll out a fresh
/// learner of the participant's condition for the original step budget and
/// feed it the shuffled values pair by pair. Pairs visited more often than
/// the participant fed them recycle uniformly from their multiset; pairs
/// never fed get 0. Simulation i uses split_seed(seed, i).
PermutationResult permutation_test(const EnvModel& env, const ParticipantRecord& record, int n_sim,
                                   std::uint64_t seed, unsigned threads = 0);

// Synthetic data -----------------------------------------------------------

struct SyntheticTeacher {
  enum class Kind { kOptimal, kNoisy, kRandom };
  Kind kind = Kind::kOptimal;
  double p_flip = 0.0;
};

/// "optimal", "noisy:<p_flip>" or "random".
SyntheticTeacher parse_synthetic_teacher(const std::string& text);

struct SyntheticOptions {
  EpisodeConfig episode{0.1, 40, 0, 1.0};
  int dogs_per_participant = 3;
  bool sync = false;
  double margin = 0.1;
};

/// Bounded optimal teacher: saturating realization with feasible fallback.
/// The noisy teacher mirrors the optimal rank choice (Above <-> Below) with
/// probability p_flip; the random teacher draws uniformly from [-r_max, r_max].
std::vector<ParticipantRecord> generate_synthetic_logs(const EnvModel& env, const LearnerSpec& spec,
                                                       const SyntheticTeacher& teacher, int n_dogs,
                                                       std::uint64_t seed, std::shared_ptr<const ValueTable> vt,
                                                       const SyntheticOptions& opts = {});

}  // namespace teachlab
