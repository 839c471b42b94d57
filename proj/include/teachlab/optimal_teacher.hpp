#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "teachlab/env.hpp"
#include "teachlab/learner.hpp"
#include "teachlab/teaching.hpp"

namespace teachlab {

/// Number of actions at s whose value is strictly greater than q(s, a).
int rank_of(const QTable& q, StateId s, ActionId a);

/// Two-action view of a weak order.
enum class Relation { kTie, kFirstStrict, kSecondStrict };

/// The weak orders over a fixed number of actions, each stored as its rank
/// vector. Index 0 is always the all-tie order.
class WeakOrders {
 public:
  explicit WeakOrders(int n_actions);

  int n_actions() const { return n_actions_; }
  std::size_t size() const { return ranks_.size(); }
  const std::vector<int>& ranks(int order) const { return ranks_[static_cast<std::size_t>(order)]; }
  int index_of(const std::vector<int>& ranks) const;
  int tie_index() const { return 0; }
  /// Order in which `a` alone holds rank 0.
  bool strict_top(int order, ActionId a) const;
  Relation relation(int order) const;
  int from_relation(Relation r) const;

 private:
  int n_actions_;
  std::vector<std::vector<int>> ranks_;
};

/// Where the just-updated entry lands relative to the distinct values of the
/// other actions at its state, sorted from best to worst. With `join` it
/// becomes equal to level `position`; otherwise it sits strictly above level
/// `position` and below level `position - 1`. For two actions the choices
/// are Above, Equal and Below.
struct RankAction {
  int position = 0;
  bool join = false;
  friend bool operator==(const RankAction&, const RankAction&) = default;
};

inline constexpr RankAction kAbove{0, false};
inline constexpr RankAction kEqual{0, true};
inline constexpr RankAction kBelow{1, false};

std::string to_string(const RankAction& choice);

/// Within-state order of a Q table: one weak-order index per state.
struct PreferenceProfile {
  std::vector<int> orders;
  friend bool operator==(const PreferenceProfile&, const PreferenceProfile&) = default;
};

PreferenceProfile abstract(const QTable& q, const WeakOrders& orders);
/// Two-action convenience form.
PreferenceProfile abstract(const QTable& q);
std::vector<Relation> relations(const PreferenceProfile& profile, const WeakOrders& orders);

/// Q and Q' induce the same weak order at every state.
bool order_equivalent(const QTable& a, const QTable& b);

/// Abstract teaching MDP over (learner position, preference profile).
class ProfileSpace {
 public:
  ProfileSpace(int n_states, int n_actions);

  int n_states() const { return n_states_; }
  const WeakOrders& orders() const { return orders_; }
  std::size_t n_profiles() const { return n_profiles_; }
  std::size_t n_abstract_states() const { return n_profiles_ * static_cast<std::size_t>(n_states_); }

  std::size_t encode(const PreferenceProfile& p) const;
  PreferenceProfile decode(std::size_t code) const;
  int order_at(std::size_t code, StateId s) const;
  std::size_t with_order(std::size_t code, StateId s, int order) const;
  bool is_goal(std::size_t code, const TeachingGoal& goal) const;

  /// Choices available for the entry of `taken` under `order`, strict
  /// placements first.
  std::vector<RankAction> choices(int order, ActionId taken) const;
  /// Order that results from applying `choice` to `taken`.
  int apply(int order, ActionId taken, const RankAction& choice) const;

 private:
  int n_states_;
  WeakOrders orders_;
  std::size_t n_profiles_;
  std::vector<std::size_t> stride_;
};

/// Epsilon-greedy action probabilities under a weak order.
std::vector<double> action_probabilities(const WeakOrders& orders, int order, double epsilon);

/// Expected remaining teaching steps for every abstract state plus the
/// teacher's greedy choice for every (abstract state, learner action,
/// next state).
class ValueTable {
 public:
  ValueTable(ProfileSpace space, TeachingGoal goal, double epsilon, std::vector<double> values,
             std::vector<std::int16_t> policy, int iterations, double residual);

  const ProfileSpace& space() const { return space_; }
  const TeachingGoal& goal() const { return goal_; }
  double epsilon() const { return epsilon_; }
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

  double value(StateId pos, const PreferenceProfile& profile) const;
  double value(StateId pos, std::size_t profile_code) const;
  /// Throws DomainError when the state is terminal or the move unreachable.
  RankAction choice(StateId pos, const PreferenceProfile& profile, ActionId a, StateId next) const;
  RankAction choice(StateId pos, std::size_t profile_code, ActionId a, StateId next) const;
  /// All choices for the move, best continuation value first (the stored
  /// optimal choice leads).
  std::vector<RankAction> ranked_choices(StateId pos, std::size_t profile_code, ActionId a, StateId next) const;

  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t policy_index(StateId pos, std::size_t code, ActionId a, StateId next) const;

  ProfileSpace space_;
  TeachingGoal goal_;
  double epsilon_;
  std::vector<double> values_;         // [code * n_states + pos]
  std::vector<std::int16_t> policy_;   // choice index, -1 when unset
  int iterations_;
  double residual_;
};

struct SolverOptions {
  double epsilon = 0.1;
  double tol = 1e-10;
  int max_iters = 1'000'000;
};

/// Jacobi value iteration from V = 0 on the abstract teaching MDP. The
/// teacher picks its rank choice after seeing the learner's action and the
/// environment outcome. Throws SolverError if the residual stays >= tol.
ValueTable solve_value_iteration(const EnvModel& env, const TeachingGoal& goal, const SolverOptions& opts);

/// Expected steps from the initial distribution and the profile of
/// `initial_q` (all ties for the zero table).
double teaching_dimension(const ValueTable& vt, const EnvModel& env);
double teaching_dimension(const ValueTable& vt, const EnvModel& env, const QTable& initial_q);

/// Fewest steps over any lucky run: every positive-probability learner
/// action and environment outcome may be picked. Breadth-first search.
int shortest_success_path(const EnvModel& env, const TeachingGoal& goal, double epsilon);

nlohmann::json value_table_to_json(const ValueTable& vt);

/// Reward that puts q(s, a) at the chosen rank after the learner's own
/// update. Targets: best other value + margin (top), worst other - margin
/// (bottom), the midpoint between two levels, or exactly a level (join).
/// The result is checked against the learner's update rule; throws
/// InfeasibleRealization if no reward within [-r_max, r_max] achieves it.
double realize_reward(const LearnerSpec& spec, const QTable& q, const VisitCounts& visits,
                      const TeacherObservation& obs, const RankAction& choice, double margin, double r_max);

/// realize_reward, except that a strict placement whose exact-margin reward
/// exceeds r_max falls back to the bound itself when that still puts the
/// entry strictly on the chosen side. Joins and truly unreachable ranks throw.
double realize_reward_bounded(const LearnerSpec& spec, const QTable& q, const VisitCounts& visits,
                              const TeacherObservation& obs, const RankAction& choice, double margin, double r_max);

struct RealizedTeacherPolicy {
  std::shared_ptr<const ValueTable> value_table;
  double margin = 0.1;
  double r_max = kUnboundedReward;
  LearnerSpec learner_spec;
  bool saturate_strict = true;      // use realize_reward_bounded
  bool fallback_to_feasible = false;  // on infeasibility, take the best realizable choice
};

/// Throws ContractError when the observation is already at the goal.
FeedbackValue optimal_feedback(const RealizedTeacherPolicy& policy, const TeacherObservation& obs);

/// TeacherPolicy adapter that also tracks the largest |reward| it emitted.
class OptimalTeacher final : public TeacherPolicy {
 public:
  explicit OptimalTeacher(RealizedTeacherPolicy policy) : policy_(std::move(policy)) {}
  FeedbackValue feedback(const TeacherObservation& obs) override;
  double max_abs_reward() const { return max_abs_reward_; }

 private:
  RealizedTeacherPolicy policy_;
  double max_abs_reward_ = 0.0;
};

struct MonteCarloSummary {
  int n_episodes = 0;
  int n_success = 0;
  double success_rate = 0.0;
  double mean_steps = 0.0;  // among successful episodes
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double max_abs_reward = 0.0;
  std::vector<int> steps;   // per episode; -1 for a timeout
};

/// Episode i runs with seed split_seed(cfg.seed, i); results do not depend
/// on `threads`. The CI is mean +/- 1.96 standard errors.
MonteCarloSummary monte_carlo_td(const EnvModel& env, const LearnerSpec& spec, const RealizedTeacherPolicy& policy,
                                 int n_episodes, const EpisodeConfig& cfg, unsigned threads = 0,
                                 std::vector<SessionLog>* logs = nullptr);

struct EquivalenceEntry {
  LearnerSpec spec;
  MonteCarloSummary summary;
};

struct EquivalenceReport {
  std::vector<EquivalenceEntry> entries;
  std::vector<std::vector<bool>> overlap;  // pairwise 95% CI overlap
  bool all_overlap = true;
  bool identical_step_sequences = true;    // every spec needed the same steps per seed
};

EquivalenceReport verify_equivalence(const EnvModel& env, const std::vector<LearnerSpec>& specs,
                                     std::shared_ptr<const ValueTable> vt, int n_episodes, const EpisodeConfig& cfg,
                                     double margin = 0.1, unsigned threads = 0);

}  // namespace teachlab
