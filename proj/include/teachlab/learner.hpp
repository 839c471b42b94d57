#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "teachlab/env.hpp"
#include "teachlab/random.hpp"
#include "teachlab/types.hpp"

namespace teachlab {

/// Dense n_states x n_actions table, row-major.
template <typename T>
class StateActionTable {
 public:
  StateActionTable() = default;
  StateActionTable(int n_states, int n_actions, T fill = T{})
      : n_states_(n_states),
        n_actions_(n_actions),
        values_(static_cast<std::size_t>(n_states * n_actions), fill) {}

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }

  T& operator()(StateId s, ActionId a) { return values_[index(s.index, a.index)]; }
  const T& operator()(StateId s, ActionId a) const { return values_[index(s.index, a.index)]; }
  T& at(int s, int a) { return values_[index(s, a)]; }
  const T& at(int s, int a) const { return values_[index(s, a)]; }

  std::span<const T> row(StateId s) const {
    return {values_.data() + index(s.index, 0), static_cast<std::size_t>(n_actions_)};
  }
  const std::vector<T>& data() const { return values_; }

  friend bool operator==(const StateActionTable&, const StateActionTable&) = default;

 private:
  std::size_t index(int s, int a) const { return static_cast<std::size_t>(s * n_actions_ + a); }

  int n_states_ = 0;
  int n_actions_ = 0;
  std::vector<T> values_;
};

using QTable = StateActionTable<double>;
using VisitCounts = StateActionTable<std::uint64_t>;

/// Largest absolute entry-wise difference; tables must have equal shape.
double max_abs_diff(const QTable& a, const QTable& b);

enum class LearningRateSchedule {
  kConstant,
  kInverseVisits,  // alpha_t = 1 / n_t(s, a)
};

struct QLearningParams {
  double alpha = 0.9;
  double gamma = 0.0;
  LearningRateSchedule schedule = LearningRateSchedule::kConstant;
  friend bool operator==(const QLearningParams&, const QLearningParams&) = default;
};

/// Action signaling with summed rewards, stored as log-preferences.
struct As1Params {
  double kappa = 1.0;
  friend bool operator==(const As1Params&, const As1Params&) = default;
};

/// Action signaling with averaged rewards.
struct As2Params {
  friend bool operator==(const As2Params&, const As2Params&) = default;
};

using LearnerSpec = std::variant<QLearningParams, As1Params, As2Params>;

/// Throws DomainError unless 0 < alpha <= 1, 0 <= gamma < 1, kappa > 0.
void validate(const LearnerSpec& spec);

/// Compact form used by the CLI: "q:<alpha>:<gamma>", "as1[:<kappa>]", "as2".
LearnerSpec parse_learner_spec(const std::string& text);
std::string to_string(const LearnerSpec& spec);

nlohmann::json learner_spec_to_json(const LearnerSpec& spec);
LearnerSpec learner_spec_from_json(const nlohmann::json& doc);

struct LearnerState {
  LearnerSpec spec;
  QTable q;  // AS1: log-preferences
  VisitCounts visits;
};

/// All-zero table and counts; for AS1 this is the uniform belief.
LearnerState make_learner(const LearnerSpec& spec, int n_states, int n_actions);
LearnerState make_learner(const LearnerSpec& spec, const EnvModel& env);

struct Experience {
  StateId s;
  ActionId a;
  StateId s_next;
  bool reached_absorb = false;
  double r = 0.0;
};

struct BehaviorPolicyParams {
  double epsilon = 0.1;
};

struct ActionChoice {
  ActionId action;
  bool explored = false;
};

// Each update touches only the (s, a) entry and its visit count. All throw
// DomainError on a non-finite reward or a variant mismatch.
LearnerState q_update(const LearnerState& state, const Experience& e);
LearnerState as1_update(const LearnerState& state, const Experience& e);
LearnerState as2_update(const LearnerState& state, const Experience& e);
LearnerState dispatch_update(const LearnerState& state, const Experience& e);

/// In-place form of dispatch_update.
void apply_update(LearnerState& state, const Experience& e);

/// Post-update value of the (s, a) entry, without touching the state.
double updated_value(const LearnerState& state, const Experience& e);

/// Normalized multinomial belief of an AS1 learner at s (softmax of the log form).
std::vector<double> as1_belief(const LearnerState& state, StateId s);

/// Actions attaining the row maximum, by exact comparison.
std::vector<ActionId> greedy_actions(const QTable& q, StateId s);

/// Epsilon-greedy with uniform tie-breaking. Randomness consumed depends only
/// on the greedy set, so two learners with order-equivalent tables fed the
/// same stream choose the same actions.
ActionChoice select_action(const LearnerState& state, StateId s, const BehaviorPolicyParams& params,
                           RandomSource& rng);

/// Q-learning with gamma = 0 and alpha_t = 1 / n_t(s, a); reproduces AS2.
LearnerSpec as2_as_qlearner();

}  // namespace teachlab
