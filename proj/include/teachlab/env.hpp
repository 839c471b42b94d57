#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "teachlab/random.hpp"
#include "teachlab/types.hpp"

namespace teachlab {

/// Rewardless MDP (S, A, P, mu0). The absorbing state is not a learnable
/// state: entering it raises a flag and the agent is put back at
/// `absorb_reset` (or redrawn from `initial` when no reset state is given).
class EnvModel {
 public:
  /// `transition[s * n_actions + a]` has n_states + 1 entries; the last is
  /// the probability of entering the absorbing state.
  EnvModel(int n_states, int n_actions, std::vector<std::vector<double>> transition,
           std::vector<double> initial, std::optional<StateId> absorb_reset);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  const std::vector<double>& row(StateId s, ActionId a) const;
  const std::vector<double>& initial() const { return initial_; }
  std::optional<StateId> absorb_reset() const { return absorb_reset_; }
  bool valid(StateId s) const { return s.index >= 0 && s.index < n_states_; }
  bool valid(ActionId a) const { return a.index >= 0 && a.index < n_actions_; }

  /// Absorbing entry index inside a transition row.
  int absorb_index() const { return n_states_; }

 private:
  int n_states_;
  int n_actions_;
  std::vector<std::vector<double>> transition_;
  std::vector<double> initial_;
  std::optional<StateId> absorb_reset_;
};

struct EnvStep {
  StateId next_state;
  bool reached_absorb = false;
};

/// 4 x 1 line of tiles with a door right of tile 3. The dog starts on tile 3.
EnvModel dog_env();

/// Throws DomainError on an invalid state or action.
EnvStep step_env(const EnvModel& env, StateId s, ActionId a, RandomSource& rng);

StateId initial_state(const EnvModel& env, RandomSource& rng);

/// One possible outcome of a transition, used by exact solvers.
struct Outcome {
  StateId next_state;
  bool reached_absorb = false;
  double probability = 0.0;
};

/// Outcomes of (s, a) with positive probability. An absorbing entry without
/// a reset state expands into the initial distribution.
std::vector<Outcome> outcomes(const EnvModel& env, StateId s, ActionId a);

// Config document: {"n_states", "n_actions", "transition": [[...]...],
// "initial": [...], "absorb_reset": int|null}. Rows are ordered s-major.
EnvModel env_from_json(const nlohmann::json& doc);
nlohmann::json env_to_json(const EnvModel& env);
EnvModel load_env(const std::string& path);

}  // namespace teachlab
