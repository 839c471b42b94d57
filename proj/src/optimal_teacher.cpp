#include "teachlab/optimal_teacher.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <limits>
#include <map>

#include "teachlab/errors.hpp"
#include "teachlab/parallel.hpp"

namespace teachlab {

int rank_of(const QTable& q, StateId s, ActionId a) {
  if (s.index < 0 || s.index >= q.n_states() || a.index < 0 || a.index >= q.n_actions()) {
    throw DomainError("rank_of: index out of range");
  }
  const double v = q(s, a);
  int rank = 0;
  for (double x : q.row(s)) rank += x > v ? 1 : 0;
  return rank;
}

// ---------------------------------------------------------------------------
// Weak orders

WeakOrders::WeakOrders(int n_actions) : n_actions_(n_actions) {
  if (n_actions < 1 || n_actions > 6) throw DomainError("WeakOrders: supports 1 to 6 actions");
  std::vector<int> level(static_cast<std::size_t>(n_actions), 0);
  std::vector<std::vector<int>> found;
  // Enumerate level assignments; keep those whose used levels are 0..k.
  while (true) {
    const int top = *std::max_element(level.begin(), level.end());
    bool contiguous = true;
    for (int l = 0; l <= top && contiguous; ++l) {
      contiguous = std::find(level.begin(), level.end(), l) != level.end();
    }
    if (contiguous) {
      std::vector<int> ranks(level.size());
      for (std::size_t a = 0; a < level.size(); ++a) {
        ranks[a] = static_cast<int>(std::count_if(level.begin(), level.end(), [&](int l) { return l < level[a]; }));
      }
      found.push_back(std::move(ranks));
    }
    std::size_t i = 0;
    while (i < level.size() && ++level[i] == n_actions) level[i++] = 0;
    if (i == level.size()) break;
  }
  std::sort(found.begin(), found.end());
  found.erase(std::unique(found.begin(), found.end()), found.end());
  ranks_ = std::move(found);  // the all-zero vector sorts first
}

int WeakOrders::index_of(const std::vector<int>& ranks) const {
  const auto it = std::lower_bound(ranks_.begin(), ranks_.end(), ranks);
  if (it == ranks_.end() || *it != ranks) throw DomainError("not a weak-order rank vector");
  return static_cast<int>(it - ranks_.begin());
}

bool WeakOrders::strict_top(int order, ActionId a) const {
  const auto& r = ranks(order);
  for (int b = 0; b < n_actions_; ++b) {
    if (b == a.index ? r[static_cast<std::size_t>(b)] != 0 : r[static_cast<std::size_t>(b)] == 0) return false;
  }
  return true;
}

Relation WeakOrders::relation(int order) const {
  if (n_actions_ != 2) throw DomainError("relation view needs two actions");
  const auto& r = ranks(order);
  if (r[0] == r[1]) return Relation::kTie;
  return r[0] < r[1] ? Relation::kFirstStrict : Relation::kSecondStrict;
}

int WeakOrders::from_relation(Relation rel) const {
  if (n_actions_ != 2) throw DomainError("relation view needs two actions");
  switch (rel) {
    case Relation::kTie:
      return index_of({0, 0});
    case Relation::kFirstStrict:
      return index_of({0, 1});
    case Relation::kSecondStrict:
      return index_of({1, 0});
  }
  return 0;
}

std::string to_string(const RankAction& c) {
  if (c == kAbove) return "Above";
  if (c == kEqual) return "Equal";
  if (c == kBelow) return "Below";
  return std::string(c.join ? "join:" : "gap:") + std::to_string(c.position);
}

PreferenceProfile abstract(const QTable& q, const WeakOrders& orders) {
  if (q.n_actions() != orders.n_actions()) throw DomainError("abstract: action count mismatch");
  PreferenceProfile p;
  p.orders.reserve(static_cast<std::size_t>(q.n_states()));
  std::vector<int> ranks(static_cast<std::size_t>(q.n_actions()));
  for (int s = 0; s < q.n_states(); ++s) {
    for (int a = 0; a < q.n_actions(); ++a) ranks[static_cast<std::size_t>(a)] = rank_of(q, {s}, {a});
    p.orders.push_back(orders.index_of(ranks));
  }
  return p;
}

PreferenceProfile abstract(const QTable& q) {
  static const WeakOrders two(2);
  return abstract(q, two);
}

std::vector<Relation> relations(const PreferenceProfile& profile, const WeakOrders& orders) {
  std::vector<Relation> out;
  for (int o : profile.orders) out.push_back(orders.relation(o));
  return out;
}

bool order_equivalent(const QTable& a, const QTable& b) {
  if (a.n_states() != b.n_states() || a.n_actions() != b.n_actions()) return false;
  for (int s = 0; s < a.n_states(); ++s) {
    for (int x = 0; x < a.n_actions(); ++x) {
      for (int y = 0; y < a.n_actions(); ++y) {
        if ((a.at(s, x) >= a.at(s, y)) != (b.at(s, x) >= b.at(s, y))) return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Profile space

namespace {

constexpr std::size_t kMaxProfiles = 50'000'000;

// Distinct rank levels of the actions other than `taken`, best first.
std::vector<int> other_levels(const std::vector<int>& ranks, ActionId taken) {
  std::vector<int> levels;
  for (std::size_t b = 0; b < ranks.size(); ++b) {
    if (static_cast<int>(b) != taken.index) levels.push_back(ranks[b]);
  }
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  return levels;
}

}  // namespace

ProfileSpace::ProfileSpace(int n_states, int n_actions) : n_states_(n_states), orders_(n_actions), n_profiles_(1) {
  if (n_states < 1) throw DomainError("ProfileSpace: no states");
  for (int s = 0; s < n_states; ++s) {
    stride_.push_back(n_profiles_);
    if (n_profiles_ > kMaxProfiles / orders_.size()) throw DomainError("abstract teaching MDP too large to solve exactly");
    n_profiles_ *= orders_.size();
  }
}

std::size_t ProfileSpace::encode(const PreferenceProfile& p) const {
  if (p.orders.size() != static_cast<std::size_t>(n_states_)) throw DomainError("profile has wrong length");
  std::size_t code = 0;
  for (std::size_t s = 0; s < p.orders.size(); ++s) code += static_cast<std::size_t>(p.orders[s]) * stride_[s];
  return code;
}

PreferenceProfile ProfileSpace::decode(std::size_t code) const {
  PreferenceProfile p;
  for (int s = 0; s < n_states_; ++s) p.orders.push_back(order_at(code, {s}));
  return p;
}

int ProfileSpace::order_at(std::size_t code, StateId s) const {
  return static_cast<int>((code / stride_[static_cast<std::size_t>(s.index)]) % orders_.size());
}

std::size_t ProfileSpace::with_order(std::size_t code, StateId s, int order) const {
  const auto stride = stride_[static_cast<std::size_t>(s.index)];
  const auto old = static_cast<std::size_t>(order_at(code, s));
  return code - old * stride + static_cast<std::size_t>(order) * stride;
}

bool ProfileSpace::is_goal(std::size_t code, const TeachingGoal& goal) const {
  for (int s = 0; s < n_states_; ++s) {
    if (!orders_.strict_top(order_at(code, {s}), goal.target_action[static_cast<std::size_t>(s)])) return false;
  }
  return true;
}

std::vector<RankAction> ProfileSpace::choices(int order, ActionId taken) const {
  const auto levels = other_levels(orders_.ranks(order), taken);
  const int n = static_cast<int>(levels.size());
  std::vector<RankAction> out;
  for (int p = 0; p <= n; ++p) out.push_back({p, false});
  for (int p = 0; p < n; ++p) out.push_back({p, true});
  return out;
}

int ProfileSpace::apply(int order, ActionId taken, const RankAction& choice) const {
  const auto& ranks = orders_.ranks(order);
  const auto levels = other_levels(ranks, taken);
  const int n = static_cast<int>(levels.size());
  if (choice.position < 0 || choice.position > n || (choice.join && choice.position == n)) {
    throw DomainError("rank choice out of range");
  }
  // Odd keys for the other actions' levels, even keys for the gaps around them.
  std::vector<int> key(ranks.size());
  for (std::size_t b = 0; b < ranks.size(); ++b) {
    if (static_cast<int>(b) == taken.index) {
      key[b] = choice.join ? 2 * choice.position + 1 : 2 * choice.position;
    } else {
      const auto pos = std::lower_bound(levels.begin(), levels.end(), ranks[b]) - levels.begin();
      key[b] = 2 * static_cast<int>(pos) + 1;
    }
  }
  std::vector<int> next(ranks.size());
  for (std::size_t a = 0; a < ranks.size(); ++a) {
    next[a] = static_cast<int>(std::count_if(key.begin(), key.end(), [&](int k) { return k < key[a]; }));
  }
  return orders_.index_of(next);
}

std::vector<double> action_probabilities(const WeakOrders& orders, int order, double epsilon) {
  const auto& ranks = orders.ranks(order);
  const auto n = static_cast<double>(ranks.size());
  const auto top = static_cast<double>(std::count(ranks.begin(), ranks.end(), 0));
  std::vector<double> p(ranks.size());
  for (std::size_t a = 0; a < ranks.size(); ++a) {
    p[a] = epsilon / n + (ranks[a] == 0 ? (1.0 - epsilon) / top : 0.0);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Value table

ValueTable::ValueTable(ProfileSpace space, TeachingGoal goal, double epsilon, std::vector<double> values,
                       std::vector<std::int16_t> policy, int iterations, double residual)
    : space_(std::move(space)),
      goal_(std::move(goal)),
      epsilon_(epsilon),
      values_(std::move(values)),
      policy_(std::move(policy)),
      iterations_(iterations),
      residual_(residual) {}

double ValueTable::value(StateId pos, std::size_t code) const {
  if (pos.index < 0 || pos.index >= space_.n_states() || code >= space_.n_profiles()) {
    throw DomainError("value: abstract state out of range");
  }
  return values_[code * static_cast<std::size_t>(space_.n_states()) + static_cast<std::size_t>(pos.index)];
}

double ValueTable::value(StateId pos, const PreferenceProfile& profile) const {
  return value(pos, space_.encode(profile));
}

std::size_t ValueTable::policy_index(StateId pos, std::size_t code, ActionId a, StateId next) const {
  const auto ns = static_cast<std::size_t>(space_.n_states());
  const auto na = static_cast<std::size_t>(space_.orders().n_actions());
  return ((code * ns + static_cast<std::size_t>(pos.index)) * na + static_cast<std::size_t>(a.index)) * ns +
         static_cast<std::size_t>(next.index);
}

RankAction ValueTable::choice(StateId pos, std::size_t code, ActionId a, StateId next) const {
  if (pos.index < 0 || pos.index >= space_.n_states() || next.index < 0 || next.index >= space_.n_states() ||
      a.index < 0 || a.index >= space_.orders().n_actions() || code >= space_.n_profiles()) {
    throw DomainError("choice: index out of range");
  }
  const auto idx = policy_[policy_index(pos, code, a, next)];
  if (idx < 0) throw DomainError("choice: terminal state or unreachable move");
  const int order = space_.order_at(code, pos);
  return space_.choices(order, a)[static_cast<std::size_t>(idx)];
}

std::vector<RankAction> ValueTable::ranked_choices(StateId pos, std::size_t code, ActionId a, StateId next) const {
  const RankAction best = choice(pos, code, a, next);
  const int order = space_.order_at(code, pos);
  std::vector<std::pair<double, RankAction>> scored;
  for (const auto& c : space_.choices(order, a)) {
    const auto next_code = space_.with_order(code, pos, space_.apply(order, a, c));
    const double cont = c == best ? -1.0 : space_.is_goal(next_code, goal_) ? 0.0 : value(next, next_code);
    scored.emplace_back(cont, c);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<RankAction> out;
  for (const auto& [v, c] : scored) out.push_back(c);
  return out;
}

RankAction ValueTable::choice(StateId pos, const PreferenceProfile& profile, ActionId a, StateId next) const {
  return choice(pos, space_.encode(profile), a, next);
}

ValueTable solve_value_iteration(const EnvModel& env, const TeachingGoal& goal, const SolverOptions& opts) {
  if (!(opts.epsilon >= 0.0 && opts.epsilon < 1.0)) throw DomainError("solver: epsilon must lie in [0, 1)");
  if (!(opts.tol > 0.0)) throw DomainError("solver: tol must be positive");
  if (goal.target_action.size() != static_cast<std::size_t>(env.n_states())) {
    throw DomainError("solver: goal must cover every state");
  }
  ProfileSpace space(env.n_states(), env.n_actions());
  const auto& orders = space.orders();
  const int ns = env.n_states();
  const int na = env.n_actions();
  const std::size_t n_codes = space.n_profiles();

  std::vector<char> goal_code(n_codes);
  for (std::size_t c = 0; c < n_codes; ++c) goal_code[c] = space.is_goal(c, goal) ? 1 : 0;

  std::vector<std::vector<double>> probs;
  std::vector<std::vector<std::vector<RankAction>>> choice_sets;  // [order][a]
  std::vector<std::vector<std::vector<int>>> next_orders;        // [order][a][choice]
  for (int o = 0; o < static_cast<int>(orders.size()); ++o) {
    probs.push_back(action_probabilities(orders, o, opts.epsilon));
    choice_sets.emplace_back();
    next_orders.emplace_back();
    for (int a = 0; a < na; ++a) {
      choice_sets.back().push_back(space.choices(o, {a}));
      std::vector<int> nexts;
      for (const auto& c : choice_sets.back().back()) nexts.push_back(space.apply(o, {a}, c));
      next_orders.back().push_back(std::move(nexts));
    }
  }
  std::vector<std::vector<Outcome>> outs(static_cast<std::size_t>(ns * na));
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) outs[static_cast<std::size_t>(s * na + a)] = outcomes(env, {s}, {a});
  }

  const std::size_t n_values = n_codes * static_cast<std::size_t>(ns);
  std::vector<double> v(n_values, 0.0);
  std::vector<double> next_v(n_values, 0.0);
  std::vector<std::int16_t> policy(n_values * static_cast<std::size_t>(na * ns), -1);

  auto backup = [&](std::size_t code, int pos, bool record) {
    const int order = space.order_at(code, {pos});
    double total = 1.0;
    for (int a = 0; a < na; ++a) {
      const double pa = probs[static_cast<std::size_t>(order)][static_cast<std::size_t>(a)];
      if (pa == 0.0) continue;
      const auto& nexts = next_orders[static_cast<std::size_t>(order)][static_cast<std::size_t>(a)];
      for (const auto& o : outs[static_cast<std::size_t>(pos * na + a)]) {
        double best = std::numeric_limits<double>::infinity();
        int best_idx = -1;
        for (std::size_t k = 0; k < nexts.size(); ++k) {
          const auto next_code = space.with_order(code, {pos}, nexts[k]);
          const double cont =
              goal_code[next_code] ? 0.0 : v[next_code * static_cast<std::size_t>(ns) + static_cast<std::size_t>(o.next_state.index)];
          if (cont < best) {
            best = cont;
            best_idx = static_cast<int>(k);
          }
        }
        total += pa * o.probability * best;
        if (record) {
          const auto idx = ((code * static_cast<std::size_t>(ns) + static_cast<std::size_t>(pos)) * static_cast<std::size_t>(na) +
                            static_cast<std::size_t>(a)) * static_cast<std::size_t>(ns) +
                           static_cast<std::size_t>(o.next_state.index);
          policy[idx] = static_cast<std::int16_t>(best_idx);
        }
      }
    }
    return total;
  };

  double residual = std::numeric_limits<double>::infinity();
  int iter = 0;
  while (iter < opts.max_iters) {
    ++iter;
    residual = 0.0;
    for (std::size_t code = 0; code < n_codes; ++code) {
      for (int pos = 0; pos < ns; ++pos) {
        const auto i = code * static_cast<std::size_t>(ns) + static_cast<std::size_t>(pos);
        next_v[i] = goal_code[code] ? 0.0 : backup(code, pos, false);
        residual = std::max(residual, std::abs(next_v[i] - v[i]));
      }
    }
    v.swap(next_v);
    if (residual < opts.tol) break;
  }
  if (!(residual < opts.tol)) {
    throw SolverError("value iteration did not converge in " + std::to_string(opts.max_iters) +
                          " iterations (residual " + std::to_string(residual) + ")",
                      residual);
  }
  for (std::size_t code = 0; code < n_codes; ++code) {
    if (goal_code[code]) continue;
    for (int pos = 0; pos < ns; ++pos) backup(code, pos, true);
  }
  return ValueTable(std::move(space), goal, opts.epsilon, std::move(v), std::move(policy), iter, residual);
}

double teaching_dimension(const ValueTable& vt, const EnvModel& env, const QTable& initial_q) {
  const auto code = vt.space().encode(abstract(initial_q, vt.space().orders()));
  double td = 0.0;
  for (int s = 0; s < env.n_states(); ++s) {
    const double mu = env.initial()[static_cast<std::size_t>(s)];
    if (mu > 0.0) td += mu * vt.value({s}, code);
  }
  return td;
}

double teaching_dimension(const ValueTable& vt, const EnvModel& env) {
  return teaching_dimension(vt, env, QTable(env.n_states(), env.n_actions(), 0.0));
}

int shortest_success_path(const EnvModel& env, const TeachingGoal& goal, double epsilon) {
  ProfileSpace space(env.n_states(), env.n_actions());
  const auto& orders = space.orders();
  const int ns = env.n_states();
  const std::size_t start_code = 0;  // all ties
  if (space.is_goal(start_code, goal)) return 0;
  std::vector<int> dist(space.n_abstract_states(), -1);
  std::deque<std::pair<std::size_t, int>> frontier;
  for (int s = 0; s < ns; ++s) {
    if (env.initial()[static_cast<std::size_t>(s)] > 0.0) {
      dist[start_code * static_cast<std::size_t>(ns) + static_cast<std::size_t>(s)] = 0;
      frontier.emplace_back(start_code, s);
    }
  }
  while (!frontier.empty()) {
    const auto [code, pos] = frontier.front();
    frontier.pop_front();
    const int d = dist[code * static_cast<std::size_t>(ns) + static_cast<std::size_t>(pos)];
    const int order = space.order_at(code, {pos});
    const auto p = action_probabilities(orders, order, epsilon);
    for (int a = 0; a < env.n_actions(); ++a) {
      if (p[static_cast<std::size_t>(a)] == 0.0) continue;
      for (const auto& o : outcomes(env, {pos}, {a})) {
        for (const auto& c : space.choices(order, {a})) {
          const auto next_code = space.with_order(code, {pos}, space.apply(order, {a}, c));
          if (space.is_goal(next_code, goal)) return d + 1;
          const auto i = next_code * static_cast<std::size_t>(ns) + static_cast<std::size_t>(o.next_state.index);
          if (dist[i] < 0) {
            dist[i] = d + 1;
            frontier.emplace_back(next_code, o.next_state.index);
          }
        }
      }
    }
  }
  throw SolverError("goal unreachable from the initial profile", 0.0);
}

nlohmann::json value_table_to_json(const ValueTable& vt) {
  const auto& space = vt.space();
  const auto& orders = space.orders();
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t code = 0; code < space.n_profiles(); ++code) {
    const auto profile = space.decode(code);
    nlohmann::json prof = nlohmann::json::array();
    for (int o : profile.orders) prof.push_back(orders.ranks(o));
    const bool terminal = space.is_goal(code, vt.goal());
    for (int pos = 0; pos < space.n_states(); ++pos) {
      nlohmann::json choices = nlohmann::json::array();
      if (!terminal) {
        for (int a = 0; a < orders.n_actions(); ++a) {
          for (int next = 0; next < space.n_states(); ++next) {
            try {
              choices.push_back({{"a", a}, {"next", next}, {"choice", to_string(vt.choice({pos}, code, {a}, {next}))}});
            } catch (const DomainError&) {
              // unreachable (a, next) pair
            }
          }
        }
      }
      entries.push_back({{"pos", pos}, {"profile_ranks", prof}, {"value", vt.value({pos}, code)}, {"choices", choices}});
    }
  }
  std::vector<int> targets;
  for (auto a : vt.goal().target_action) targets.push_back(a.index);
  return {{"epsilon", vt.epsilon()},
          {"iterations", vt.iterations()},
          {"residual", vt.residual()},
          {"n_states", space.n_states()},
          {"n_actions", orders.n_actions()},
          {"goal", targets},
          {"entries", entries}};
}

// ---------------------------------------------------------------------------
// Reward realization

namespace {

std::uint64_t order_key(double x) {
  const auto u = std::bit_cast<std::uint64_t>(x);
  return (u >> 63) ? ~u : (u | 0x8000000000000000ULL);
}

double from_order_key(std::uint64_t k) {
  const auto u = (k >> 63) ? (k & 0x7fffffffffffffffULL) : ~k;
  return std::bit_cast<double>(u);
}

}  // namespace

double realize_reward(const LearnerSpec& spec, const QTable& q, const VisitCounts& visits,
                      const TeacherObservation& obs, const RankAction& choice, double margin, double r_max) {
  if (!(margin > 0.0)) throw DomainError("realize_reward: margin must be positive");
  if (std::isfinite(r_max) && !(margin < r_max)) throw DomainError("realize_reward: margin must be below r_max");
  validate(spec);
  const StateId s = obs.s;
  const ActionId a = obs.a;
  std::vector<double> levels;
  for (int b = 0; b < q.n_actions(); ++b) {
    if (b != a.index) levels.push_back(q(s, ActionId{b}));
  }
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  const int n = static_cast<int>(levels.size());
  if (choice.position < 0 || choice.position > n || (choice.join && choice.position == n)) {
    throw DomainError("realize_reward: rank choice out of range");
  }
  const auto p = static_cast<std::size_t>(choice.position);
  double target = q(s, a);
  if (choice.join) {
    target = levels[p];
  } else if (n > 0 && choice.position == 0) {
    target = levels.front() + margin;
  } else if (n > 0 && choice.position == n) {
    target = levels.back() - margin;
  } else if (n > 0) {
    target = 0.5 * (levels[p - 1] + levels[p]);
  }
  auto satisfied = [&](double v) {
    if (choice.join) return v == levels[p];
    return (choice.position == 0 || v < levels[p - 1]) && (choice.position == n || v > levels[p]);
  };

  const LearnerState state{spec, q, visits};
  const double current = q(s, a);
  const double bootstrap = [&] {
    if (obs.reached_absorb) return 0.0;
    const auto row = q.row(obs.s_next);
    return *std::max_element(row.begin(), row.end());
  }();
  const double closed_form = std::visit(
      [&](const auto& params) -> double {
        using T = std::decay_t<decltype(params)>;
        if constexpr (std::is_same_v<T, QLearningParams>) {
          const double alpha = params.schedule == LearningRateSchedule::kInverseVisits
                                   ? 1.0 / static_cast<double>(visits(s, a) + 1)
                                   : params.alpha;
          return (target - (1.0 - alpha) * current) / alpha - params.gamma * bootstrap;
        } else if constexpr (std::is_same_v<T, As1Params>) {
          return (target - current) / params.kappa;
        } else {
          const double count = static_cast<double>(visits(s, a) + 1);
          return count * target - (count - 1.0) * current;
        }
      },
      spec);
  auto apply = [&](double r) { return updated_value(state, {s, a, obs.s_next, obs.reached_absorb, r}); };

  double r = closed_form;
  if (!std::isfinite(r)) throw InfeasibleRealization("realized reward is not finite", r);
  if (!satisfied(apply(r))) {
    // Rounding put the entry on the wrong side; search the floats near the
    // closed form for the smallest reward whose update reaches the target.
    // The update is nondecreasing in r for every variant.
    double lo = r;
    double hi = r;
    double width = std::max(std::abs(r), 1.0) * 1e-12;
    for (int i = 0; i < 200 && apply(lo) >= target; ++i, width *= 2) lo = r - width;
    width = std::max(std::abs(r), 1.0) * 1e-12;
    for (int i = 0; i < 200 && apply(hi) < target; ++i, width *= 2) hi = r + width;
    auto klo = order_key(lo);
    auto khi = order_key(hi);
    while (khi - klo > 1) {
      const auto mid = klo + (khi - klo) / 2;
      if (apply(from_order_key(mid)) >= target) {
        khi = mid;
      } else {
        klo = mid;
      }
    }
    r = from_order_key(khi);
    if (!satisfied(apply(r))) {
      throw InfeasibleRealization("no reward places the entry at " + to_string(choice) + " in floating point", r);
    }
  }
  if (std::abs(r) > r_max) {
    throw InfeasibleRealization("choice " + to_string(choice) + " needs reward " + std::to_string(r) +
                                    " beyond r_max " + std::to_string(r_max),
                                r);
  }
  return r;
}

double realize_reward_bounded(const LearnerSpec& spec, const QTable& q, const VisitCounts& visits,
                              const TeacherObservation& obs, const RankAction& choice, double margin, double r_max) {
  try {
    return realize_reward(spec, q, visits, obs, choice, margin, r_max);
  } catch (const InfeasibleRealization& e) {
    if (choice.join || !std::isfinite(r_max)) throw;
    // A strict placement only needs some positive margin: try the bound on
    // the side the exact-margin reward asked for.
    const double r = e.required_reward() > 0.0 ? r_max : -r_max;
    const LearnerState state{spec, q, visits};
    const double v = updated_value(state, {obs.s, obs.a, obs.s_next, obs.reached_absorb, r});
    QTable after = q;
    after(obs.s, obs.a) = v;
    const int wanted = choice.position;
    bool strict = rank_of(after, obs.s, obs.a) == wanted;
    for (int b = 0; b < q.n_actions() && strict; ++b) {
      if (b != obs.a.index && q(obs.s, ActionId{b}) == v) strict = false;
    }
    if (!strict) throw;
    return r;
  }
}

FeedbackValue optimal_feedback(const RealizedTeacherPolicy& policy, const TeacherObservation& obs) {
  const auto& vt = *policy.value_table;
  const auto code = vt.space().encode(abstract(obs.q_snapshot, vt.space().orders()));
  if (vt.space().is_goal(code, vt.goal())) throw ContractError("optimal_feedback: learner already at the goal");
  auto realize = [&](const RankAction& c) {
    return policy.saturate_strict ? realize_reward_bounded(policy.learner_spec, obs.q_snapshot, obs.visits_snapshot,
                                                           obs, c, policy.margin, policy.r_max)
                                  : realize_reward(policy.learner_spec, obs.q_snapshot, obs.visits_snapshot, obs, c,
                                                   policy.margin, policy.r_max);
  };
  double r = 0.0;
  if (!policy.fallback_to_feasible) {
    r = realize(vt.choice(obs.s, code, obs.a, obs.s_next));
  } else {
    const auto ranked = vt.ranked_choices(obs.s, code, obs.a, obs.s_next);
    std::exception_ptr first_error;
    bool done = false;
    for (const auto& c : ranked) {
      try {
        r = realize(c);
        done = true;
        break;
      } catch (const InfeasibleRealization&) {
        if (!first_error) first_error = std::current_exception();
      }
    }
    if (!done) std::rethrow_exception(first_error);
  }
  return r == 0.0 ? FeedbackValue::do_nothing() : FeedbackValue::reward(r);
}

FeedbackValue OptimalTeacher::feedback(const TeacherObservation& obs) {
  auto fb = optimal_feedback(policy_, obs);
  max_abs_reward_ = std::max(max_abs_reward_, std::abs(fb.value));
  return fb;
}

// ---------------------------------------------------------------------------
// Monte Carlo

MonteCarloSummary monte_carlo_td(const EnvModel& env, const LearnerSpec& spec, const RealizedTeacherPolicy& policy,
                                 int n_episodes, const EpisodeConfig& cfg, unsigned threads,
                                 std::vector<SessionLog>* logs) {
  if (n_episodes < 1) throw DomainError("monte_carlo_td: n_episodes must be at least 1");
  if (!policy.value_table) throw DomainError("monte_carlo_td: policy has no value table");
  validate(spec);
  RealizedTeacherPolicy matched = policy;
  matched.learner_spec = spec;
  const auto n = static_cast<std::size_t>(n_episodes);
  std::vector<int> steps(n, -1);
  std::vector<double> max_reward(n, 0.0);
  if (logs) logs->assign(n, SessionLog{});
  parallel_for(n, threads, [&](std::size_t i) {
    EpisodeConfig episode_cfg = cfg;
    episode_cfg.seed = split_seed(cfg.seed, i);
    OptimalTeacher teacher(matched);
    auto log = run_episode(env, make_learner(spec, env), teacher, episode_cfg, matched.value_table->goal());
    const auto outcome = log.outcome();
    steps[i] = outcome.kind == OutcomeKind::kSuccess ? outcome.steps_used : -1;
    max_reward[i] = teacher.max_abs_reward();
    if (logs) (*logs)[i] = std::move(log);
  });

  MonteCarloSummary out;
  out.n_episodes = n_episodes;
  out.steps = std::move(steps);
  double sum = 0.0;
  for (int x : out.steps) {
    if (x >= 0) {
      ++out.n_success;
      sum += x;
    }
  }
  out.success_rate = static_cast<double>(out.n_success) / n_episodes;
  out.max_abs_reward = *std::max_element(max_reward.begin(), max_reward.end());
  if (out.n_success > 0) {
    out.mean_steps = sum / out.n_success;
    double ss = 0.0;
    for (int x : out.steps) {
      if (x >= 0) ss += (x - out.mean_steps) * (x - out.mean_steps);
    }
    out.std_error = out.n_success > 1 ? std::sqrt(ss / (out.n_success - 1) / out.n_success) : 0.0;
  }
  out.ci_low = out.mean_steps - 1.96 * out.std_error;
  out.ci_high = out.mean_steps + 1.96 * out.std_error;
  return out;
}

EquivalenceReport verify_equivalence(const EnvModel& env, const std::vector<LearnerSpec>& specs,
                                     std::shared_ptr<const ValueTable> vt, int n_episodes, const EpisodeConfig& cfg,
                                     double margin, unsigned threads) {
  EquivalenceReport report;
  for (const auto& spec : specs) {
    RealizedTeacherPolicy policy{vt, margin, cfg.r_max, spec};
    report.entries.push_back({spec, monte_carlo_td(env, spec, policy, n_episodes, cfg, threads)});
  }
  const auto k = report.entries.size();
  report.overlap.assign(k, std::vector<bool>(k, true));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto& a = report.entries[i].summary;
      const auto& b = report.entries[j].summary;
      const bool overlap = a.ci_low <= b.ci_high && b.ci_low <= a.ci_high;
      report.overlap[i][j] = overlap;
      report.all_overlap = report.all_overlap && overlap;
      report.identical_step_sequences = report.identical_step_sequences && a.steps == b.steps;
    }
  }
  return report;
}

}  // namespace teachlab
