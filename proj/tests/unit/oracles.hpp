#pragma once

// Reference implementations kept apart from the library. They share no code
// with src/ beyond the QTable container used to hand results across.

#include <array>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "teachlab/learner.hpp"

namespace oracle {

// Dog world spelled out by hand: 4 tiles, door right of tile 3 sends the
// dog back to tile 3. Relations per tile: 'T' tie, 'L' left strictly
// preferred, 'R' right strictly preferred.
using Profile = std::array<char, 4>;

inline int dog_move(int pos, int action) {
  if (action == 0) return pos == 0 ? 0 : pos - 1;
  return pos == 3 ? 3 : pos + 1;
}

inline bool all_right(const Profile& p) {
  for (char c : p) {
    if (c != 'R') return false;
  }
  return true;
}

inline double prob_action(char rel, int action, double eps) {
  if (rel == 'T') return 0.5;
  const bool preferred = (rel == 'L' && action == 0) || (rel == 'R' && action == 1);
  return preferred ? 1.0 - eps / 2.0 : eps / 2.0;
}

/// Finite-horizon expectimax: expected steps to all-right when the teacher
/// may set the visited tile's relation freely after each move, truncated
/// after `horizon` moves (remaining cost 0).
class DogExpectimax {
 public:
  explicit DogExpectimax(double eps) : eps_(eps) {}

  double value(int pos, const Profile& p, int horizon) {
    if (all_right(p)) return 0.0;
    if (horizon == 0) return 0.0;
    const auto key = std::make_tuple(pos, std::string(p.begin(), p.end()), horizon);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    double total = 1.0;
    for (int a = 0; a < 2; ++a) {
      const double pa = prob_action(p[static_cast<std::size_t>(pos)], a, eps_);
      if (pa == 0.0) continue;
      const int next = dog_move(pos, a);
      double best = 1e300;
      for (char rel : {'L', 'R', 'T'}) {
        Profile q = p;
        q[static_cast<std::size_t>(pos)] = rel;
        best = std::min(best, value(next, q, horizon - 1));
      }
      total += pa * best;
    }
    memo_[key] = total;
    return total;
  }

 private:
  double eps_;
  std::map<std::tuple<int, std::string, int>, double> memo_;
};

/// A concrete table realizing a profile: (0,0) tie, (1,0) left, (0,1) right.
inline teachlab::QTable dog_table(const Profile& p) {
  teachlab::QTable q(4, 2);
  for (int s = 0; s < 4; ++s) {
    if (p[static_cast<std::size_t>(s)] == 'L') q.at(s, 0) = 1.0;
    if (p[static_cast<std::size_t>(s)] == 'R') q.at(s, 1) = 1.0;
  }
  return q;
}

inline double mean(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace oracle
