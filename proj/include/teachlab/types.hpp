#pragma once

#include <compare>
#include <cstddef>
#include <functional>

namespace teachlab {

struct StateId {
  int index = 0;
  friend auto operator<=>(StateId, StateId) = default;
};

/// For the dog environment 0 = Left, 1 = Right.
struct ActionId {
  int index = 0;
  friend auto operator<=>(ActionId, ActionId) = default;
};

inline constexpr ActionId kLeft{0};
inline constexpr ActionId kRight{1};

}  // namespace teachlab
