#pragma once

#include <vector>

#include "ellcharge/abstraction/abstraction.hpp"

namespace fixture {

using ellcharge::abstraction::Alphabet;
using ellcharge::abstraction::Behavior;

inline constexpr int Y0 = 0;
inline constexpr int Y1 = 1;

inline Alphabet halving_alphabet() { return Alphabet({"y0", "y1"}); }

/// The three 4-long behaviors of the halving system.
inline std::vector<Behavior> halving_behaviors()
{
    return {{{Y0, Y0, Y1, Y1}, 0}, {{Y0, Y1, Y1, Y1}, 1}, {{Y1, Y1, Y1, Y1}, 2}};
}

}  // namespace fixture
