#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rlchain/mdp.hpp"

namespace rlchain {

/**
 * Small reference MDPs, all with gamma = 0.5:
 *   M1  one state, reward 1
 *   M2  one state, reward 0 or 2 with probability 1/2 each
 *   M3  one state, reward 0
 *   M4  decision state with arms paying 1 and 0, both into an absorbing zero-reward state
 *   M5  as M4 with arm 0 paying 0 or 2 (1/2 each) and arm 1 paying 0.5
 *   M6  one state, two arms each paying 0 or 2 (1/2 each)
 * Every state has the same number of actions; the absorbing state of M4 and
 * M5 has two identical self-loop actions.
 */
FiniteMdp builtin_mdp(std::string_view name);
std::vector<std::string> builtin_names();

/// Transition rows from normalized exponentials, two-atom rewards in [0,1], rmax = 1.
FiniteMdp random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed);

}  // namespace rlchain
