#pragma once

#include "rtbpcl/envs/tabular_env.hpp"

namespace rtbpcl::envs {

// Depth 2, branching 3: root -> states 1..3 -> terminals 4..12.
TabularEnv t2b3_env(double alpha = 1.0);

// One decision between two terminals with prior (1/2, 1/2) and E = (0, 2).
TabularEnv two_terminal_env(double alpha = 1.0);

}  // namespace rtbpcl::envs
