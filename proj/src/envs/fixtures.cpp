#include "rtbpcl/envs/fixtures.hpp"

namespace rtbpcl::envs {

TabularEnv t2b3_env(double alpha) {
    std::vector<TabularStateSpec> s(13);
    s[0] = {{1, 2, 3}, {0.5, 0.3, 0.2}, {}};
    s[1] = {{4, 5, 6}, {0.6, 0.3, 0.1}, {}};
    s[2] = {{7, 8, 9}, {0.2, 0.5, 0.3}, {}};
    s[3] = {{10, 11, 12}, {0.25, 0.25, 0.5}, {}};
    const double energies[9] = {0.0, 1.0, 2.0, 0.5, 1.5, -0.5, 3.0, 0.2, 1.2};
    for (int i = 0; i < 9; ++i) {
        s[4 + i].energy = energies[i];
    }
    return TabularEnv(std::move(s), alpha);
}

TabularEnv two_terminal_env(double alpha) {
    std::vector<TabularStateSpec> s(3);
    s[0] = {{1, 2}, {0.5, 0.5}, {}};
    s[1].energy = 0.0;
    s[2].energy = 2.0;
    return TabularEnv(std::move(s), alpha);
}

}  // namespace rtbpcl::envs
