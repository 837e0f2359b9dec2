#pragma once

#include <cstdint>
#include <random>

namespace rtbpcl {

using Rng = std::mt19937_64;

// Counter-based stream derivation: the same (run, worker, episode) triple
// always yields the same stream, independent of how other streams were used.
inline Rng make_rng(std::uint64_t run_seed, std::uint64_t worker_id, std::uint64_t episode_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(run_seed), static_cast<std::uint32_t>(run_seed >> 32),
                      static_cast<std::uint32_t>(worker_id), static_cast<std::uint32_t>(worker_id >> 32),
                      static_cast<std::uint32_t>(episode_id), static_cast<std::uint32_t>(episode_id >> 32)};
    return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

}  // namespace rtbpcl
