#pragma once

#include <filesystem>

#include "json.hpp"
#include "rtbpcl/envs/gmm_env.hpp"
#include "rtbpcl/envs/tabular_env.hpp"

namespace rtbpcl::envs {

// Fixture schemas (also listed in README.md):
//   tabular: {"schema": "rtbpcl.tabular_env/1", "alpha": a,
//             "states": [{"children": [...], "prior": [...]}, ..., {"energy": e}]}
//   gmm:     {"schema": "rtbpcl.gmm_env/1", "alpha": a,
//             "prior": {"means": [[x, y], ...], "weights": [...], "sigma": s}
//                  | "grid": {"side": 5, "lo": -1, "hi": 1, "sigma_factor": 0.04},
//             "target_weights": [...]          (default: ∝ 1..K),
//             "schedule": [ᾱ_1, ..., ᾱ_T] | {"kind": "geometric", "steps": T, "noise_min", "noise_max"}
//                         | {"kind": "cosine", "steps": T}}
// All readers throw ConfigError with the offending field name.

TabularEnv tabular_env_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TabularEnv& env);

GmmDiffusionEnv gmm_env_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GmmDiffusionEnv& env);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace rtbpcl::envs
