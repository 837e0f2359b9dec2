#include "rtbpcl/envs/io.hpp"

#include <fstream>
#include <sstream>

#include "rtbpcl/error.hpp"

namespace rtbpcl::envs {

using nlohmann::json;

namespace {

const json& field(const json& j, const char* name) {
    if (!j.is_object() || !j.contains(name)) {
        throw ConfigError(std::string("missing field '") + name + "'");
    }
    return j.at(name);
}

double number(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_number()) {
        throw ConfigError(std::string("field '") + name + "' must be a number");
    }
    return v.get<double>();
}

std::vector<double> numbers(const json& v, const char* name) {
    if (!v.is_array()) {
        throw ConfigError(std::string("field '") + name + "' must be an array of numbers");
    }
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) {
            throw ConfigError(std::string("field '") + name + "' must be an array of numbers");
        }
        out.push_back(x.get<double>());
    }
    return out;
}

void expect_schema(const json& j, const std::string& schema) {
    if (j.contains("schema") && j.at("schema") != schema) {
        throw ConfigError("field 'schema' must be \"" + schema + "\"");
    }
}

}  // namespace

TabularEnv tabular_env_from_json(const json& j) {
    expect_schema(j, "rtbpcl.tabular_env/1");
    const double alpha = number(j, "alpha");
    const json& states = field(j, "states");
    if (!states.is_array()) {
        throw ConfigError("field 'states' must be an array");
    }
    std::vector<TabularStateSpec> specs;
    for (const auto& s : states) {
        TabularStateSpec spec;
        if (s.contains("children")) {
            for (const auto& c : s.at("children")) {
                if (!c.is_number_unsigned()) {
                    throw ConfigError("field 'children' must hold state indices");
                }
                spec.children.push_back(c.get<StateId>());
            }
            spec.prior = numbers(field(s, "prior"), "prior");
        }
        if (s.contains("energy")) {
            spec.energy = number(s, "energy");
        }
        specs.push_back(std::move(spec));
    }
    try {
        return TabularEnv(std::move(specs), alpha);
    } catch (const MalformedEnvError& e) {
        throw ConfigError(std::string("field 'states': ") + e.what());
    }
}

json to_json(const TabularEnv& env) {
    json states = json::array();
    for (const auto& spec : env.to_specs()) {
        json s = json::object();
        if (!spec.children.empty()) {
            s["children"] = spec.children;
            s["prior"] = spec.prior;
        }
        if (spec.energy) {
            s["energy"] = *spec.energy;
        }
        states.push_back(std::move(s));
    }
    return json{{"schema", "rtbpcl.tabular_env/1"}, {"alpha", env.alpha()}, {"states", std::move(states)}};
}

GmmDiffusionEnv gmm_env_from_json(const json& j) {
    expect_schema(j, "rtbpcl.gmm_env/1");
    const double alpha = j.contains("alpha") ? number(j, "alpha") : 1.0;
    Gmm prior;
    if (j.contains("prior")) {
        const json& p = j.at("prior");
        for (const auto& m : field(p, "means")) {
            const auto xy = numbers(m, "means");
            if (xy.size() != 2) {
                throw ConfigError("field 'means' entries must be [x, y]");
            }
            prior.means.push_back(Point{xy[0], xy[1]});
        }
        prior.weights = numbers(field(p, "weights"), "weights");
        prior.sigma = number(p, "sigma");
    } else {
        const json g = j.value("grid", json::object());
        prior = grid_gmm(g.value("side", std::size_t{5}), g.value("lo", -1.0), g.value("hi", 1.0),
                         g.value("sigma_factor", 0.04));
    }
    std::vector<double> target;
    if (j.contains("target_weights")) {
        target = numbers(j.at("target_weights"), "target_weights");
        double total = 0.0;
        for (double w : target) {
            if (!(w >= 0.0)) {
                throw ConfigError("field 'target_weights' entries must be non-negative");
            }
            total += w;
        }
        if (!(total > 0.0)) {
            throw ConfigError("field 'target_weights' must have positive mass");
        }
        // Stored unnormalised in fixtures; normalised on load.
        for (double& w : target) {
            w /= total;
        }
    } else {
        // Weights ∝ 1, 2, ..., K.
        const double k = static_cast<double>(prior.size());
        for (std::size_t i = 0; i < prior.size(); ++i) {
            target.push_back(static_cast<double>(i + 1) / (k * (k + 1.0) / 2.0));
        }
    }
    std::vector<double> schedule;
    const json s = j.value("schedule", json{{"kind", "geometric"}, {"steps", 20}});
    try {
        if (s.is_array()) {
            schedule = numbers(s, "schedule");
        } else if (s.value("kind", std::string("geometric")) == "geometric") {
            schedule = GmmDiffusionEnv::geometric_schedule(s.value("steps", std::size_t{20}),
                                                           s.value("noise_min", 0.02), s.value("noise_max", 0.999));
        } else if (s.value("kind", std::string()) == "cosine") {
            schedule = GmmDiffusionEnv::cosine_schedule(s.value("steps", std::size_t{20}));
        } else {
            throw ConfigError("field 'schedule.kind' must be \"geometric\" or \"cosine\"");
        }
    } catch (const PreconditionError& e) {
        throw ConfigError(std::string("field 'schedule': ") + e.what());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("field 'schedule': ") + e.what());
    }
    try {
        return GmmDiffusionEnv(std::move(prior), std::move(target), std::move(schedule), alpha);
    } catch (const PreconditionError& e) {
        throw ConfigError(std::string("gmm environment: ") + e.what());
    }
}

json to_json(const GmmDiffusionEnv& env) {
    json means = json::array();
    for (const auto& m : env.prior_gmm().means) {
        means.push_back({m[0], m[1]});
    }
    return json{{"schema", "rtbpcl.gmm_env/1"},
                {"alpha", env.alpha()},
                {"prior", {{"means", means}, {"weights", env.prior_gmm().weights}, {"sigma", env.prior_gmm().sigma}}},
                {"target_weights", env.target_weights()},
                {"schedule", env.schedule()}};
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return json::parse(buffer.str());
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace rtbpcl::envs
