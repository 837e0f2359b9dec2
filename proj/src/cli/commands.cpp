#include "rtbpcl/cli/commands.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <variant>

#include "rtbpcl/cli/checks.hpp"
#include "rtbpcl/cli/figure.hpp"
#include "rtbpcl/envs/fixtures.hpp"
#include "rtbpcl/envs/gmm_env.hpp"
#include "rtbpcl/envs/io.hpp"
#include "rtbpcl/error.hpp"
#include "rtbpcl/oracle/oracle.hpp"
#include "rtbpcl/train/train.hpp"

namespace rtbpcl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string git_blob_sha1(const std::string& content) {
    const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, header.data(), header.size()) != 1 ||
        EVP_DigestUpdate(ctx, content.data(), content.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &length) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("SHA-1 digest failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw Error("failed writing " + path.string());
    }
}

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

// Line of the first `"key":` matching the last component of a dotted field path.
std::size_t line_of_field(const std::string& text, const std::string& field) {
    const std::string key = "\"" + field.substr(field.rfind('.') == std::string::npos ? 0 : field.rfind('.') + 1) + "\"";
    const auto pos = text.find(key);
    return pos == std::string::npos ? 1 : line_of_offset(text, pos);
}

using AnyEnv = std::variant<envs::TabularEnv, envs::GmmDiffusionEnv>;

AnyEnv env_from_fixture(const std::string& name) {
    if (name == "t2b3") {
        return envs::t2b3_env();
    }
    if (name == "two-terminal") {
        return envs::two_terminal_env();
    }
    if (name == "gmm25") {
        return envs::GmmDiffusionEnv::fixture();
    }
    throw ConfigError("unknown fixture '" + name + "' (expected t2b3, two-terminal or gmm25)", "env.fixture");
}

AnyEnv resolve_env(const json& config, const fs::path& config_dir) {
    if (!config.contains("env") || !config["env"].is_object()) {
        throw ConfigError("must be an object naming a fixture, or a kind with a path or inline definition", "env");
    }
    const json& e = config["env"];
    if (e.contains("fixture")) {
        if (!e["fixture"].is_string()) {
            throw ConfigError("must be a string", "env.fixture");
        }
        return env_from_fixture(e["fixture"].get<std::string>());
    }
    const std::string kind = e.value("kind", std::string());
    json body;
    if (e.contains("inline")) {
        body = e["inline"];
    } else if (e.contains("path") && e["path"].is_string()) {
        fs::path p = e["path"].get<std::string>();
        if (p.is_relative()) {
            p = config_dir / p;
        }
        body = envs::read_json_file(p);
    } else {
        throw ConfigError("needs \"fixture\", \"path\" or \"inline\"", "env");
    }
    try {
        if (kind == "tabular") {
            return envs::tabular_env_from_json(body);
        }
        if (kind == "gmm") {
            return envs::gmm_env_from_json(body);
        }
    } catch (const ConfigError& ex) {
        throw ConfigError(ex.what(), "env");
    }
    throw ConfigError("must be \"tabular\" or \"gmm\"", "env.kind");
}

}  // namespace

std::string git_blob_sha1(const fs::path& file) { return git_blob_sha1(read_text(file)); }

json to_json(const RunManifest& m) {
    json files = json::array();
    for (const auto& f : m.files) {
        files.push_back({{"path", f.path}, {"sha1", f.sha1}});
    }
    return {{"schema", "rtbpcl.manifest/1"}, {"command", m.command}, {"config_path", m.config_path},
            {"config", m.config},           {"seed", m.seed},        {"out_dir", m.out_dir},
            {"status", m.status},           {"files", files}};
}

void write_manifest(const fs::path& out_dir, RunManifest manifest) {
    for (auto& f : manifest.files) {
        f.sha1 = git_blob_sha1(out_dir / f.path);
    }
    const fs::path tmp = out_dir / "manifest.json.tmp";
    write_text(tmp, to_json(manifest).dump(2) + "\n");
    fs::rename(tmp, out_dir / "manifest.json");
}

int cmd_train(const fs::path& config_path, const fs::path& out_dir, std::optional<std::uint64_t> seed,
              std::ostream& out, std::ostream& err) {
    std::string text;
    try {
        text = read_text(config_path);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    json raw;
    try {
        raw = json::parse(text);
    } catch (const json::parse_error& e) {
        err << config_path.string() << ':' << line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1)
            << ": invalid JSON: " << e.what() << '\n';
        return kExitFailure;
    }

    train::TrainConfig config;
    AnyEnv env = envs::two_terminal_env();
    try {
        config = train::train_config_from_json(raw);
        if (seed) {
            config.seed = *seed;
        }
        env = resolve_env(raw, config_path.parent_path());
    } catch (const ConfigError& e) {
        err << config_path.string() << ':' << line_of_field(text, e.field().empty() ? "env" : e.field()) << ": "
            << e.what() << '\n';
        return kExitFailure;
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        err << "error: cannot create " << out_dir.string() << ": " << ec.message() << '\n';
        return kExitFailure;
    }

    RunManifest manifest;
    manifest.command = "train";
    manifest.config_path = config_path.string();
    manifest.config = train::to_json(config);
    manifest.config["env"] = raw["env"];
    manifest.seed = config.seed;
    manifest.out_dir = out_dir.string();
    manifest.files = {{"metrics.csv", ""}, {"checkpoint.json", ""}};

    auto log_row = [&](const train::MetricsRow& r) {
        out << "iter " << r.iteration << " loss " << r.loss << " logz " << r.logz << " tv " << r.tv << '\n';
    };
    auto save = [&](const train::TrainResult& result, const std::string& status) {
        train::write_metrics_csv(out_dir / "metrics.csv", result.metrics);
        write_text(out_dir / "checkpoint.json", train::checkpoint_to_json(result.params).dump() + "\n");
        manifest.status = status;
        write_manifest(out_dir, manifest);
    };
    try {
        const auto result = std::visit([&](const auto& e) { return train::train(config, e, log_row); }, env);
        save(result, "ok");
    } catch (const train::DivergenceError& e) {
        err << "error: " << e.what() << '\n';
        try {
            save(e.last_good(), "diverged");
        } catch (const std::exception& inner) {
            err << "error: " << inner.what() << '\n';
        }
        return kExitDiverged;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    out << "wrote " << (out_dir / "metrics.csv").string() << ", checkpoint.json, manifest.json\n";
    return kExitOk;
}

int cmd_verify(const std::string& suite, std::ostream& out, std::ostream& err) {
    std::vector<std::string> suites;
    if (suite == "all") {
        for (auto s : suite_names()) {
            suites.emplace_back(s);
        }
    } else {
        suites.push_back(suite);
    }
    bool all_pass = true;
    try {
        for (const auto& s : suites) {
            for (const auto& r : run_suite(s)) {
                out << format_check(r) << '\n';
                all_pass = all_pass && r.pass;
            }
        }
    } catch (const PreconditionError& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return all_pass ? kExitOk : kExitFailure;
}

int cmd_figure(const fs::path& out_dir, std::optional<std::uint64_t> seed, std::optional<std::size_t> iterations,
               std::ostream& out, std::ostream& err) {
    FigureOptions options = default_figure_options();
    if (seed) {
        options.seed = *seed;
    }
    if (iterations) {
        for (auto* c : {&options.rtb, &options.tpcl, &options.reinforce_kl, &options.reinforce_rtbpaper}) {
            c->iterations = *iterations;
        }
    }
    try {
        const auto result = run_figure(options, out_dir, [&](const std::string& msg) { out << msg << std::endl; });
        RunManifest manifest;
        manifest.command = "figure";
        manifest.config = {{"rtb", train::to_json(options.rtb)},
                           {"tpcl", train::to_json(options.tpcl)},
                           {"reinforce_kl", train::to_json(options.reinforce_kl)},
                           {"reinforce_rtbpaper", train::to_json(options.reinforce_rtbpaper)},
                           {"samples", options.samples}};
        manifest.seed = options.seed;
        manifest.out_dir = out_dir.string();
        manifest.status = "ok";
        for (const auto& p : result.panels) {
            if (!p.file.empty()) {
                manifest.files.push_back({p.file, ""});
            }
        }
        manifest.files.push_back({"summary.json", ""});
        write_manifest(out_dir, manifest);
    } catch (const train::DivergenceError& e) {
        err << "error: " << e.what() << " (earlier panels were kept)\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

int cmd_oracle_dump(const std::string& env_spec, const std::optional<fs::path>& out_file, std::ostream& out,
                    std::ostream& err) {
    try {
        envs::TabularEnv env = envs::two_terminal_env();
        if (env_spec == "t2b3") {
            env = envs::t2b3_env();
        } else if (env_spec == "two-terminal") {
            env = envs::two_terminal_env();
        } else {
            env = envs::tabular_env_from_json(envs::read_json_file(env_spec));
        }
        const std::string text = oracle::to_json(env, oracle::compute_oracle(env)).dump(2) + "\n";
        if (out_file) {
            write_text(*out_file, text);
        } else {
            out << text;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

}  // namespace rtbpcl::cli
