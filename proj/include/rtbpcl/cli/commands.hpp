#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace rtbpcl::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // bad input or a failed check
inline constexpr int kExitDiverged = 2;

struct ManifestFile {
    std::string path;  // relative to the output directory
    std::string sha1;  // git blob hash: sha1("blob <size>\0" + content)
};

struct RunManifest {
    std::string command;
    std::string config_path;
    nlohmann::json config;  // resolved snapshot
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string status;  // "ok" or "diverged"
    std::vector<ManifestFile> files;
};

std::string git_blob_sha1(const std::string& content);
std::string git_blob_sha1(const std::filesystem::path& file);

nlohmann::json to_json(const RunManifest& manifest);
// Hashes every listed file and writes <out_dir>/manifest.json through a
// temporary file and rename.
void write_manifest(const std::filesystem::path& out_dir, RunManifest manifest);

// `rtbpcl train`: metrics.csv, checkpoint.json and manifest.json in `out_dir`.
// Exit 0 on success, 1 on a bad config (message "<file>:<line>: <field>: <why>"),
// 2 when training diverges (last-good checkpoint still written).
int cmd_train(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
              std::optional<std::uint64_t> seed, std::ostream& out, std::ostream& err);

// `rtbpcl verify`: one PASS/FAIL line per check; 0 iff all pass. `suite`
// may also be "all".
int cmd_verify(const std::string& suite, std::ostream& out, std::ostream& err);

// `rtbpcl figure`: sample CSVs and summary.json for the 25-mode comparison.
int cmd_figure(const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed,
               std::optional<std::size_t> iterations, std::ostream& out, std::ostream& err);

// `rtbpcl oracle dump`: oracle tables of a tabular environment as JSON.
// `env_spec` is a fixture name (t2b3, two-terminal) or a JSON file path.
int cmd_oracle_dump(const std::string& env_spec, const std::optional<std::filesystem::path>& out_file,
                    std::ostream& out, std::ostream& err);

}  // namespace rtbpcl::cli
