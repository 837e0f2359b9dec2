#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rtbpcl/cli/checks.hpp"
#include "rtbpcl/cli/commands.hpp"
#include "rtbpcl/cli/figure.hpp"
#include "rtbpcl/envs/gmm_env.hpp"
#include "rtbpcl/envs/io.hpp"
#include "rtbpcl/eval/eval.hpp"

using namespace rtbpcl;
using namespace rtbpcl::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("rtbpcl_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const auto path = dir / "config.json";
    std::ofstream(path) << text;
    return path;
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) {
        ++n;
    }
    return n;
}

FigureOptions tiny_figure_options(std::size_t samples) {
    FigureOptions o = default_figure_options();
    o.samples = samples;
    for (auto* c : {&o.rtb, &o.tpcl, &o.reinforce_kl, &o.reinforce_rtbpaper}) {
        c->iterations = 3;
        c->batch_size = 4;
        c->tv_samples = 20;
    }
    return o;
}

}  // namespace

TEST_CASE("git blob hash") {
    // Reference values from `git hash-object --stdin`.
    CHECK(git_blob_sha1(std::string("hello\n")) == "ce013625030ba8dba906f756967f9e9ca394464a");
    CHECK(git_blob_sha1(std::string()) == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_CASE("train command") {
    const auto dir = scratch("train");
    std::ostringstream out;
    std::ostringstream err;

    SUBCASE("shipped config") {
        auto cfg = envs::read_json_file(RTBPCL_SOURCE_DIR "/configs/rtb_t2b3.json");
        cfg["iterations"] = 200;
        cfg["env"] = {{"fixture", "t2b3"}};
        const auto path = write_config(dir, cfg.dump());
        CHECK(cmd_train(path, dir / "run", std::nullopt, out, err) == kExitOk);
        CHECK(line_count(dir / "run" / "metrics.csv") > 1);
        CHECK(fs::exists(dir / "run" / "checkpoint.json"));
        const auto manifest = envs::read_json_file(dir / "run" / "manifest.json");
        CHECK(manifest.at("status") == "ok");
        CHECK(manifest.at("seed") == 5);
        for (const auto& f : manifest.at("files")) {
            const auto file = dir / "run" / f.at("path").get<std::string>();
            REQUIRE(fs::exists(file));
            CHECK(f.at("sha1") == git_blob_sha1(file));
        }
        CHECK(cmd_train(path, dir / "seeded", 9, out, err) == kExitOk);
        CHECK(envs::read_json_file(dir / "seeded" / "manifest.json").at("seed") == 9);
        // Same config and seed, same bytes.
        CHECK(cmd_train(path, dir / "again", std::nullopt, out, err) == kExitOk);
        CHECK(slurp(dir / "run" / "checkpoint.json") == slurp(dir / "again" / "checkpoint.json"));
    }
    SUBCASE("negative alpha names the field and its line") {
        const auto path = write_config(dir, "{\n  \"schema\": \"rtbpcl.train_config/1\",\n  \"alpha\": -1,\n"
                                            "  \"objective\": \"rtb\",\n  \"env\": {\"fixture\": \"t2b3\"}\n}\n");
        CHECK(cmd_train(path, dir / "bad", std::nullopt, out, err) == kExitFailure);
        CHECK(err.str().find("config.json:3:") != std::string::npos);
        CHECK(err.str().find("alpha") != std::string::npos);
    }
    SUBCASE("malformed json") {
        const auto path = write_config(dir, "{\n  \"objective\": \"rtb\",\n  \"alpha\": ,\n}\n");
        CHECK(cmd_train(path, dir / "bad", std::nullopt, out, err) == kExitFailure);
        CHECK(err.str().find("config.json:3") != std::string::npos);
    }
    SUBCASE("missing file") {
        CHECK(cmd_train(dir / "nope.json", dir / "bad", std::nullopt, out, err) == kExitFailure);
    }
    SUBCASE("divergence writes the last good checkpoint") {
        const auto path = write_config(
            dir, R"({"schema": "rtbpcl.train_config/1", "objective": "rtb", "lr_policy": 1e300, "lr_scalar": 1e300, "iterations": 20,
                     "env": {"fixture": "t2b3"}})");
        CHECK(cmd_train(path, dir / "div", std::nullopt, out, err) == kExitDiverged);
        CHECK(fs::exists(dir / "div" / "checkpoint.json"));
        CHECK(envs::read_json_file(dir / "div" / "manifest.json").at("status") == "diverged");
    }
    fs::remove_all(dir);
}

TEST_CASE("verify command") {
    std::ostringstream out;
    std::ostringstream err;
    CHECK(cmd_verify("equivalence", out, err) == kExitOk);
    CHECK(out.str().find("PASS") != std::string::npos);
    CHECK(out.str().find("FAIL") == std::string::npos);
    CHECK(cmd_verify("oracle", out, err) == kExitOk);
    CHECK(cmd_verify("gradients", out, err) == kExitOk);
    CHECK(cmd_verify("no-such-suite", out, err) == kExitFailure);
}

TEST_CASE("oracle dump") {
    const auto dir = scratch("oracle");
    std::ostringstream out;
    std::ostringstream err;
    CHECK(cmd_oracle_dump("t2b3", dir / "o.json", out, err) == kExitOk);
    const auto j = envs::read_json_file(dir / "o.json");
    CHECK(j.at("tilted").size() == 9);
    CHECK(cmd_oracle_dump(RTBPCL_SOURCE_DIR "/fixtures/two_terminal.json", std::nullopt, out, err) == kExitOk);
    CHECK(out.str().find("wrong_tilted") != std::string::npos);
    CHECK(cmd_oracle_dump("missing-fixture", std::nullopt, out, err) == kExitFailure);
    fs::remove_all(dir);
}

TEST_CASE("figure outputs") {
    const auto dir = scratch("figure");
    const auto result = run_figure(tiny_figure_options(100000), dir / "a");
    for (const char* f : {"prior.csv", "target.csv", "rtb.csv", "reinforce_rtbpaper.csv", "reinforce_kl.csv"}) {
        const auto path = dir / "a" / f;
        REQUIRE(fs::exists(path));
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        CHECK(header == "x,y");
        CHECK(line_count(path) == 100001);
    }
    // Panel TVs in the summary are against the target; the prior panel is checked against its own weights.
    const auto prior = envs::GmmDiffusionEnv::fixture().prior_gmm();
    const auto prior_points = eval::read_samples_csv(dir / "a" / "prior.csv");
    CHECK(eval::mode_tv(eval::mode_histogram(prior_points, prior), prior.weights) < 0.03);
    CHECK(result.panel("target").mode_tv < 0.02);

    const auto summary = envs::read_json_file(dir / "a" / "summary.json");
    CHECK(summary.at("schema") == "rtbpcl.figure_summary/1");
    CHECK(summary.at("panels").size() == 6);
    for (const auto& p : summary.at("panels")) {
        CHECK(p.contains("mode_tv"));
        CHECK(p.contains("title"));
    }

    // Reproducible to the byte.
    run_figure(tiny_figure_options(100000), dir / "b");
    for (const char* f : {"prior.csv", "target.csv", "rtb.csv", "reinforce_rtbpaper.csv", "reinforce_kl.csv"}) {
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    fs::remove_all(dir);
}

TEST_CASE("command-line binary") {
    const auto dir = scratch("binary");
    const std::string cli = RTBPCL_CLI_PATH;
    const auto cfg = write_config(dir, R"({"schema": "rtbpcl.train_config/1", "objective": "tpcl", "iterations": 20, "env": {"fixture": "two-terminal"}})");
    const auto run = [](const std::string& cmd) {
        const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
        return WEXITSTATUS(status);
    };
    CHECK(run(cli + " train --config " + cfg.string() + " --out " + (dir / "run").string()) == 0);
    CHECK(run(cli + " train --config " + (dir / "missing.json").string() + " --out " + (dir / "x").string()) == 1);
    CHECK(run(cli + " verify --suite equivalence") == 0);
    CHECK(run(cli + " oracle dump --env t2b3 --out " + (dir / "o.json").string()) == 0);
    CHECK(run(cli + " bogus") != 0);
    fs::remove_all(dir);
}
