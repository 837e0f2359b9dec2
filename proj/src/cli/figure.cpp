#include "rtbpcl/cli/figure.hpp"

#include <chrono>
#include <fstream>

#include "rtbpcl/envs/gmm_env.hpp"
#include "rtbpcl/envs/policy_net.hpp"
#include "rtbpcl/error.hpp"
#include "rtbpcl/eval/eval.hpp"
#include "rtbpcl/train/sampling.hpp"

namespace rtbpcl::cli {

using objectives::Objective;

FigureOptions default_figure_options() {
    FigureOptions o;
    train::TrainConfig base;
    base.alpha = 1.0;
    base.batch_size = 128;
    base.iterations = 6000;
    base.lr_policy = 1e-3;
    base.lr_scalar = 1e-2;
    base.epsilon = 0.1;
    base.log_every = 100;
    base.tv_samples = 2000;

    o.rtb = base;
    o.rtb.objective = Objective::rtb;
    o.tpcl = base;
    o.tpcl.objective = Objective::tpcl;
    o.tpcl.lr_scalar = base.lr_scalar * base.alpha;
    o.reinforce_kl = base;
    o.reinforce_kl.objective = Objective::reinforce_kl;
    o.reinforce_rtbpaper = base;
    o.reinforce_rtbpaper.objective = Objective::reinforce_rtbpaper;
    o.reinforce_rtbpaper.lambda = 1.0;
    o.reinforce_rtbpaper.epsilon = 0.0;
    return o;
}

const FigurePanel& FigureResult::panel(const std::string& name) const {
    for (const auto& p : panels) {
        if (p.name == name) {
            return p;
        }
    }
    throw PreconditionError("no figure panel named " + name);
}

namespace {

void write_summary(const std::filesystem::path& out_dir, const nlohmann::json& summary) {
    const auto path = out_dir / "summary.json";
    std::ofstream out(path);
    out << summary.dump(2) << '\n';
    if (!out) {
        throw Error("failed writing " + path.string());
    }
}

}  // namespace

FigureResult run_figure(const FigureOptions& options, const std::filesystem::path& out_dir,
                        const ProgressCallback& progress) {
    std::filesystem::create_directories(out_dir);
    const auto env = envs::GmmDiffusionEnv::fixture(options.rtb.alpha);
    const auto target = env.target_gmm();
    FigureResult result;
    result.summary = {{"schema", "rtbpcl.figure_summary/1"},
                      {"seed", options.seed},
                      {"samples", options.samples},
                      {"target_weights", target.weights},
                      {"panels", nlohmann::json::array()}};

    auto finish = [&](FigurePanel panel, const std::vector<envs::Point>& points, const nlohmann::json& extra) {
        const auto hist = eval::mode_histogram(points, target);
        panel.mode_tv = eval::mode_tv(hist, target.weights);
        if (!panel.file.empty()) {
            eval::write_samples_csv(out_dir / panel.file, points);
        }
        nlohmann::json entry = {{"name", panel.name},
                                {"file", panel.file.empty() ? nlohmann::json(nullptr) : nlohmann::json(panel.file)},
                                {"mode_tv", panel.mode_tv},
                                {"histogram", eval::to_json(hist, target.weights)}};
        entry.update(extra);
        result.summary["panels"].push_back(entry);
        write_summary(out_dir, result.summary);
        if (progress) {
            progress(panel.name + ": mode TV " + std::to_string(panel.mode_tv));
        }
        result.panels.push_back(std::move(panel));
    };

    {
        const auto start = std::chrono::steady_clock::now();
        Rng rng = make_rng(options.seed, 10, 0);
        const auto points = train::sample_prior_terminals(env, options.samples, rng);
        FigurePanel p{"prior", "prior.csv", 0.0,
                      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
        finish(std::move(p), points, {{"title", "Prior"}});
    }
    {
        Rng rng = make_rng(options.seed, 10, 1);
        std::vector<envs::Point> points(options.samples);
        for (auto& x : points) {
            x = envs::gmm_sample(target, rng);
        }
        finish(FigurePanel{"target", "target.csv", 0.0, 0.0}, points, {{"title", "Target"}});
    }

    struct Run {
        const char* name;
        const char* file;
        const char* title;
        const train::TrainConfig* config;
    };
    const Run runs[] = {
        {"rtb", "rtb.csv", "RTB", &options.rtb},
        {"tpcl", "", "Trust-PCL", &options.tpcl},
        {"reinforce_rtbpaper", "reinforce_rtbpaper.csv", "REINFORCE, reward exp(-E)", &options.reinforce_rtbpaper},
        {"reinforce_kl", "reinforce_kl.csv", "Off-policy REINFORCE with KL", &options.reinforce_kl},
    };
    for (std::size_t i = 0; i < std::size(runs); ++i) {
        const Run& run = runs[i];
        train::TrainConfig config = *run.config;
        config.seed = options.seed * 16 + i;
        const auto start = std::chrono::steady_clock::now();
        if (progress) {
            progress(std::string("training ") + run.name);
        }
        const auto trained = train::train(config, env);
        envs::PolicyNetConfig net_config = config.policy;
        net_config.horizon = env.steps();
        const envs::PolicyNet net(net_config, trained.params, &env);
        Rng rng = make_rng(options.seed, 11, i);
        const auto points = train::sample_terminals(env, net, trained.params, options.samples, rng);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        nlohmann::json extra = {{"title", run.title}, {"objective", objectives::to_string(config.objective)},
                                {"config", train::to_json(config)}};
        if (objectives::uses_scalar(config.objective)) {
            extra["log_z"] = train::trained_log_z(config, trained.params);
        }
        finish(FigurePanel{run.name, run.file, 0.0, seconds}, points, extra);
    }
    return result;
}

}  // namespace rtbpcl::cli
