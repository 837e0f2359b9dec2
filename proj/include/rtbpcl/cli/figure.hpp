#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rtbpcl/train/train.hpp"

namespace rtbpcl::cli {

struct FigureOptions {
    std::uint64_t seed = 0;
    std::size_t samples = 100000;
    train::TrainConfig rtb;
    train::TrainConfig tpcl;
    train::TrainConfig reinforce_rtbpaper;
    train::TrainConfig reinforce_kl;
};

// Settings used for the 25-mode comparison.
FigureOptions default_figure_options();

struct FigurePanel {
    std::string name;  // prior, target, rtb, tpcl, reinforce_rtbpaper, reinforce_kl
    std::string file;  // CSV written for the panel, empty if none
    double mode_tv = 0.0;
    double seconds = 0.0;
};

struct FigureResult {
    std::vector<FigurePanel> panels;
    nlohmann::json summary;

    const FigurePanel& panel(const std::string& name) const;
};

using ProgressCallback = std::function<void(const std::string&)>;

// Writes prior.csv, target.csv, rtb.csv, reinforce_rtbpaper.csv and
// reinforce_kl.csv (header x,y) plus summary.json into `out_dir`. Trust-PCL is
// trained and scored but has no panel file. Panels are written as they
// finish, so a DivergenceError leaves the earlier ones in place.
FigureResult run_figure(const FigureOptions& options, const std::filesystem::path& out_dir,
                        const ProgressCallback& progress = {});

}  // namespace rtbpcl::cli
