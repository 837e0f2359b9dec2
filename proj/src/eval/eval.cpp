#include "rtbpcl/eval/eval.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "rtbpcl/error.hpp"
#include "rtbpcl/numeric.hpp"
#include "rtbpcl/oracle/oracle.hpp"

namespace rtbpcl::eval {

std::size_t ModeHistogram::total() const {
    return std::accumulate(counts.begin(), counts.end(), unassigned);
}

std::vector<double> ModeHistogram::fractions() const {
    const double n = static_cast<double>(total());
    std::vector<double> out(counts.size());
    for (std::size_t k = 0; k < counts.size(); ++k) {
        out[k] = static_cast<double>(counts[k]) / n;
    }
    return out;
}

ModeHistogram mode_histogram(std::span<const Point> samples, const envs::Gmm& gmm) {
    if (samples.empty()) {
        throw PreconditionError("mode histogram needs at least one sample");
    }
    ModeHistogram h;
    h.counts.assign(gmm.size(), 0);
    h.radius = 3.0 * gmm.sigma * 5.0;
    const double r2 = h.radius * h.radius;
    for (const auto& p : samples) {
        std::size_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < gmm.size(); ++k) {
            const double dx = p[0] - gmm.means[k][0];
            const double dy = p[1] - gmm.means[k][1];
            const double d2 = dx * dx + dy * dy;
            if (d2 < best_d2) {
                best_d2 = d2;
                best = k;
            }
        }
        if (best_d2 > r2 || !std::isfinite(best_d2)) {
            ++h.unassigned;
        } else {
            ++h.counts[best];
        }
    }
    return h;
}

namespace {

void require_distribution(std::span<const double> p, const char* name) {
    double total = 0.0;
    for (double x : p) {
        if (!(x >= 0.0)) {
            throw PreconditionError(std::string(name) + " has a negative or NaN entry");
        }
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw PreconditionError(std::string(name) + " sums to " + std::to_string(total) + ", not 1");
    }
}

}  // namespace

double tv_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) {
        throw PreconditionError("tv_distance: length mismatch (" + std::to_string(p.size()) + " vs " +
                                std::to_string(q.size()) + ")");
    }
    require_distribution(p, "p");
    require_distribution(q, "q");
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        s += std::abs(p[k] - q[k]);
    }
    return 0.5 * s;
}

double mode_tv(const ModeHistogram& hist, std::span<const double> weights) {
    if (weights.size() != hist.counts.size()) {
        throw PreconditionError("mode_tv: weight vector does not match the histogram");
    }
    const auto frac = hist.fractions();
    double s = 0.0;
    for (std::size_t k = 0; k < frac.size(); ++k) {
        s += std::abs(frac[k] - weights[k]);
    }
    return 0.5 * s + static_cast<double>(hist.unassigned) / static_cast<double>(hist.total());
}

LogZReport logz_report(double estimate, const envs::TabularEnv& env) {
    const double reference = oracle::tilted_target(env).log_z;
    return LogZReport{estimate, reference, std::abs(estimate - reference)};
}

double importance_log_z(const envs::GmmDiffusionEnv& env, Rng& rng, std::size_t samples) {
    if (samples == 0) {
        throw PreconditionError("importance sampling needs at least one sample");
    }
    std::vector<double> log_w(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        log_w[i] = -env.sample_prior(rng).energy / env.alpha();
    }
    return log_sum_exp(log_w) - std::log(static_cast<double>(samples));
}

LogZReport logz_report(double estimate, const envs::GmmDiffusionEnv& env, Rng& rng, std::size_t samples) {
    const double reference = importance_log_z(env, rng, samples);
    return LogZReport{estimate, reference, std::abs(estimate - reference)};
}

nlohmann::json to_json(const ModeHistogram& hist, std::span<const double> weights) {
    return nlohmann::json{{"counts", hist.counts},
                          {"unassigned", hist.unassigned},
                          {"total", hist.total()},
                          {"radius", hist.radius},
                          {"fractions", hist.fractions()},
                          {"mode_tv", mode_tv(hist, weights)}};
}

void write_samples_csv(const std::filesystem::path& path, std::span<const Point> samples) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << "x,y\n";
    char buf[64];
    for (const auto& p : samples) {
        for (std::size_t d = 0; d < 2; ++d) {
            auto res = std::to_chars(buf, buf + sizeof buf, p[d], std::chars_format::general, 17);
            out.write(buf, res.ptr - buf);
            out.put(d == 0 ? ',' : '\n');
        }
    }
    if (!out) {
        throw Error("failed while writing " + path.string());
    }
}

std::vector<Point> read_samples_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != "x,y") {
        throw Error(path.string() + ": expected header 'x,y'");
    }
    std::vector<Point> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto comma = line.find(',');
        Point p{};
        const char* begin = line.data();
        const char* end = begin + line.size();
        auto r1 = std::from_chars(begin, begin + (comma == std::string::npos ? 0 : comma), p[0]);
        auto r2 = comma == std::string::npos ? r1 : std::from_chars(begin + comma + 1, end, p[1]);
        if (comma == std::string::npos || r1.ec != std::errc{} || r2.ec != std::errc{}) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": malformed sample row");
        }
        out.push_back(p);
    }
    return out;
}

}  // namespace rtbpcl::eval
