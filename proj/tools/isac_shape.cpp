// Command-line frontend: every experiment is a pure function of its config
// document and seed, writing CSV/table artifacts under the output directory.
//
// Exit codes: 0 success, 2 usage/config error, 3 numerical failure.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "isac/experiments.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    long long trials = -1;
    long long steps = -1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("config", o.config_path, "experiment config (JSON)")->required();
    cmd->add_option("--out", o.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", o.seed, "seed override");
    cmd->add_option("--trials", o.trials, "Monte-Carlo trials override");
    cmd->add_option("--steps", o.steps, "training steps override");
}

isac::json load_config(const CommonOpts& o, const std::string& expected_kind) {
    isac::json cfg = isac::load_json(o.config_path);
    const std::string kind = cfg.value("experiment", expected_kind);
    if (kind != expected_kind)
        throw isac::ConfigError("config is for experiment '" + kind + "', expected '" +
                                expected_kind + "'");
    if (o.seed >= 0) {
        cfg["seed"] = o.seed;
        if (cfg.contains("train")) cfg["train"]["seed"] = o.seed;
    }
    if (o.trials >= 0) cfg["trials"] = o.trials;
    if (o.steps >= 0 && cfg.contains("train")) cfg["train"]["total_steps"] = o.steps;
    return cfg;
}

isac::ExperimentPaths paths_for(const CommonOpts& o, const isac::json& cfg) {
    std::string dir = cfg.value("output_dir", std::string("out"));
    if (!o.out_dir.empty()) dir = o.out_dir;
    return {std::filesystem::path(dir)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"constellation shaping toolkit for OFDM ISAC systems"};
    app.require_subcommand(1);

    CommonOpts opt;
    auto* c_opt = app.add_subcommand("optimize", "train a shaped constellation");
    auto* c_gmi = app.add_subcommand("gmi-curve", "GMI vs SNR for stored constellations");
    auto* c_pd = app.add_subcommand("pd-curve", "analytic and simulated detection probability");
    auto* c_sweep = app.add_subcommand("tradeoff-sweep", "GMI/kurtosis sweep across shaping modes");
    auto* c_gauss = app.add_subcommand("gaussianity", "delay-domain residual noise statistics");
    for (auto* c : {c_opt, c_gmi, c_pd, c_sweep, c_gauss}) add_common(c, opt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_opt->parsed()) {
            const isac::json cfg = load_config(opt, "optimize");
            const auto out = isac::run_optimize(cfg, paths_for(opt, cfg));
            if (out.result.diverged) {
                std::fprintf(stderr, "optimize: training diverged; trace written to %s\n",
                             out.trace_path.c_str());
                return 3;
            }
            std::printf("wrote %s\n", out.constellation_path.c_str());
        } else if (c_gmi->parsed()) {
            const isac::json cfg = load_config(opt, "gmi-curve");
            isac::run_gmi_curve(cfg, paths_for(opt, cfg));
        } else if (c_pd->parsed()) {
            const isac::json cfg = load_config(opt, "pd-curve");
            isac::run_pd_curve(cfg, paths_for(opt, cfg));
        } else if (c_sweep->parsed()) {
            const isac::json cfg = load_config(opt, "tradeoff-sweep");
            isac::run_tradeoff_sweep(cfg, paths_for(opt, cfg));
        } else if (c_gauss->parsed()) {
            const isac::json cfg = load_config(opt, "gaussianity");
            isac::run_gaussianity(cfg, paths_for(opt, cfg));
        }
    } catch (const isac::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const isac::json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
