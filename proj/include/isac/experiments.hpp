#ifndef ISAC_EXPERIMENTS_HPP
#define ISAC_EXPERIMENTS_HPP

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "isac/channel.hpp"
#include "isac/config_io.hpp"
#include "isac/constellation_io.hpp"
#include "isac/sensing.hpp"
#include "isac/shaping.hpp"

namespace isac {

inline unsigned env_workers() {
    if (const char* v = std::getenv("ISAC_WORKERS")) {
        const long w = std::strtol(v, nullptr, 10);
        if (w >= 1) return static_cast<unsigned>(w);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

// Deterministic worker pool: job i always computes the same thing no matter
// how many threads run.
template <typename Fn>
void parallel_for(std::size_t jobs, Fn&& fn) {
    const unsigned workers = std::min<std::size_t>(env_workers(), jobs);
    if (workers <= 1) {
        for (std::size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < jobs; i += workers) fn(i);
        });
    for (auto& t : pool) t.join();
}

struct ExperimentPaths {
    std::filesystem::path out_dir;

    std::string file(const std::string& name) const {
        return (out_dir / name).string();
    }
};

// ---- optimize ----

struct OptimizeOutcome {
    TrainResult result;
    std::string constellation_path, trace_path, checkpoint_path;
};

inline void write_trace_csv(const std::vector<TraceRecord>& trace, const std::string& path,
                            const std::string& hash, std::uint64_t seed) {
    CsvWriter csv(path, "step,loss,gmi,kurtosis,sens_loss,batch,lr", hash, seed);
    for (const auto& r : trace)
        csv.row({std::to_string(r.step), CsvWriter::num(r.loss), CsvWriter::num(r.gmi),
                 CsvWriter::num(r.kurtosis), CsvWriter::num(r.sens_loss),
                 std::to_string(r.batch), CsvWriter::num(r.lr)});
}

inline OptimizeOutcome run_optimize(const json& cfg, const ExperimentPaths& paths) {
    const TrainConfig tc = parse_train_config(cfg.at("train"));
    const std::string hash = config_hash(cfg);

    OptimizeOutcome out;
    out.result = train(tc);
    std::filesystem::create_directories(paths.out_dir);
    out.trace_path = paths.file("train_trace.csv");
    write_trace_csv(out.result.trace, out.trace_path, hash, tc.seed);
    if (!out.result.diverged) {
        out.constellation_path = paths.file("constellation.csv");
        save_constellation(out.result.constellation, out.constellation_path);
        Checkpoint ck;
        ck.step = static_cast<int>(out.result.trace.size());
        ck.mode = tc.mode;
        ck.params = out.result.params;
        out.checkpoint_path = paths.file("checkpoint.json");
        save_checkpoint(ck, out.checkpoint_path);
    }
    return out;
}

// ---- shared constellation lookup: "qam64" / "psk64" / "qamN" / file path ----

inline Constellation named_constellation(const std::string& name) {
    if (name.rfind("qam", 0) == 0 && name.find('.') == std::string::npos) {
        const int m = static_cast<int>(std::log2(std::stod(name.substr(3))));
        return make_qam(m);
    }
    if (name.rfind("psk", 0) == 0 && name.find('.') == std::string::npos) {
        const int m = static_cast<int>(std::log2(std::stod(name.substr(3))));
        return make_psk(m);
    }
    return load_constellation(name);
}

// ---- gmi-curve ----

inline void run_gmi_curve(const json& cfg, const ExperimentPaths& paths) {
    std::vector<std::pair<std::string, Constellation>> sets;
    if (cfg.contains("constellations"))
        for (const auto& e : cfg.at("constellations")) {
            const std::string name = e.get<std::string>();
            sets.emplace_back(name, named_constellation(name));
        }
    // legacy baselines are always part of the curve
    for (const char* base : {"qam64", "psk64"}) {
        const bool present = std::any_of(sets.begin(), sets.end(),
                                         [&](const auto& s) { return s.first == base; });
        if (!present) sets.emplace_back(base, named_constellation(base));
    }

    const std::vector<double> snr_grid = cfg.at("snr_db_grid").get<std::vector<double>>();
    if (snr_grid.empty()) throw ConfigError("gmi-curve: empty snr grid");
    const std::size_t samples = cfg.value("samples", std::size_t{200000});
    const std::uint64_t seed = cfg.value("seed", std::uint64_t{1});
    const DemapPrior prior = cfg.value("prior_aware", true) ? DemapPrior::Aware
                                                            : DemapPrior::Uniform;

    std::filesystem::create_directories(paths.out_dir);
    CsvWriter csv(paths.file("gmi_curve.csv"), "constellation,snr_db,gmi,stderr,capacity",
                  config_hash(cfg), seed);
    std::uint64_t stream = 0;
    for (const auto& [name, c] : sets) {
        for (double snr : snr_grid) {
            RngStream rng(seed, stream++);
            const GmiEstimate g = estimate_gmi(c, AwgnChannel::from_snr_db(snr), samples, rng, prior);
            const double cap = std::log2(1.0 + std::pow(10.0, snr / 10.0));
            csv.row({name, CsvWriter::num(snr), CsvWriter::num(g.gmi_bits),
                     CsvWriter::num(g.std_error), CsvWriter::num(cap)});
        }
    }
}

// ---- pd-curve ----

struct PdPoint {
    double kappa, range_m, gamma_analytic, pd_analytic, pd_sim, ci_lo, ci_hi;
};

// Rebuilds the scenario with the TOI moved to each grid range and compares
// the closed-form detection probability with the CFAR simulation.
inline std::vector<PdPoint> run_pd_curve(const json& cfg, const ExperimentPaths& paths) {
    const json& scenario_json = cfg.at("scenario");
    const CfarConfig cfar = parse_cfar(cfg.value("cfar", json::object()));
    const std::vector<double> ranges = cfg.at("range_grid_m").get<std::vector<double>>();
    if (ranges.empty()) throw ConfigError("pd-curve: empty range grid");
    const std::size_t trials = cfg.value("trials", std::size_t{10000});
    const std::uint64_t seed = cfg.value("seed", std::uint64_t{1});

    std::vector<std::pair<std::string, Constellation>> sets;
    for (const auto& e : cfg.at("constellations")) {
        const std::string name = e.get<std::string>();
        sets.emplace_back(name, named_constellation(name));
    }
    if (sets.empty()) throw ConfigError("pd-curve: no constellations");

    // locate the TOI entry in the raw target list
    const json& targets = scenario_json.at("targets");
    std::size_t toi_slot = targets.size();
    for (std::size_t i = 0; i < targets.size(); ++i)
        if (targets[i].value("is_toi", false)) toi_slot = i;
    if (toi_slot == targets.size()) throw ConfigError("pd-curve: no target flagged is_toi");

    // validate every grid point before any output is written
    std::vector<std::vector<SensingScenario>> grid(sets.size());
    for (double r : ranges) {
        json sj = scenario_json;
        sj["targets"][toi_slot]["range_m"] = r;
        const SensingScenario sc = parse_scenario(sj);
        for (auto& g : grid) g.push_back(sc);
    }

    std::filesystem::create_directories(paths.out_dir);
    CsvWriter csv(paths.file("pd_curve.csv"),
                  "kappa,range_m,gamma_analytic,pd_analytic,pd_sim,ci_lo,ci_hi",
                  config_hash(cfg), seed);
    std::vector<PdPoint> out;
    std::uint64_t stream_base = 0;
    for (std::size_t s = 0; s < sets.size(); ++s) {
        const Constellation& c = sets[s].second;
        const double kappa = kurtosis(c);
        for (std::size_t ri = 0; ri < ranges.size(); ++ri) {
            const SensingScenario& sc = grid[s][ri];
            const double gamma = analytic_sinr(c, sc, toi_index(sc));
            const double pd_a = analytic_pd(gamma, cfar.p_fa);
            const PdEstimate pe = simulate_pd(c, sc, cfar, trials, seed, stream_base);
            stream_base += trials;
            PdPoint pt{kappa, ranges[ri], gamma, pd_a, pe.p_d, pe.ci_lo, pe.ci_hi};
            out.push_back(pt);
            csv.row({CsvWriter::num(pt.kappa), CsvWriter::num(pt.range_m),
                     CsvWriter::num(pt.gamma_analytic), CsvWriter::num(pt.pd_analytic),
                     CsvWriter::num(pt.pd_sim), CsvWriter::num(pt.ci_lo),
                     CsvWriter::num(pt.ci_hi)});
        }
    }
    return out;
}

// ---- tradeoff-sweep ----

struct SweepPoint {
    std::string mode;
    double kappa_limit, kappa, gmi, stderr_bits;
    bool ok;
};

inline std::vector<SweepPoint> run_tradeoff_sweep(const json& cfg, const ExperimentPaths& paths) {
    const json train_base = cfg.value("train", json::object());
    std::vector<ShapingMode> modes;
    for (const auto& m : cfg.at("modes"))
        modes.push_back(shaping_mode_from_string(m.get<std::string>()));
    const std::vector<double> kappa_grid = cfg.at("kappa_grid").get<std::vector<double>>();
    if (modes.empty() || kappa_grid.empty())
        throw ConfigError("tradeoff-sweep: empty mode list or kappa grid");
    const std::size_t eval_samples = cfg.value("eval_samples", std::size_t{400000});
    const std::uint64_t seed = cfg.value("seed", std::uint64_t{1});

    struct Job {
        ShapingMode mode;
        double kappa_limit;
    };
    std::vector<Job> jobs;
    for (auto m : modes)
        for (double k : kappa_grid) jobs.push_back({m, k});

    std::vector<SweepPoint> points(jobs.size());
    double snr_c = 10.0;
    {
        json tj = train_base;
        tj["mode"] = "joint";
        snr_c = parse_train_config(tj).snr_c_db;
    }

    parallel_for(jobs.size(), [&](std::size_t i) {
        json tj = train_base;
        tj["mode"] = to_string(jobs[i].mode);
        tj["kappa_limit"] = jobs[i].kappa_limit;
        const TrainConfig tc = parse_train_config(tj);
        const TrainResult tr = train(tc);
        SweepPoint& pt = points[i];
        pt.mode = to_string(jobs[i].mode);
        pt.kappa_limit = jobs[i].kappa_limit;
        pt.ok = !tr.diverged;
        if (pt.ok) {
            pt.kappa = kurtosis(tr.constellation);
            RngStream rng(seed, 1000000 + i);
            const GmiEstimate g = estimate_gmi(tr.constellation,
                                               AwgnChannel::from_snr_db(tc.snr_c_db),
                                               eval_samples, rng);
            pt.gmi = g.gmi_bits;
            pt.stderr_bits = g.std_error;
        }
    });

    std::filesystem::create_directories(paths.out_dir);
    CsvWriter csv(paths.file("tradeoff.csv"), "mode,kappa_limit,kappa,gmi,stderr,status",
                  config_hash(cfg), seed);
    for (const auto& pt : points)
        csv.row({pt.mode, CsvWriter::num(pt.kappa_limit),
                 pt.ok ? CsvWriter::num(pt.kappa) : "",
                 pt.ok ? CsvWriter::num(pt.gmi) : "",
                 pt.ok ? CsvWriter::num(pt.stderr_bits) : "",
                 pt.ok ? "ok" : "diverged"});
    // legacy reference points at the same evaluation SNR
    int ref_i = 0;
    for (const char* name : {"qam64", "psk64"}) {
        const Constellation c = named_constellation(name);
        RngStream rng(seed, 2000000 + ref_i++);
        const GmiEstimate g = estimate_gmi(c, AwgnChannel::from_snr_db(snr_c),
                                           eval_samples, rng);
        csv.row({name, "", CsvWriter::num(kurtosis(c)), CsvWriter::num(g.gmi_bits),
                 CsvWriter::num(g.std_error), "ok"});
    }
    return points;
}

// ---- gaussianity ----

struct GaussianityPoint {
    std::size_t n_subcarriers;
    double excess_kurtosis;
    double ks_distance;
};

// Fig.-2-style setup: single fixed target, 16-QAM by default, per-subcarrier
// sensing SNR 20 dB. KS distance is measured against a zero-mean normal with
// the pooled empirical variance.
inline GaussianityPoint gaussianity_point(const Constellation& c, std::size_t n_sc,
                                          double snr_s_db, std::size_t trials,
                                          std::uint64_t seed) {
    SensingScenario sc;
    sc.numerology.n_subcarriers = n_sc;
    sc.numerology.cp_len = std::max<std::size_t>(1, n_sc / 4);
    sc.targets = {{0, 1.0, 0, true}};
    // sensing SNR |H|^2 / sigma_s^2 with |H_n|^2 = |a|^2 = 1 for the single target
    sc.noise_variance = std::pow(10.0, -snr_s_db / 10.0);

    std::vector<double> samples;
    const std::size_t cap = 200000;
    double m2 = 0.0, m4 = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        RngStream rng(seed, t);
        const auto amps = draw_target_amplitudes(sc, rng);
        const SenseFrame f = sense_frame(c, sc, amps, rng);
        for (std::size_t k = 0; k < n_sc; ++k) {
            // off-peak bins only, +-1 around the single target at bin 0
            if (k <= 1 || k == n_sc - 1) continue;
            const double x = f.h_delay[k].real();
            m2 += x * x;
            m4 += x * x * x * x;
            ++count;
            if (samples.size() < cap) samples.push_back(x);
        }
    }
    m2 /= static_cast<double>(count);
    m4 /= static_cast<double>(count);

    std::sort(samples.begin(), samples.end());
    const double sd = std::sqrt(m2);
    double ks = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f_hat_hi = static_cast<double>(i + 1) / samples.size();
        const double f_hat_lo = static_cast<double>(i) / samples.size();
        const double phi = 0.5 * std::erfc(-samples[i] / (sd * std::sqrt(2.0)));
        ks = std::max({ks, std::abs(f_hat_hi - phi), std::abs(f_hat_lo - phi)});
    }
    return {n_sc, m4 / (m2 * m2) - 3.0, ks};
}

inline std::vector<GaussianityPoint> run_gaussianity(const json& cfg,
                                                     const ExperimentPaths& paths) {
    const std::vector<std::size_t> n_grid = cfg.at("n_grid").get<std::vector<std::size_t>>();
    if (n_grid.empty()) throw ConfigError("gaussianity: empty n grid");
    for (std::size_t n : n_grid)
        if (!detail::is_pow2(n) || n < 4)
            throw ConfigError("gaussianity: n_subcarriers must be a power of two >= 4");
    const std::size_t trials = cfg.value("trials", std::size_t{2000});
    const double snr_s_db = cfg.value("sensing_snr_db", 20.0);
    const std::uint64_t seed = cfg.value("seed", std::uint64_t{1});
    const Constellation c = named_constellation(cfg.value("constellation", std::string("qam16")));

    std::vector<GaussianityPoint> pts(n_grid.size());
    parallel_for(n_grid.size(), [&](std::size_t i) {
        pts[i] = gaussianity_point(c, n_grid[i], snr_s_db, trials, seed + i);
    });

    std::filesystem::create_directories(paths.out_dir);
    CsvWriter csv(paths.file("gaussianity.csv"), "n_subcarriers,excess_kurtosis,ks_distance",
                  config_hash(cfg), seed);
    for (const auto& p : pts)
        csv.row({std::to_string(p.n_subcarriers), CsvWriter::num(p.excess_kurtosis),
                 CsvWriter::num(p.ks_distance)});
    return pts;
}

} // namespace isac

#endif
