#ifndef ISAC_CONFIG_IO_HPP
#define ISAC_CONFIG_IO_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "isac/sensing.hpp"
#include "isac/shaping.hpp"

namespace isac {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline json load_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config: " + path);
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigError("parse error in " + path + ": " + e.what());
    }
}

// FNV-1a over the canonical dump, for the CSV provenance comment
inline std::string config_hash(const json& j) {
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline OfdmNumerology parse_numerology(const json& j) {
    OfdmNumerology num;
    num.n_subcarriers = j.at("n_subcarriers").get<std::size_t>();
    num.cp_len = j.at("cp_len").get<std::size_t>();
    if (j.contains("subcarrier_spacing_hz"))
        num.subcarrier_spacing_hz = j.at("subcarrier_spacing_hz").get<double>();
    try {
        validate(num);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return num;
}

// Targets are given either directly (delay_bins, power) or through the
// relative link budget |a|^2 = k_budget * rcs_m2 / range_m^4 with the delay
// bin from the numerology's range-bin size.
inline Target parse_target(const json& j, const OfdmNumerology& num, double k_budget) {
    Target t;
    if (j.contains("delay_bins")) {
        t.delay_bins = j.at("delay_bins").get<std::size_t>();
        t.power = j.at("power").get<double>();
    } else {
        const double range = j.at("range_m").get<double>();
        const double rcs = j.at("rcs_m2").get<double>();
        if (range <= 0.0) throw ConfigError("target: range_m must be > 0");
        t.delay_bins = static_cast<std::size_t>(std::llround(range / num.range_bin_m()));
        t.power = k_budget * rcs / (range * range * range * range);
    }
    t.swerling = j.value("swerling", 0);
    t.is_toi = j.value("is_toi", false);
    return t;
}

inline SensingScenario parse_scenario(const json& j) {
    SensingScenario sc;
    sc.numerology = parse_numerology(j.at("numerology"));
    const json& noise = j.at("noise");
    if (noise.contains("sigma2"))
        sc.noise_variance = noise.at("sigma2").get<double>();
    else
        sc.noise_variance = std::pow(10.0, -noise.at("snr_db").get<double>() / 10.0);
    const double k_budget = j.value("k_budget", 1.0);
    for (const auto& tj : j.at("targets"))
        sc.targets.push_back(parse_target(tj, sc.numerology, k_budget));
    try {
        validate(sc);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    return sc;
}

inline CfarConfig parse_cfar(const json& j) {
    CfarConfig cfg;
    cfg.p_fa = j.value("p_fa", 1e-3);
    cfg.window_cells = j.value("window_cells", std::size_t{100});
    cfg.guard_cells = j.value("guard_cells", std::size_t{2});
    return cfg;
}

inline Schedule parse_schedule(const json& j) {
    Schedule s;
    for (const auto& knot : j) s.emplace_back(knot.at(0).get<int>(), knot.at(1).get<double>());
    return s;
}

inline TrainConfig parse_train_config(const json& j) {
    const ShapingMode mode = shaping_mode_from_string(j.value("mode", std::string("joint")));
    TrainConfig cfg = default_train_config(mode, j.value("bits_per_symbol", 6));
    cfg.snr_c_db = j.value("snr_c_db", 10.0);
    cfg.kappa_limit = j.value("kappa_limit", 2.0);
    cfg.penalty = j.value("penalty", 3.0);
    cfg.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("total_steps")) {
        // rebuild the default schedules for the new horizon before overrides
        const int steps = j.at("total_steps").get<int>();
        TrainConfig scaled = default_train_config(mode, cfg.bits_per_symbol);
        scaled.total_steps = steps;
        scaled.batch_schedule = {{0, 500.0}, {steps, 10000.0}};
        scaled.lr_schedule.clear();
        const double lr0 = mode == ShapingMode::Probabilistic ? 5e-3 : 1e-3;
        for (int q = 0; q < 4; ++q)
            scaled.lr_schedule.emplace_back(q * steps / 4, lr0 * std::pow(0.5, q));
        cfg.total_steps = steps;
        cfg.batch_schedule = scaled.batch_schedule;
        cfg.lr_schedule = scaled.lr_schedule;
    }
    if (j.contains("batch_schedule")) cfg.batch_schedule = parse_schedule(j.at("batch_schedule"));
    if (j.contains("lr_schedule")) cfg.lr_schedule = parse_schedule(j.at("lr_schedule"));
    if (j.contains("tau_schedule")) cfg.tau_schedule = parse_schedule(j.at("tau_schedule"));
    try {
        validate(cfg);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    return cfg;
}

// ---- checkpoint: raw params + optimizer state + step, versioned JSON ----

struct Checkpoint {
    int version = 1;
    int step = 0;
    ShapingMode mode = ShapingMode::Joint;
    RawShapingParams params;
    std::vector<double> adam_m, adam_v;
    std::int64_t adam_t = 0;
};

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    json j;
    j["version"] = ck.version;
    j["step"] = ck.step;
    j["mode"] = to_string(ck.mode);
    json pts = json::array();
    for (const auto& x : ck.params.raw_points) pts.push_back({x.real(), x.imag()});
    j["raw_points"] = pts;
    j["raw_logits"] = ck.params.raw_logits;
    j["adam_m"] = ck.adam_m;
    j["adam_v"] = ck.adam_v;
    j["adam_t"] = ck.adam_t;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << j.dump(2) << '\n';
}

inline Checkpoint load_checkpoint(const std::string& path) {
    const json j = load_json(path);
    Checkpoint ck;
    ck.version = j.at("version").get<int>();
    if (ck.version != 1) throw ConfigError("checkpoint: unsupported version");
    ck.step = j.at("step").get<int>();
    ck.mode = shaping_mode_from_string(j.at("mode").get<std::string>());
    for (const auto& xy : j.at("raw_points"))
        ck.params.raw_points.emplace_back(xy.at(0).get<double>(), xy.at(1).get<double>());
    ck.params.raw_logits = j.at("raw_logits").get<std::vector<double>>();
    ck.adam_m = j.value("adam_m", std::vector<double>{});
    ck.adam_v = j.value("adam_v", std::vector<double>{});
    ck.adam_t = j.value("adam_t", std::int64_t{0});
    return ck;
}

// ---- CSV writing with provenance comment ----

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& header,
              const std::string& hash, std::uint64_t seed) {
        f_.open(path);
        if (!f_) throw std::runtime_error("cannot open for writing: " + path);
        f_ << "# config_hash=" << hash << " seed=" << seed << '\n';
        f_ << header << '\n';
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) f_ << ',';
            f_ << cells[i];
        }
        f_ << '\n';
    }

    static std::string num(double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }

private:
    std::ofstream f_;
};

} // namespace isac

#endif
