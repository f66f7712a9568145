#ifndef ISAC_SENSING_HPP
#define ISAC_SENSING_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "isac/constellation.hpp"
#include "isac/fft.hpp"
#include "isac/rng.hpp"

namespace isac {

inline constexpr double kSpeedOfLight = 299792458.0;

struct OfdmNumerology {
    std::size_t n_subcarriers = 1024; // power of two, >= 64
    std::size_t cp_len = 256;
    double subcarrier_spacing_hz = 120e3; // only used for delay <-> range

    double range_bin_m() const {
        return kSpeedOfLight /
               (2.0 * static_cast<double>(n_subcarriers) * subcarrier_spacing_hz);
    }
};

inline void validate(const OfdmNumerology& num) {
    if (num.n_subcarriers < 64 || !detail::is_pow2(num.n_subcarriers))
        throw std::invalid_argument("numerology: n_subcarriers must be a power of two >= 64");
    if (num.cp_len >= num.n_subcarriers)
        throw std::invalid_argument("numerology: cp_len must be < n_subcarriers");
}

// Swerling 0: fixed magnitude, uniform phase per trial.
// Swerling 1: circular complex Gaussian amplitude, E|a|^2 = power.
struct Target {
    std::size_t delay_bins = 0;
    double power = 1.0; // E|a|^2
    int swerling = 0;   // 0 or 1
    bool is_toi = false;
};

struct SensingScenario {
    OfdmNumerology numerology;
    std::vector<Target> targets;
    double noise_variance = 1.0; // sigma_s^2 per subcarrier
};

inline void validate(const SensingScenario& sc) {
    validate(sc.numerology);
    if (sc.noise_variance <= 0.0)
        throw std::invalid_argument("scenario: noise variance must be > 0");
    for (const auto& t : sc.targets) {
        if (t.delay_bins >= sc.numerology.cp_len)
            throw std::invalid_argument("scenario: target delay exceeds cyclic prefix");
        if (t.power < 0.0) throw std::invalid_argument("scenario: negative target power");
        if (t.swerling != 0 && t.swerling != 1)
            throw std::invalid_argument("scenario: swerling model must be 0 or 1");
    }
}

inline std::size_t toi_index(const SensingScenario& sc) {
    for (std::size_t j = 0; j < sc.targets.size(); ++j)
        if (sc.targets[j].is_toi) return j;
    throw std::invalid_argument("scenario: no target flagged as TOI");
}

inline std::vector<cplx> draw_target_amplitudes(const SensingScenario& sc, RngStream& rng) {
    std::vector<cplx> a(sc.targets.size());
    for (std::size_t j = 0; j < sc.targets.size(); ++j) {
        const Target& t = sc.targets[j];
        if (t.power == 0.0) {
            a[j] = 0.0;
        } else if (t.swerling == 0) {
            const double phase = 2.0 * M_PI * rng.uniform();
            a[j] = std::sqrt(t.power) * cplx(std::cos(phase), std::sin(phase));
        } else {
            a[j] = rng.cgaussian(t.power);
        }
    }
    return a;
}

// H_n = (1/sqrt(N)) sum_j a_j exp(-j 2 pi n tau_j / N)
inline std::vector<cplx> channel_transfer(const SensingScenario& sc,
                                          const std::vector<cplx>& amplitudes) {
    const std::size_t n_sc = sc.numerology.n_subcarriers;
    std::vector<cplx> h(n_sc, 0.0);
    for (std::size_t j = 0; j < sc.targets.size(); ++j) {
        const double w = -2.0 * M_PI * static_cast<double>(sc.targets[j].delay_bins) /
                         static_cast<double>(n_sc);
        for (std::size_t n = 0; n < n_sc; ++n)
            h[n] += amplitudes[j] * cplx(std::cos(w * n), std::sin(w * n));
    }
    return h;
}

struct SenseFrame {
    std::vector<cplx> symbols;       // X_n
    std::vector<cplx> h_freq;        // Hhat_n = Y_n X_n^*
    std::vector<cplx> h_delay;       // hhat[k], orthonormal IFFT of Hhat
};

// Matched-filter channel estimation: Y_n = X_n H_n + W_n, Hhat_n = Y_n X_n^*,
// hhat = IFFT(Hhat). Frequency-domain shortcut; see sense_frame_time for the
// explicit time-domain path (equivalent, slower).
inline SenseFrame sense_frame(const Constellation& c, const SensingScenario& sc,
                              const std::vector<cplx>& amplitudes, RngStream& rng) {
    const std::size_t n_sc = sc.numerology.n_subcarriers;
    const std::vector<cplx> h = channel_transfer(sc, amplitudes);

    SenseFrame f;
    SampleBatch sb = sample(c, n_sc, rng);
    f.symbols = std::move(sb.symbols);
    f.h_freq.resize(n_sc);
    for (std::size_t n = 0; n < n_sc; ++n) {
        const cplx y = f.symbols[n] * h[n] + rng.cgaussian(sc.noise_variance);
        f.h_freq[n] = y * std::conj(f.symbols[n]);
    }
    f.h_delay = f.h_freq;
    ifft_ortho(f.h_delay);
    return f;
}

// Explicit IFFT -> CP -> tap convolution -> CP removal -> FFT path; the
// resulting transfer function matches channel_transfer exactly.
inline SenseFrame sense_frame_time(const Constellation& c, const SensingScenario& sc,
                                   const std::vector<cplx>& amplitudes, RngStream& rng) {
    const std::size_t n_sc = sc.numerology.n_subcarriers;
    const std::size_t cp = sc.numerology.cp_len;

    SenseFrame f;
    SampleBatch sb = sample(c, n_sc, rng);
    f.symbols = std::move(sb.symbols);

    std::vector<cplx> s = f.symbols;
    ifft_ortho(s);
    std::vector<cplx> tx(cp + n_sc);
    for (std::size_t t = 0; t < cp; ++t) tx[t] = s[n_sc - cp + t];
    for (std::size_t t = 0; t < n_sc; ++t) tx[cp + t] = s[t];

    std::vector<cplx> rx(n_sc, 0.0);
    for (std::size_t t = 0; t < n_sc; ++t) {
        cplx v = 0.0;
        for (std::size_t j = 0; j < sc.targets.size(); ++j)
            v += amplitudes[j] * tx[cp + t - sc.targets[j].delay_bins];
        rx[t] = v + rng.cgaussian(sc.noise_variance);
    }
    fft_ortho(rx);
    f.h_freq.resize(n_sc);
    for (std::size_t n = 0; n < n_sc; ++n)
        f.h_freq[n] = rx[n] * std::conj(f.symbols[n]);
    f.h_delay = f.h_freq;
    ifft_ortho(f.h_delay);
    return f;
}

// sigma^2_{Hhat_n} = |H_n|^2 (kappa - 1) + sigma_s^2
inline double freq_domain_variance(const Constellation& c, double h_power,
                                   double noise_variance) {
    return h_power * (kurtosis(c) - 1.0) + noise_variance;
}

// gamma_TOI = N |a_TOI|^2 / (sum_j |a_j|^2 (kappa - 1) + sigma_s^2)
inline double analytic_sinr(const Constellation& c, const SensingScenario& sc,
                            std::size_t toi) {
    if (toi >= sc.targets.size()) throw std::invalid_argument("analytic_sinr: bad TOI index");
    const double kappa = kurtosis(c);
    double denom = sc.noise_variance;
    for (const auto& t : sc.targets) denom += t.power * (kappa - 1.0);
    return static_cast<double>(sc.numerology.n_subcarriers) * sc.targets[toi].power / denom;
}

// P_D = P_FA^(1 / (1 + gamma)), Gaussian noise-plus-interference model
inline double analytic_pd(double gamma, double p_fa) {
    if (gamma < 0.0) throw std::invalid_argument("analytic_pd: gamma must be >= 0");
    if (p_fa <= 0.0 || p_fa >= 1.0) throw std::invalid_argument("analytic_pd: p_fa must be in (0,1)");
    return std::pow(p_fa, 1.0 / (1.0 + gamma));
}

struct CfarConfig {
    double p_fa = 1e-3;
    std::size_t window_cells = 100; // total reference cells, split across sides
    std::size_t guard_cells = 2;    // per side
};

inline void validate(const CfarConfig& cfg, std::size_t n_bins) {
    if (cfg.p_fa <= 0.0 || cfg.p_fa >= 1.0)
        throw std::invalid_argument("cfar: p_fa must be in (0,1)");
    if (cfg.window_cells < 4 || cfg.window_cells % 2 != 0)
        throw std::invalid_argument("cfar: window_cells must be even and >= 4");
    if (cfg.window_cells + 2 * cfg.guard_cells + 1 > n_bins)
        throw std::invalid_argument("cfar: window and guard exceed the number of bins");
}

// Exact-P_FA cell-averaging scaling for exponentially distributed cells.
inline double cfar_threshold_factor(const CfarConfig& cfg) {
    const double nw = static_cast<double>(cfg.window_cells);
    return nw * (std::pow(cfg.p_fa, -1.0 / nw) - 1.0);
}

// Cell-averaging CFAR on |hhat[k]|^2 with a circular reference window of
// window_cells/2 cells per side beyond guard_cells guards.
inline std::vector<std::uint8_t> ca_cfar(const std::vector<cplx>& h_delay,
                                         const CfarConfig& cfg) {
    const std::size_t n = h_delay.size();
    validate(cfg, n);
    std::vector<double> z(n);
    for (std::size_t k = 0; k < n; ++k) z[k] = std::norm(h_delay[k]);

    const std::size_t half = cfg.window_cells / 2;
    const double alpha = cfar_threshold_factor(cfg);

    // circular sliding sums, one per side
    double left = 0.0, right = 0.0;
    auto at = [&](std::ptrdiff_t i) { return z[static_cast<std::size_t>((i % static_cast<std::ptrdiff_t>(n) + n) % n)]; };
    for (std::size_t d = 1; d <= half; ++d) {
        left += at(-static_cast<std::ptrdiff_t>(cfg.guard_cells + d));
        right += at(static_cast<std::ptrdiff_t>(cfg.guard_cells + d));
    }
    std::vector<std::uint8_t> det(n, 0);
    for (std::size_t k = 0; k < n; ++k) {
        const double noise = (left + right) / static_cast<double>(cfg.window_cells);
        det[k] = z[k] > alpha * noise ? 1 : 0;
        // advance window to cell k+1
        const std::ptrdiff_t kk = static_cast<std::ptrdiff_t>(k);
        left += at(kk - static_cast<std::ptrdiff_t>(cfg.guard_cells));
        left -= at(kk - static_cast<std::ptrdiff_t>(cfg.guard_cells + half));
        right += at(kk + 1 + static_cast<std::ptrdiff_t>(cfg.guard_cells + half));
        right -= at(kk + 1 + static_cast<std::ptrdiff_t>(cfg.guard_cells));
    }
    return det;
}

struct PdEstimate {
    double p_d = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 1.0;
    std::size_t trials = 0;
};

inline PdEstimate wilson_interval(std::size_t hits, std::size_t trials) {
    const double z = 1.959963984540054; // 95%
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(hits) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double spread = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {p, center - spread, center + spread, trials};
}

// Monte-Carlo detection probability of the TOI bin. Every trial redraws
// modulation symbols, noise and target amplitudes. Trial t uses rng stream
// base_stream + t, so results do not depend on scheduling.
inline PdEstimate simulate_pd(const Constellation& c, const SensingScenario& sc,
                              const CfarConfig& cfg, std::size_t trials,
                              std::uint64_t seed, std::uint64_t base_stream = 0) {
    if (trials < 1000) throw std::invalid_argument("simulate_pd: trials must be >= 1000");
    validate(sc);
    validate(cfg, sc.numerology.n_subcarriers);
    const std::size_t toi_bin = sc.targets[toi_index(sc)].delay_bins;

    std::size_t hits = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        RngStream rng(seed, base_stream + t);
        const auto amps = draw_target_amplitudes(sc, rng);
        const SenseFrame f = sense_frame(c, sc, amps, rng);
        const auto det = ca_cfar(f.h_delay, cfg);
        hits += det[toi_bin];
    }
    return wilson_interval(hits, trials);
}

struct GaussianityStats {
    double excess_kurtosis = 0.0;
    double variance = 0.0;
    std::size_t sample_count = 0;
};

// Excess kurtosis of Re{w[k]} where w[k] = hhat[k] - h[k] is the delay-domain
// residual, pooled over off-peak bins (targets +-1 bin excluded).
inline GaussianityStats noise_gaussianity_stats(const Constellation& c,
                                                const SensingScenario& sc,
                                                std::size_t trials,
                                                std::uint64_t seed) {
    validate(sc);
    const std::size_t n = sc.numerology.n_subcarriers;
    std::vector<std::uint8_t> excluded(n, 0);
    for (const auto& t : sc.targets) {
        const std::size_t tau = t.delay_bins;
        excluded[tau] = 1;
        excluded[(tau + 1) % n] = 1;
        excluded[(tau + n - 1) % n] = 1;
    }

    double m2 = 0.0, m4 = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        RngStream rng(seed, t);
        const auto amps = draw_target_amplitudes(sc, rng);
        const SenseFrame f = sense_frame(c, sc, amps, rng);
        // deterministic delay-domain channel: sqrt(N) a_j at bin tau_j
        std::vector<cplx> h(n, 0.0);
        const double gain = std::sqrt(static_cast<double>(n));
        for (std::size_t j = 0; j < sc.targets.size(); ++j)
            h[sc.targets[j].delay_bins] += gain * amps[j];
        for (std::size_t k = 0; k < n; ++k) {
            if (excluded[k]) continue;
            const double x = (f.h_delay[k] - h[k]).real();
            m2 += x * x;
            m4 += x * x * x * x;
            ++count;
        }
    }
    GaussianityStats g;
    g.sample_count = count;
    m2 /= static_cast<double>(count);
    m4 /= static_cast<double>(count);
    g.variance = m2;
    g.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    return g;
}

} // namespace isac

#endif
