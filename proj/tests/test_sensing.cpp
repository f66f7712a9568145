#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "isac/constellation.hpp"
#include "isac/fft.hpp"
#include "isac/sensing.hpp"

using namespace isac;

namespace {

SensingScenario single_target(std::size_t n, std::size_t tau, double power, int swerling,
                              double sigma2) {
    SensingScenario sc;
    sc.numerology.n_subcarriers = n;
    sc.numerology.cp_len = n / 4;
    sc.targets = {{tau, power, swerling, true}};
    sc.noise_variance = sigma2;
    return sc;
}

// dense-DFT oracle for the transfer function: FFT of the sparse tap vector
std::vector<cplx> transfer_oracle(const SensingScenario& sc, const std::vector<cplx>& amps) {
    const std::size_t n = sc.numerology.n_subcarriers;
    std::vector<cplx> taps(n, 0.0);
    for (std::size_t j = 0; j < sc.targets.size(); ++j)
        taps[sc.targets[j].delay_bins] += amps[j];
    std::vector<cplx> h(n);
    for (std::size_t k = 0; k < n; ++k) {
        cplx s = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * M_PI * static_cast<double>(k * t) / static_cast<double>(n);
            s += taps[t] * cplx(std::cos(ang), std::sin(ang));
        }
        h[k] = s;
    }
    return h;
}

} // namespace

TEST_CASE("orthonormal FFT pair: round trip and Parseval") {
    RngStream rng(1, 0);
    std::vector<cplx> x(256);
    for (auto& v : x) v = rng.cgaussian(1.0);
    double pin = 0.0;
    for (auto v : x) pin += std::norm(v);

    std::vector<cplx> y = x;
    fft_ortho(y);
    double pout = 0.0;
    for (auto v : y) pout += std::norm(v);
    CHECK(pout == doctest::Approx(pin).epsilon(1e-12));

    ifft_ortho(y);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y[i] - x[i]) < 1e-12);
}

TEST_CASE("swerling amplitude draws") {
    SensingScenario s0 = single_target(64, 0, 4.0, 0, 1.0);
    RngStream rng(2, 0);
    for (int t = 0; t < 100; ++t)
        CHECK(std::abs(draw_target_amplitudes(s0, rng)[0]) == doctest::Approx(2.0).epsilon(1e-12));

    SensingScenario s1 = single_target(64, 0, 1.0, 1, 1.0);
    double p2 = 0.0;
    const int trials = 200000;
    for (int t = 0; t < trials; ++t)
        p2 += std::norm(draw_target_amplitudes(s1, rng)[0]);
    CHECK(p2 / trials == doctest::Approx(1.0).epsilon(0.02));

    SensingScenario sz = single_target(64, 0, 0.0, 1, 1.0);
    CHECK(std::abs(draw_target_amplitudes(sz, rng)[0]) == 0.0);
}

TEST_CASE("swerling-1 power is exponential (KS check)") {
    SensingScenario s1 = single_target(64, 0, 1.0, 1, 1.0);
    RngStream rng(23, 0);
    const std::size_t n = 1000000;
    std::vector<double> p2(n);
    for (auto& v : p2) v = std::norm(draw_target_amplitudes(s1, rng)[0]);
    std::sort(p2.begin(), p2.end());
    const double mean = std::accumulate(p2.begin(), p2.end(), 0.0) / n;
    CHECK(mean == doctest::Approx(1.0).epsilon(0.01));
    double ks = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = 1.0 - std::exp(-p2[i] / mean);
        ks = std::max(ks, std::abs(f - static_cast<double>(i + 1) / n));
    }
    CHECK(ks < 0.002);
}

TEST_CASE("channel transfer function") {
    // single target at zero delay: flat a
    SensingScenario sc = single_target(128, 0, 1.0, 0, 1.0);
    auto h = channel_transfer(sc, {cplx(1.0, 0.0)});
    for (auto v : h) CHECK(std::abs(v - cplx(1.0, 0.0)) < 1e-12);

    // nonzero delay keeps the modulus
    sc.targets[0].delay_bins = 3;
    h = channel_transfer(sc, {cplx(0.0, 2.0)});
    for (auto v : h) CHECK(std::abs(v) == doctest::Approx(2.0).epsilon(1e-12));

    // two targets vs dense DFT oracle
    SensingScenario sc2 = single_target(128, 5, 1.0, 0, 1.0);
    sc2.targets.push_back({17, 2.0, 0, false});
    const std::vector<cplx> amps = {{0.3, -1.1}, {-0.7, 0.4}};
    h = channel_transfer(sc2, amps);
    const auto oracle = transfer_oracle(sc2, amps);
    for (std::size_t n = 0; n < h.size(); ++n) CHECK(std::abs(h[n] - oracle[n]) < 1e-10);
}

TEST_CASE("noiseless PSK frame: exact delay-domain peak, empty side bins") {
    const Constellation c = make_psk(4);
    SensingScenario sc = single_target(256, 9, 1.0, 0, 1e-30);
    const std::vector<cplx> amps = {{0.8, 0.6}};
    RngStream rng(4, 0);
    const SenseFrame f = sense_frame(c, sc, amps, rng);
    // |X|^2 = 1 identically, so hhat[tau] = sqrt(N) a exactly
    CHECK(std::abs(f.h_delay[9] - 16.0 * amps[0]) < 1e-9);
    for (std::size_t k = 0; k < 256; ++k)
        if (k != 9) CHECK(std::abs(f.h_delay[k]) < 1e-9);
}

TEST_CASE("matched filter estimate is unbiased for 16-QAM") {
    const Constellation c = make_qam(4);
    SensingScenario sc = single_target(64, 3, 1.0, 0, 0.1);
    const std::vector<cplx> amps = {{1.0, 0.0}};
    const auto h = channel_transfer(sc, amps);
    const std::size_t trials = 20000;
    std::vector<cplx> mean(64, 0.0);
    for (std::size_t t = 0; t < trials; ++t) {
        RngStream rng(5, t);
        const SenseFrame f = sense_frame(c, sc, amps, rng);
        for (std::size_t n = 0; n < 64; ++n) mean[n] += f.h_freq[n];
    }
    const double var = freq_domain_variance(c, std::norm(h[0]), sc.noise_variance);
    const double tol = 3.0 * std::sqrt(var / trials / 2.0) * 3.0; // per real dim, slack
    for (std::size_t n = 0; n < 64; ++n)
        CHECK(std::abs(mean[n] / static_cast<double>(trials) - h[n]) < tol);
}

TEST_CASE("frequency-domain variance law") {
    CHECK(freq_domain_variance(make_psk(6), 5.0, 0.3) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(freq_domain_variance(make_qam(4), 1.0, 0.0) == doctest::Approx(0.32).epsilon(1e-12));
}

TEST_CASE("analytic SINR") {
    // PSK collapses the interference term
    const Constellation psk = make_psk(6);
    SensingScenario sc = single_target(1024, 0, 2.0, 0, 0.5);
    CHECK(analytic_sinr(psk, sc, 0) == doctest::Approx(1024.0 * 2.0 / 0.5).epsilon(1e-12));

    // worked two-target example
    Constellation c = make_qam(6);
    SensingScenario sc2 = single_target(1024, 0, 1e-3, 1, 1e-2);
    sc2.targets.push_back({139, 1.0, 0, false});
    const double kappa = kurtosis(c);
    const double expect = 1024.0 * 1e-3 / ((1e-3 + 1.0) * (kappa - 1.0) + 1e-2);
    CHECK(analytic_sinr(c, sc2, 0) == doctest::Approx(expect).epsilon(1e-12));

    // monotone in kappa: PSK beats QAM on the same geometry
    CHECK(analytic_sinr(psk, sc2, 0) > analytic_sinr(c, sc2, 0));
}

TEST_CASE("analytic detection probability") {
    CHECK(analytic_pd(0.0, 1e-3) == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(analytic_pd(1e12, 1e-3) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(analytic_pd(9.0, 1e-3) == doctest::Approx(std::pow(10.0, -0.3)).epsilon(1e-12));
    CHECK_THROWS(analytic_pd(-1.0, 1e-3));
    CHECK_THROWS(analytic_pd(1.0, 0.0));
}

TEST_CASE("CA-CFAR basics") {
    CfarConfig cfg{1e-3, 16, 2};
    // all-zero input: threshold positive, statistic zero, no detections
    std::vector<cplx> zeros(128, 0.0);
    for (auto d : ca_cfar(zeros, cfg)) CHECK(d == 0);

    // single strong peak over unit noise
    RngStream rng(6, 0);
    std::size_t detections = 0;
    const int trials = 500;
    for (int t = 0; t < trials; ++t) {
        std::vector<cplx> v(128);
        for (auto& x : v) x = rng.cgaussian(1.0);
        v[40] += cplx(100.0, 0.0); // 40 dB
        detections += ca_cfar(v, cfg)[40];
    }
    CHECK(static_cast<double>(detections) / trials > 0.999 - 1e-9);

    CHECK_THROWS(ca_cfar(zeros, CfarConfig{1e-3, 200, 2}));
    CHECK_THROWS(ca_cfar(zeros, CfarConfig{0.0, 16, 2}));
}

TEST_CASE("CA-CFAR sliding window matches a naive reference") {
    RngStream rng(7, 0);
    std::vector<cplx> v(64);
    for (auto& x : v) x = rng.cgaussian(1.0);
    CfarConfig cfg{1e-2, 10, 1};
    const auto fast = ca_cfar(v, cfg);
    const double alpha = cfar_threshold_factor(cfg);
    for (std::size_t k = 0; k < 64; ++k) {
        double noise = 0.0;
        for (std::size_t d = 1; d <= 5; ++d) {
            noise += std::norm(v[(k + cfg.guard_cells + d) % 64]);
            noise += std::norm(v[(k + 64 - cfg.guard_cells - d) % 64]);
        }
        noise /= 10.0;
        const bool det = std::norm(v[k]) > alpha * noise;
        CHECK(fast[k] == (det ? 1 : 0));
    }
}

TEST_CASE("time-domain and frequency-domain sensing paths agree") {
    const Constellation c = make_qam(4);
    // noiseless so the deterministic parts can be compared sample by sample
    // (the noise enters the two paths on opposite sides of the FFT)
    SensingScenario sc = single_target(128, 7, 1.0, 0, 1e-30);
    sc.targets.push_back({20, 0.5, 0, false});
    const std::vector<cplx> amps = {{0.6, -0.2}, {0.1, 0.9}};
    RngStream r1(8, 0), r2(8, 0);
    const SenseFrame ff = sense_frame(c, sc, amps, r1);
    const SenseFrame ft = sense_frame_time(c, sc, amps, r2);
    for (std::size_t n = 0; n < 128; ++n) CHECK(std::abs(ff.symbols[n] - ft.symbols[n]) < 1e-12);
    for (std::size_t n = 0; n < 128; ++n) CHECK(std::abs(ff.h_freq[n] - ft.h_freq[n]) < 1e-9);
}

TEST_CASE("simulate_pd: trivial and analytic-aligned cases") {
    const Constellation psk = make_psk(2);
    // noiseless, no interferer: always detected
    SensingScenario sure = single_target(128, 4, 1.0, 0, 1e-12);
    const PdEstimate pe = simulate_pd(psk, sure, {1e-3, 32, 2}, 1000, 9);
    CHECK(pe.p_d == doctest::Approx(1.0));

    // gamma tuned for analytic PD = 0.9, Swerling-1
    const double p_fa = 1e-3;
    const double gamma = std::log(p_fa) / std::log(0.9) - 1.0;
    SensingScenario sc = single_target(256, 11, 1.0, 1, 256.0 / gamma);
    const double pd_a = analytic_pd(analytic_sinr(psk, sc, 0), p_fa);
    CHECK(pd_a == doctest::Approx(0.9).epsilon(1e-6));
    const PdEstimate sim = simulate_pd(psk, sc, {p_fa, 64, 2}, 5000, 10);
    CHECK(std::abs(sim.p_d - 0.9) < 0.03);
}

TEST_CASE("residual noise is Gaussian for PSK at any N") {
    const Constellation psk = make_psk(4);
    SensingScenario sc = single_target(64, 0, 1.0, 0, 1.0 / 64.0 / 100.0);
    const GaussianityStats g = noise_gaussianity_stats(psk, sc, 2000, 12);
    // W X* with |X| = 1 is exactly Gaussian
    CHECK(std::abs(g.excess_kurtosis) < 3.0 * std::sqrt(24.0 / g.sample_count));
}

TEST_CASE("scenario validation") {
    SensingScenario sc = single_target(128, 200, 1.0, 0, 1.0);
    CHECK_THROWS(validate(sc)); // delay beyond CP
    sc = single_target(128, 3, 1.0, 2, 1.0);
    CHECK_THROWS(validate(sc)); // unknown swerling model
    sc = single_target(100, 3, 1.0, 0, 1.0);
    CHECK_THROWS(validate(sc)); // not a power of two
}
