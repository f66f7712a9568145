#ifndef ISAC_CHANNEL_HPP
#define ISAC_CHANNEL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "isac/constellation.hpp"
#include "isac/rng.hpp"

namespace isac {

// LLRs are clamped here so downstream arithmetic stays finite.
inline constexpr double kLlrSaturation = 300.0;

struct AwgnChannel {
    double noise_variance = 1.0; // per complex symbol

    static AwgnChannel from_snr_db(double snr_db) {
        return {std::pow(10.0, -snr_db / 10.0)};
    }
};

inline std::vector<cplx> transmit(const std::vector<cplx>& symbols,
                                  const AwgnChannel& ch, RngStream& rng) {
    if (ch.noise_variance <= 0.0) throw std::invalid_argument("transmit: noise variance must be > 0");
    std::vector<cplx> y(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i)
        y[i] = symbols[i] + rng.cgaussian(ch.noise_variance);
    return y;
}

enum class DemapPrior { Aware, Uniform };

// Per-bit 0/1 index sets plus log-priors, precomputed once per constellation.
struct DemapperWorkspace {
    const Constellation* c = nullptr;
    int bits = 0;
    std::vector<std::vector<std::uint32_t>> set0, set1; // [bit] -> point indices
    std::vector<double> log_prior;                      // ln P(x), -inf for p = 0

    DemapperWorkspace(const Constellation& cst, DemapPrior prior)
        : c(&cst), bits(cst.bits_per_symbol), set0(cst.bits_per_symbol),
          set1(cst.bits_per_symbol), log_prior(cst.size()) {
        for (std::size_t i = 0; i < cst.size(); ++i) {
            const double p = prior == DemapPrior::Aware
                                 ? cst.probs[i]
                                 : 1.0 / static_cast<double>(cst.size());
            log_prior[i] = p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
            for (int m = 0; m < bits; ++m)
                (cst.bit(i, m) ? set1[m] : set0[m]).push_back(static_cast<std::uint32_t>(i));
        }
    }
};

// Max-stabilized exp of per-point metrics d_i = ln P(x_i) - |y - x_i|^2 / sigma2.
// Subset sums of the returned weights give the two LLR branches.
inline void demap_metrics(const DemapperWorkspace& ws, cplx y, double sigma2,
                          std::vector<double>& expd, double& dmax) {
    const auto& c = *ws.c;
    const std::size_t n = c.size();
    expd.resize(n);
    dmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double d = ws.log_prior[i] - std::norm(y - c.points[i]) / sigma2;
        expd[i] = d;
        if (d > dmax) dmax = d;
    }
    for (std::size_t i = 0; i < n; ++i)
        expd[i] = std::isfinite(expd[i]) ? std::exp(expd[i] - dmax) : 0.0;
}

// Exact (not max-log) LLR: L_m = ln(sum_{X^0_m} P(x) f(y|x) / sum_{X^1_m} ...),
// positive L means bit 0 more likely. Saturated at +-300 nats.
inline std::vector<double> demap(cplx y, const DemapperWorkspace& ws, double sigma2) {
    if (sigma2 <= 0.0) throw std::invalid_argument("demap: sigma2 must be > 0");
    std::vector<double> expd;
    double dmax;
    demap_metrics(ws, y, sigma2, expd, dmax);
    std::vector<double> llr(ws.bits);
    for (int m = 0; m < ws.bits; ++m) {
        double s0 = 0.0, s1 = 0.0;
        for (auto i : ws.set0[m]) s0 += expd[i];
        for (auto i : ws.set1[m]) s1 += expd[i];
        double l;
        if (s0 <= 0.0 && s1 <= 0.0) l = 0.0;
        else if (s0 <= 0.0) l = -kLlrSaturation;
        else if (s1 <= 0.0) l = kLlrSaturation;
        else l = std::log(s0) - std::log(s1);
        llr[m] = std::clamp(l, -kLlrSaturation, kLlrSaturation);
    }
    return llr;
}

inline std::vector<double> demap(cplx y, const Constellation& c, double sigma2,
                                 DemapPrior prior = DemapPrior::Aware) {
    DemapperWorkspace ws(c, prior);
    return demap(y, ws, sigma2);
}

struct GmiEstimate {
    double gmi_bits = 0.0;
    std::vector<double> per_bit_mi;
    double std_error = 0.0;
    std::size_t sample_count = 0;
};

// log2(1 + exp(t)) without overflow
inline double log2_1p_exp(double t) {
    if (t > 40.0) return t / M_LN2;
    return std::log1p(std::exp(t)) / M_LN2;
}

inline double binary_entropy_bits(double p) {
    double h = 0.0;
    if (p > 0.0) h -= p * std::log2(p);
    if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
    return h;
}

// Monte-Carlo GMI via the bitwise cross-entropy estimator:
// I_m = H2(p_m) - E[log2(1 + exp(-(1-2b) L))], summed over bit levels.
inline GmiEstimate estimate_gmi(const Constellation& c, const AwgnChannel& ch,
                                std::size_t batch, RngStream& rng,
                                DemapPrior prior = DemapPrior::Aware) {
    if (batch < 1000) throw std::invalid_argument("estimate_gmi: batch must be >= 1000");
    const int M = c.bits_per_symbol;
    DemapperWorkspace ws_demap(c, prior);

    SampleBatch sb = sample(c, batch, rng);
    std::vector<cplx> y = transmit(sb.symbols, ch, rng);

    std::vector<double> ce_sum(M, 0.0);
    double tot_sum = 0.0, tot_sq = 0.0;
    std::vector<double> llr;
    for (std::size_t t = 0; t < batch; ++t) {
        llr = demap(y[t], ws_demap, ch.noise_variance);
        double tot = 0.0;
        for (int m = 0; m < M; ++m) {
            const int b = static_cast<int>((sb.bits[t] >> (M - 1 - m)) & 1u);
            const double s = 1.0 - 2.0 * b;
            const double ce = log2_1p_exp(-s * llr[m]);
            ce_sum[m] += ce;
            tot += ce;
        }
        tot_sum += tot;
        tot_sq += tot * tot;
    }

    // shaped-input BMD rate: H(X) - sum_m CE_m (reduces to M - sum CE_m for
    // uniform inputs); the per-bit entropy split H2(q_m) would overcount
    // whenever the bit levels are dependent
    const double hx = entropy_bits(c);
    GmiEstimate g;
    g.sample_count = batch;
    g.per_bit_mi.resize(M);
    g.gmi_bits = hx;
    for (int m = 0; m < M; ++m) {
        g.per_bit_mi[m] = hx / M - ce_sum[m] / static_cast<double>(batch);
        g.gmi_bits -= ce_sum[m] / static_cast<double>(batch);
    }
    const double n = static_cast<double>(batch);
    const double var = std::max(0.0, tot_sq / n - (tot_sum / n) * (tot_sum / n));
    g.std_error = std::sqrt(var / n);
    return g;
}

} // namespace isac

#endif
