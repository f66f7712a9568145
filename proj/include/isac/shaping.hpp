#ifndef ISAC_SHAPING_HPP
#define ISAC_SHAPING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "isac/channel.hpp"
#include "isac/constellation.hpp"
#include "isac/rng.hpp"

namespace isac {

// Piecewise schedule over training steps. Knots are (step, value) pairs in
// ascending step order; lookup holds, interpolates linearly, or interpolates
// geometrically between knots.
enum class ScheduleInterp { Hold, Linear, Geometric };

using Schedule = std::vector<std::pair<int, double>>;

inline double schedule_value(const Schedule& sched, int step, ScheduleInterp interp) {
    if (sched.empty()) throw std::invalid_argument("schedule: empty");
    if (step <= sched.front().first) return sched.front().second;
    for (std::size_t i = 1; i < sched.size(); ++i) {
        if (step < sched[i].first) {
            const auto& [s0, v0] = sched[i - 1];
            const auto& [s1, v1] = sched[i];
            if (interp == ScheduleInterp::Hold) return v0;
            const double t = static_cast<double>(step - s0) / static_cast<double>(s1 - s0);
            if (interp == ScheduleInterp::Linear) return v0 + t * (v1 - v0);
            return v0 * std::pow(v1 / v0, t);
        }
    }
    return sched.back().second;
}

struct TrainConfig {
    ShapingMode mode = ShapingMode::Joint;
    int bits_per_symbol = 6;
    double snr_c_db = 10.0;
    double kappa_limit = 2.0; // kappa_tilde, in [1, 2]
    double penalty = 3.0;     // d
    int total_steps = 10000;
    Schedule batch_schedule;  // linear interpolation
    Schedule lr_schedule;     // hold
    Schedule tau_schedule;    // geometric interpolation
    std::uint64_t seed = 1;
};

inline void validate(const TrainConfig& cfg) {
    if (cfg.bits_per_symbol < 1 || cfg.bits_per_symbol > 10)
        throw std::invalid_argument("train config: bits_per_symbol out of range");
    if (cfg.kappa_limit < 1.0)
        throw std::invalid_argument("train config: kappa_limit must be >= 1");
    if (cfg.penalty <= 0.0)
        throw std::invalid_argument("train config: penalty must be > 0");
    if (cfg.total_steps < 1)
        throw std::invalid_argument("train config: total_steps must be >= 1");
    if (cfg.batch_schedule.empty() || cfg.lr_schedule.empty() || cfg.tau_schedule.empty())
        throw std::invalid_argument("train config: empty schedule");
}

// Batch ramps 500 -> 10000, learning rate halves every quarter of the run
// with a mode-dependent initial value, fixed Gumbel temperature 1.
inline TrainConfig default_train_config(ShapingMode mode, int bits_per_symbol = 6) {
    TrainConfig cfg;
    cfg.mode = mode;
    cfg.bits_per_symbol = bits_per_symbol;
    cfg.batch_schedule = {{0, 500.0}, {cfg.total_steps, 10000.0}};
    const double lr0 = mode == ShapingMode::Probabilistic ? 5e-3 : 1e-3;
    cfg.lr_schedule.clear();
    for (int q = 0; q < 4; ++q)
        cfg.lr_schedule.emplace_back(q * cfg.total_steps / 4, lr0 * std::pow(0.5, q));
    cfg.tau_schedule = {{0, 1.0}};
    return cfg;
}

// hinge-form sensing loss: 0 below the limit, d * excess above
inline double sensing_loss(double kappa, double kappa_limit, double penalty) {
    return kappa <= kappa_limit ? 0.0 : penalty * (kappa - kappa_limit);
}

inline double total_loss(double gmi, int bits_per_symbol, double sens_loss) {
    return (static_cast<double>(bits_per_symbol) - gmi) / static_cast<double>(bits_per_symbol) +
           sens_loss;
}

// Relaxed categorical draw. Soft vectors are softmax((ln p + g) / tau) with
// standard Gumbel g; hard indices are the argmax (Gumbel-max draw from p).
struct GumbelSample {
    std::vector<std::vector<double>> soft; // [count][n]
    std::vector<std::uint32_t> hard;
};

inline GumbelSample gumbel_sample(const std::vector<double>& probs, double tau,
                                  std::size_t count, RngStream& rng) {
    if (tau <= 0.0) throw std::invalid_argument("gumbel_sample: tau must be > 0");
    const std::size_t n = probs.size();
    std::vector<double> logp(n);
    for (std::size_t i = 0; i < n; ++i)
        logp[i] = probs[i] > 0.0 ? std::log(probs[i]) : -1e30;

    GumbelSample out;
    out.soft.assign(count, std::vector<double>(n));
    out.hard.resize(count);
    std::vector<double> z(n);
    for (std::size_t t = 0; t < count; ++t) {
        std::size_t arg = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double u = rng.uniform();
            z[i] = (logp[i] - std::log(-std::log(u))) / tau;
            if (z[i] > z[arg]) arg = i;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            out.soft[t][i] = std::exp(z[i] - z[arg]);
            s += out.soft[t][i];
        }
        for (auto& v : out.soft[t]) v /= s;
        out.hard[t] = static_cast<std::uint32_t>(arg);
    }
    return out;
}

// Fixed stochastic draws for one training step: Gumbel uniforms per draw and
// point, plus standard CN(0,1) channel noise per draw.
struct StepDraws {
    std::vector<double> gumbel_u; // batch * n, row-major
    std::vector<cplx> noise;      // batch

    std::size_t batch() const { return noise.size(); }
};

inline StepDraws make_step_draws(std::size_t batch, std::size_t n_points, RngStream& rng) {
    StepDraws d;
    d.gumbel_u.resize(batch * n_points);
    for (auto& u : d.gumbel_u) u = rng.uniform();
    d.noise.resize(batch);
    for (auto& w : d.noise) w = rng.cgaussian(1.0);
    return d;
}

// Frozen straight-through reference (hard indices and the soft vectors at the
// reference parameters). With a reference, the forward value is the smooth
// surrogate  t_b = x[hard_b] + sum_i (soft_i - soft0_i) x_i,  which equals the
// hard forward at the reference point and whose derivative is the
// straight-through gradient. Used by the finite-difference tests.
struct StRef {
    std::vector<std::uint32_t> hard;
    std::vector<std::vector<double>> soft0; // [batch][n]
};

struct ShapingGradients {
    std::vector<cplx> d_raw_points; // (d/dRe, d/dIm) packed as complex
    std::vector<double> d_raw_logits;
};

struct StepResult {
    double loss = 0.0;
    double comms_loss = 0.0;
    double sens_loss = 0.0;
    double gmi = 0.0;
    double kappa = 0.0;
    ShapingGradients grad;
};

class TrainStepError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// One forward/backward evaluation of the loss
//   L = (M - GMI)/M + d * max(0, kappa - kappa_limit)
// through softmax probabilities, power normalization, straight-through
// Gumbel symbol selection, AWGN, the prior-aware Gaussian demapper and the
// bitwise cross-entropy GMI estimator. Gradients are exact for the
// straight-through surrogate with the given frozen draws. When probabilities
// are trainable (probabilistic and joint modes) the symbol expectation is
// enumerated instead of sampled: each noise draw evaluates every point,
// weighted by its probability, which makes the probability gradient
// unbiased. The straight-through estimator's bias otherwise settles the
// kurtosis measurably above the constraint; geometric mode, where only the
// points move, keeps the Gumbel straight-through path.
inline StepResult shaping_step(const RawShapingParams& params, const TrainConfig& cfg,
                               const Constellation& base, const StepDraws& draws,
                               double gumbel_tau, const StRef* ref = nullptr) {
    const std::size_t n = base.size();
    const int M = cfg.bits_per_symbol;
    const std::size_t B = draws.batch();
    if (B < 1) throw std::invalid_argument("shaping_step: empty batch");
    const double sigma2 = std::pow(10.0, -cfg.snr_c_db / 10.0);
    const bool probs_trainable = cfg.mode != ShapingMode::Geometric;
    const bool points_trainable = cfg.mode != ShapingMode::Probabilistic;

    // probabilities
    std::vector<double> p(n);
    if (probs_trainable) {
        if (params.raw_logits.size() != n)
            throw std::invalid_argument("shaping_step: raw_logits size mismatch");
        p = softmax(params.raw_logits);
    } else {
        p.assign(n, 1.0 / static_cast<double>(n));
    }
    std::vector<double> logp(n);
    for (std::size_t i = 0; i < n; ++i) logp[i] = std::log(p[i]);

    // power normalization
    const std::vector<cplx>& raw_x = points_trainable ? params.raw_points : base.points;
    if (raw_x.size() != n) throw std::invalid_argument("shaping_step: raw_points size mismatch");
    double pw = 0.0;
    for (std::size_t i = 0; i < n; ++i) pw += p[i] * std::norm(raw_x[i]);
    const double gain = 1.0 / std::sqrt(pw);
    std::vector<cplx> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = gain * raw_x[i];

    // kurtosis of the realized constellation
    double kappa = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a2 = std::norm(x[i]);
        kappa += p[i] * a2 * a2;
    }

    std::vector<double> z(n), soft(n);
    std::vector<double> D(n), expd(n);
    const double noise_scale = std::sqrt(sigma2);

    std::vector<double> ce_mean(M, 0.0);
    std::vector<double> g_lnp(n, 0.0);  // through the Gumbel logits path
    std::vector<double> g_p(n, 0.0);    // direct dL/dp at fixed x
    std::vector<cplx> g_x(n, 0.0);      // dL/dx (normalized points)

    // demap y (transmitted symbol index tx, statistical weight w summing to 1
    // over all processed draws), accumulate CE and its backward into
    // g_x/g_p, and return dLoss/dy plus the draw's total CE in bits
    auto process = [&](cplx y, std::size_t tx, double w, double& ce_bits) -> cplx {
        double dmax = -1e300;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = logp[i] - std::norm(y - x[i]) / sigma2;
            expd[i] = d;
            if (d > dmax) dmax = d;
        }
        for (std::size_t i = 0; i < n; ++i) expd[i] = std::exp(expd[i] - dmax);

        std::fill(D.begin(), D.end(), 0.0);
        const std::uint32_t label = base.labels[tx];
        ce_bits = 0.0;
        for (int m = 0; m < M; ++m) {
            double a0 = 0.0, a1 = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                ((base.labels[i] >> (M - 1 - m)) & 1u ? a1 : a0) += expd[i];
            double llr;
            if (a0 <= 0.0 || a1 <= 0.0)
                llr = a0 <= 0.0 ? -kLlrSaturation : kLlrSaturation;
            else
                llr = std::log(a0) - std::log(a1);
            llr = std::clamp(llr, -kLlrSaturation, kLlrSaturation);

            const int bit = static_cast<int>((label >> (M - 1 - m)) & 1u);
            const double s = 1.0 - 2.0 * bit;
            const double ce = log2_1p_exp(-s * llr);
            ce_bits += ce;
            ce_mean[m] += w * ce;

            // dLoss/dLLR for this draw and bit level
            const double sig = 1.0 / (1.0 + std::exp(s * llr));
            const double a = -s * sig * w / (static_cast<double>(M) * M_LN2);
            if (a0 > 0.0 && a1 > 0.0) {
                const double w0 = a / a0, w1 = a / a1;
                for (std::size_t i = 0; i < n; ++i)
                    D[i] += ((base.labels[i] >> (M - 1 - m)) & 1u) ? -w1 * expd[i] : w0 * expd[i];
            }
        }

        cplx gy = 0.0;
        const double inv_s2 = 2.0 / sigma2;
        for (std::size_t i = 0; i < n; ++i) {
            if (D[i] == 0.0) continue;
            const cplx r = y - x[i];
            g_x[i] += D[i] * inv_s2 * r;
            gy -= D[i] * inv_s2 * r;
            g_p[i] += D[i] / p[i];
        }
        g_x[tx] += gy;
        return gy;
    };

    if (probs_trainable) {
        // the categorical expectation is computed exactly by enumerating all
        // symbols per noise draw (no Gumbel sampling), so the probability
        // gradient is unbiased: dCE/dp_i = E_w[ce(x_i + w)]; point gradients
        // fall out of the same weighted backward
        const double wb = 1.0 / static_cast<double>(B);
        for (std::size_t b = 0; b < B; ++b) {
            const cplx w = noise_scale * draws.noise[b];
            for (std::size_t i = 0; i < n; ++i) {
                double ce_bits = 0.0;
                process(x[i] + w, i, p[i] * wb, ce_bits);
                g_p[i] += wb * ce_bits / static_cast<double>(M); // sampling measure
            }
        }
    } else {
        // straight-through Gumbel symbol selection per draw
        for (std::size_t b = 0; b < B; ++b) {
            const double* u_row = &draws.gumbel_u[b * n];
            std::size_t arg = 0;
            for (std::size_t i = 0; i < n; ++i) {
                z[i] = (logp[i] - std::log(-std::log(u_row[i]))) / gumbel_tau;
                if (z[i] > z[arg]) arg = i;
            }
            const std::uint32_t hard = ref ? ref->hard[b] : static_cast<std::uint32_t>(arg);
            double ssum = 0.0;
            if (probs_trainable || ref) {
                for (std::size_t i = 0; i < n; ++i) {
                    soft[i] = std::exp(z[i] - z[arg]);
                    ssum += soft[i];
                }
                for (std::size_t i = 0; i < n; ++i) soft[i] /= ssum;
            }

            cplx t = x[hard];
            if (ref) {
                for (std::size_t i = 0; i < n; ++i)
                    t += (soft[i] - ref->soft0[b][i]) * x[i];
            }
            double ce_bits = 0.0;
            const cplx gy = process(t + noise_scale * draws.noise[b], hard,
                                    1.0 / static_cast<double>(B), ce_bits);

            if (probs_trainable) {
                // straight-through path: gy -> soft -> z -> ln p
                double inner = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    z[i] = gy.real() * x[i].real() + gy.imag() * x[i].imag(); // reuse z as g_soft
                    inner += z[i] * soft[i];
                }
                for (std::size_t i = 0; i < n; ++i)
                    g_lnp[i] += soft[i] * (z[i] - inner) / gumbel_tau;
            }
        }
    }

    // losses: shaped-input BMD rate H(X) - sum_m CE_m
    double gmi = 0.0;
    for (std::size_t i = 0; i < n; ++i) gmi -= p[i] * logp[i] / M_LN2;
    for (int m = 0; m < M; ++m) gmi -= ce_mean[m];
    StepResult res;
    res.kappa = kappa;
    res.gmi = gmi;
    res.sens_loss = sensing_loss(kappa, cfg.kappa_limit, cfg.penalty);
    res.comms_loss = (static_cast<double>(M) - gmi) / static_cast<double>(M);
    res.loss = res.comms_loss + res.sens_loss;

    // source entropy path: d/dp_i [-(1/M) H(X)] = (ln p_i + 1) / (M ln 2)
    for (std::size_t i = 0; i < n; ++i)
        g_p[i] += (logp[i] + 1.0) / (static_cast<double>(M) * M_LN2);

    // kurtosis penalty path
    const double dlk = kappa > cfg.kappa_limit ? cfg.penalty : 0.0;
    if (dlk != 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            const double a2 = std::norm(x[i]);
            g_p[i] += dlk * a2 * a2;
            g_x[i] += dlk * p[i] * 4.0 * a2 * x[i];
        }
    }

    // fold the Gumbel logits path into dL/dp
    if (probs_trainable)
        for (std::size_t i = 0; i < n; ++i) g_p[i] += g_lnp[i] / p[i];

    // power normalization backward: x_i = gain * raw_x_i, gain = pw^{-1/2}
    double sdot = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        sdot += g_x[i].real() * raw_x[i].real() + g_x[i].imag() * raw_x[i].imag();
    const double pw_m32 = std::pow(pw, -1.5);

    res.grad.d_raw_points.assign(n, 0.0);
    if (points_trainable)
        for (std::size_t i = 0; i < n; ++i)
            res.grad.d_raw_points[i] = gain * g_x[i] - sdot * pw_m32 * p[i] * raw_x[i];

    res.grad.d_raw_logits.assign(n, 0.0);
    if (probs_trainable) {
        for (std::size_t i = 0; i < n; ++i)
            g_p[i] += -0.5 * sdot * pw_m32 * std::norm(raw_x[i]);
        double pg = 0.0;
        for (std::size_t i = 0; i < n; ++i) pg += g_p[i] * p[i];
        for (std::size_t i = 0; i < n; ++i)
            res.grad.d_raw_logits[i] = p[i] * (g_p[i] - pg);
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(res.grad.d_raw_points[i].real()) ||
            !std::isfinite(res.grad.d_raw_points[i].imag()) ||
            !std::isfinite(res.grad.d_raw_logits[i]))
            throw TrainStepError("non-finite gradient at point " + std::to_string(i) +
                                 " (loss=" + std::to_string(res.loss) +
                                 ", kappa=" + std::to_string(kappa) + ")");
    }
    return res;
}

struct AdamState {
    std::vector<double> m, v;
    std::int64_t t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit AdamState(std::size_t dim) : m(dim, 0.0), v(dim, 0.0) {}

    void update(std::vector<double>& x, const std::vector<double>& g, double lr) {
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < x.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

struct TraceRecord {
    int step = 0;
    double loss = 0.0, gmi = 0.0, kurtosis = 0.0, sens_loss = 0.0, lr = 0.0;
    std::size_t batch = 0;
};

struct TrainResult {
    Constellation constellation;
    RawShapingParams params;
    std::vector<TraceRecord> trace;
    bool diverged = false;
};

// Full optimization loop: QAM initialization, scheduled batch/lr/tau, Adam
// updates of the mode's trainable parameters. Deterministic given the seed.
inline TrainResult train(const TrainConfig& cfg) {
    validate(cfg);
    const Constellation base = make_qam(cfg.bits_per_symbol);
    const std::size_t n = base.size();

    RawShapingParams params;
    params.raw_points = base.points;
    params.raw_logits.assign(n, 0.0);

    // flat parameter vector: [re0, im0, re1, im1, ..., logits...]
    std::vector<double> flat(3 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        flat[2 * i] = params.raw_points[i].real();
        flat[2 * i + 1] = params.raw_points[i].imag();
    }
    AdamState adam(3 * n);

    TrainResult out;
    out.trace.reserve(static_cast<std::size_t>(cfg.total_steps));
    std::vector<double> gflat(3 * n);

    for (int step = 0; step < cfg.total_steps; ++step) {
        std::size_t batch = static_cast<std::size_t>(
            std::lround(schedule_value(cfg.batch_schedule, step, ScheduleInterp::Linear)));
        // enumerating the grid per noise draw costs n demaps per draw; scale
        // the draw count down to keep the step cost comparable
        if (cfg.mode != ShapingMode::Geometric)
            batch = std::max<std::size_t>(32, batch / 16);
        const double lr = schedule_value(cfg.lr_schedule, step, ScheduleInterp::Hold);
        const double tau = schedule_value(cfg.tau_schedule, step, ScheduleInterp::Geometric);

        for (std::size_t i = 0; i < n; ++i)
            params.raw_points[i] = {flat[2 * i], flat[2 * i + 1]};
        for (std::size_t i = 0; i < n; ++i) params.raw_logits[i] = flat[2 * n + i];

        RngStream rng(cfg.seed, static_cast<std::uint64_t>(step) + 1);
        const StepDraws draws = make_step_draws(batch, n, rng);

        StepResult res;
        try {
            res = shaping_step(params, cfg, base, draws, tau);
        } catch (const TrainStepError&) {
            out.diverged = true;
            break;
        }
        if (!std::isfinite(res.loss)) {
            out.diverged = true;
            break;
        }
        out.trace.push_back({step, res.loss, res.gmi, res.kappa, res.sens_loss, lr, batch});

        for (std::size_t i = 0; i < n; ++i) {
            gflat[2 * i] = res.grad.d_raw_points[i].real();
            gflat[2 * i + 1] = res.grad.d_raw_points[i].imag();
            gflat[2 * n + i] = res.grad.d_raw_logits[i];
        }
        adam.update(flat, gflat, lr);
    }

    for (std::size_t i = 0; i < n; ++i)
        params.raw_points[i] = {flat[2 * i], flat[2 * i + 1]};
    for (std::size_t i = 0; i < n; ++i) params.raw_logits[i] = flat[2 * n + i];
    out.params = params;
    out.constellation = realize(params, cfg.mode, base);
    return out;
}

} // namespace isac

#endif
