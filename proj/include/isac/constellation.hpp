#ifndef ISAC_CONSTELLATION_HPP
#define ISAC_CONSTELLATION_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "isac/rng.hpp"

namespace isac {

using cplx = std::complex<double>;

enum class ShapingMode { Geometric, Probabilistic, Joint };

inline const char* to_string(ShapingMode m) {
    switch (m) {
        case ShapingMode::Geometric: return "geometric";
        case ShapingMode::Probabilistic: return "probabilistic";
        case ShapingMode::Joint: return "joint";
    }
    return "?";
}

inline ShapingMode shaping_mode_from_string(const std::string& s) {
    if (s == "geometric") return ShapingMode::Geometric;
    if (s == "probabilistic") return ShapingMode::Probabilistic;
    if (s == "joint") return ShapingMode::Joint;
    throw std::invalid_argument("unknown shaping mode: " + s);
}

// Points, probabilities and bit labels of a modulation alphabet.
// Labels are stored as integers; bit position m (m = 0..M-1) of point i is
// (labels[i] >> (M-1-m)) & 1, i.e. the label string reads MSB first.
struct Constellation {
    std::vector<cplx> points;
    std::vector<double> probs;
    int bits_per_symbol = 0;
    std::vector<std::uint32_t> labels;

    std::size_t size() const { return points.size(); }

    int bit(std::size_t i, int m) const {
        return static_cast<int>((labels[i] >> (bits_per_symbol - 1 - m)) & 1u);
    }

    std::string label_string(std::size_t i) const {
        std::string s(static_cast<std::size_t>(bits_per_symbol), '0');
        for (int m = 0; m < bits_per_symbol; ++m)
            if (bit(i, m)) s[static_cast<std::size_t>(m)] = '1';
        return s;
    }

    double power() const {
        double p = 0.0;
        for (std::size_t i = 0; i < size(); ++i) p += probs[i] * std::norm(points[i]);
        return p;
    }
};

struct RawShapingParams {
    std::vector<cplx> raw_points;
    std::vector<double> raw_logits;
};

// Simplex + unit-power + label-bijection check, 1e-12 tolerances.
inline void validate(const Constellation& c) {
    const std::size_t n = c.size();
    if (n == 0 || c.probs.size() != n || c.labels.size() != n)
        throw std::invalid_argument("constellation: inconsistent field sizes");
    if (n != (std::size_t(1) << c.bits_per_symbol))
        throw std::invalid_argument("constellation: size must be 2^bits_per_symbol");
    double psum = 0.0;
    for (double p : c.probs) {
        if (p < 0.0) throw std::invalid_argument("constellation: negative probability");
        psum += p;
    }
    if (std::abs(psum - 1.0) > 1e-12)
        throw std::invalid_argument("constellation: probabilities do not sum to 1");
    if (std::abs(c.power() - 1.0) > 1e-12)
        throw std::invalid_argument("constellation: average power is not 1");
    std::vector<bool> seen(n, false);
    for (std::uint32_t l : c.labels) {
        if (l >= n || seen[l]) throw std::invalid_argument("constellation: labels are not a bijection");
        seen[l] = true;
    }
}

inline double kurtosis(const Constellation& c) {
    double k = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double p2 = std::norm(c.points[i]);
        k += c.probs[i] * p2 * p2;
    }
    return k;
}

// -sum p log2 p with the 0*log0 = 0 convention
inline double entropy_bits(const Constellation& c) {
    double h = 0.0;
    for (double p : c.probs)
        if (p > 0.0) h -= p * std::log2(p);
    return h;
}

namespace detail {
inline std::uint32_t gray(std::uint32_t k) { return k ^ (k >> 1); }
}

// Square Gray-labeled 2^M-QAM, uniform probabilities, unit power.
inline Constellation make_qam(int bits_per_symbol) {
    if (bits_per_symbol < 2 || bits_per_symbol > 10 || bits_per_symbol % 2 != 0)
        throw std::invalid_argument("make_qam: bits_per_symbol must be even and in [2, 10]");
    const int half = bits_per_symbol / 2;
    const std::uint32_t side = 1u << half;
    const std::size_t n = std::size_t(1) << bits_per_symbol;

    Constellation c;
    c.bits_per_symbol = bits_per_symbol;
    c.points.resize(n);
    c.probs.assign(n, 1.0 / static_cast<double>(n));
    c.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) c.labels[i] = static_cast<std::uint32_t>(i);

    // Gray code per axis; label = (gray(col) << half) | gray(row)
    for (std::uint32_t col = 0; col < side; ++col) {
        for (std::uint32_t row = 0; row < side; ++row) {
            const std::uint32_t label = (detail::gray(col) << half) | detail::gray(row);
            const double re = 2.0 * col - (side - 1.0);
            const double im = 2.0 * row - (side - 1.0);
            c.points[label] = {re, im};
        }
    }
    double p = c.power();
    const double g = 1.0 / std::sqrt(p);
    for (auto& x : c.points) x *= g;
    return c;
}

// 2^M points uniformly on the unit circle, Gray labels along the circle.
inline Constellation make_psk(int bits_per_symbol) {
    if (bits_per_symbol < 1 || bits_per_symbol > 10)
        throw std::invalid_argument("make_psk: bits_per_symbol must be in [1, 10]");
    const std::size_t n = std::size_t(1) << bits_per_symbol;
    Constellation c;
    c.bits_per_symbol = bits_per_symbol;
    c.points.resize(n);
    c.probs.assign(n, 1.0 / static_cast<double>(n));
    c.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) c.labels[i] = static_cast<std::uint32_t>(i);
    for (std::size_t k = 0; k < n; ++k) {
        const double a = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
        c.points[detail::gray(static_cast<std::uint32_t>(k))] = {std::cos(a), std::sin(a)};
    }
    return c;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
    const double zmax = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - zmax);
        s += p[i];
    }
    for (auto& v : p) v /= s;
    return p;
}

// Maps unconstrained parameters onto a valid constellation.
// geometric: points from raw_points power-normalized under uniform probs;
// probabilistic: probs = softmax(raw_logits), base points renormalized;
// joint: both, normalization uses the softmax probs.
inline Constellation realize(const RawShapingParams& params, ShapingMode mode,
                             const Constellation& base) {
    Constellation c = base;
    const std::size_t n = base.size();
    if (mode != ShapingMode::Geometric) {
        if (params.raw_logits.size() != n)
            throw std::invalid_argument("realize: raw_logits size mismatch");
        c.probs = softmax(params.raw_logits);
    } else {
        c.probs.assign(n, 1.0 / static_cast<double>(n));
    }
    if (mode != ShapingMode::Probabilistic) {
        if (params.raw_points.size() != n)
            throw std::invalid_argument("realize: raw_points size mismatch");
        c.points = params.raw_points;
    } else {
        c.points = base.points;
    }
    const double g = 1.0 / std::sqrt(c.power());
    for (auto& x : c.points) x *= g;
    return c;
}

// Categorical draw of `count` symbols; zero-probability points are unreachable.
struct SampleBatch {
    std::vector<std::uint32_t> indices;
    std::vector<std::uint32_t> bits;    // label of the drawn point
    std::vector<cplx> symbols;
};

inline SampleBatch sample(const Constellation& c, std::size_t count, RngStream& rng) {
    if (count < 1) throw std::invalid_argument("sample: count must be >= 1");
    const std::size_t n = c.size();
    std::vector<double> cdf(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += c.probs[i];
        cdf[i] = acc;
    }
    cdf[n - 1] = 1.0;

    SampleBatch b;
    b.indices.resize(count);
    b.bits.resize(count);
    b.symbols.resize(count);
    for (std::size_t t = 0; t < count; ++t) {
        const double u = rng.uniform();
        const std::size_t i = static_cast<std::size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        b.indices[t] = static_cast<std::uint32_t>(i);
        b.bits[t] = c.labels[i];
        b.symbols[t] = c.points[i];
    }
    return b;
}

} // namespace isac

#endif
