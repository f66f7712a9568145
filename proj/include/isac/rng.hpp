#ifndef ISAC_RNG_HPP
#define ISAC_RNG_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace isac {

// Seeded stream with hand-rolled transforms so the draw sequence is
// reproducible for a given (seed, stream) pair regardless of platform
// library internals. Disjoint streams for concurrent workers are obtained
// by varying the stream id.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : gen_(mix(seed, stream)) {}

    // uniform in (0, 1)
    double uniform() {
        const std::uint64_t r = gen_();
        double u = static_cast<double>(r >> 11) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }

    // standard normal, Box-Muller with cached second variate
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // circular complex Gaussian with total variance `var`
    std::complex<double> cgaussian(double var) {
        const double s = std::sqrt(var / 2.0);
        const double re = gaussian();
        const double im = gaussian();
        return {s * re, s * im};
    }

    std::uint64_t raw() { return gen_(); }

private:
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        // splitmix-style avalanche of the pair
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace isac

#endif
