#ifndef ISAC_FFT_HPP
#define ISAC_FFT_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace isac {

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// in-place iterative radix-2, sign = -1 forward / +1 inverse, no scaling
inline void fft_radix2(std::vector<std::complex<double>>& a, int sign) {
    const std::size_t n = a.size();
    if (!is_pow2(n)) throw std::invalid_argument("fft: length must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

} // namespace detail

// Orthonormal DFT pair: both directions scale by 1/sqrt(N), so
// ifft(fft(x)) == x and power is preserved (Parseval).
inline void fft_ortho(std::vector<std::complex<double>>& a) {
    detail::fft_radix2(a, -1);
    const double s = 1.0 / std::sqrt(static_cast<double>(a.size()));
    for (auto& v : a) v *= s;
}

inline void ifft_ortho(std::vector<std::complex<double>>& a) {
    detail::fft_radix2(a, +1);
    const double s = 1.0 / std::sqrt(static_cast<double>(a.size()));
    for (auto& v : a) v *= s;
}

} // namespace isac

#endif
