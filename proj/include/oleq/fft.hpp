#ifndef OLEQ_FFT_HPP
#define OLEQ_FFT_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace oleq::fft {

using cplx = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace detail {

// In-place iterative radix-2. `sign` is the exponent sign: -1 forward, +1 inverse
// (unscaled).
inline void radix2(std::vector<cplx>& a, int sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    // Twiddles computed directly per index to avoid drift from repeated products.
    std::vector<cplx> tw(half);
    for (std::size_t k = 0; k < half; ++k)
      tw[k] = std::polar(1.0, ang * static_cast<double>(k));
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + half] * tw[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

// Bluestein chirp-z for arbitrary lengths.
inline void bluestein(std::vector<cplx>& a, int sign) {
  const std::size_t n = a.size();
  const std::size_t m = next_power_of_two(2 * n - 1);
  std::vector<cplx> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the argument small for large k.
    const auto k2 = static_cast<double>((k * k) % (2 * n));
    chirp[k] = std::polar(1.0, sign * std::numbers::pi * k2 / static_cast<double>(n));
  }
  std::vector<cplx> u(m, cplx{}), v(m, cplx{});
  for (std::size_t k = 0; k < n; ++k) u[k] = a[k] * chirp[k];
  v[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) v[k] = v[m - k] = std::conj(chirp[k]);
  radix2(u, -1);
  radix2(v, -1);
  for (std::size_t k = 0; k < m; ++k) u[k] *= v[k];
  radix2(u, +1);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = u[k] * scale * chirp[k];
}

inline void transform(std::vector<cplx>& a, int sign) {
  if (a.size() <= 1) return;
  if (is_power_of_two(a.size()))
    radix2(a, sign);
  else
    bluestein(a, sign);
}

}  // namespace detail

/// Unnormalized forward DFT: X[k] = sum_n x[n] exp(-j 2 pi k n / N).
inline std::vector<cplx> forward(std::span<const cplx> x) {
  std::vector<cplx> a(x.begin(), x.end());
  detail::transform(a, -1);
  return a;
}

/// Inverse DFT with 1/N scaling, so inverse(forward(x)) == x.
inline std::vector<cplx> inverse(std::span<const cplx> x) {
  std::vector<cplx> a(x.begin(), x.end());
  detail::transform(a, +1);
  const double scale = 1.0 / static_cast<double>(a.size());
  for (auto& v : a) v *= scale;
  return a;
}

/// Frequency of DFT bin k for an N-point transform at `sample_rate`, mapped to
/// [-fs/2, fs/2).
inline double bin_frequency(std::size_t k, std::size_t n, double sample_rate) {
  const auto ki = static_cast<long long>(k);
  const auto ni = static_cast<long long>(n);
  const long long signed_k = (2 * ki >= ni) ? ki - ni : ki;
  return static_cast<double>(signed_k) * sample_rate / static_cast<double>(n);
}

}  // namespace oleq::fft

#endif  // OLEQ_FFT_HPP
