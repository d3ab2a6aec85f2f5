#ifndef OLEQ_WAVEFORM_HPP
#define OLEQ_WAVEFORM_HPP

// Sampled-signal containers and the DSP primitives shared by the link chain:
// integer-sample delay, linear-phase FIR design and filtering, frequency
// translation and discrete spectra.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "oleq/fft.hpp"

namespace oleq {

using cplx = std::complex<double>;

/// Uniformly sampled complex envelope (optical field or coherent-receiver output).
struct ComplexWaveform {
  std::vector<cplx> samples;
  double sample_rate = 0.0;  // Hz

  std::size_t size() const { return samples.size(); }
  cplx& operator[](std::size_t i) { return samples[i]; }
  const cplx& operator[](std::size_t i) const { return samples[i]; }
  bool operator==(const ComplexWaveform&) const = default;
};

/// Uniformly sampled real signal, e.g. a photocurrent.
struct RealWaveform {
  std::vector<double> samples;
  double sample_rate = 0.0;  // Hz

  std::size_t size() const { return samples.size(); }
  bool operator==(const RealWaveform&) const = default;
};

/// Real FIR kernel. Symmetric kernels are linear phase with an integer group
/// delay of (len - 1) / 2 samples when the length is odd.
struct FirKernel {
  std::vector<double> coefficients;

  std::size_t size() const { return coefficients.size(); }
  std::size_t group_delay() const { return coefficients.empty() ? 0 : (coefficients.size() - 1) / 2; }
  double dc_gain() const { return std::accumulate(coefficients.begin(), coefficients.end(), 0.0); }
};

/// One bin of a discrete spectrum.
struct SpectralBin {
  double frequency = 0.0;  // Hz, in [-fs/2, fs/2)
  cplx amplitude;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

/// mean(|x|^2)
inline double power(const ComplexWaveform& w) {
  if (w.samples.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : w.samples) acc += std::norm(s);
  return acc / static_cast<double>(w.samples.size());
}

inline double energy(const ComplexWaveform& w) {
  double acc = 0.0;
  for (const auto& s : w.samples) acc += std::norm(s);
  return acc;
}

/// Shift by an integer number of samples; positive k delays. Vacated samples are zero.
template <typename W>
W delay_samples(const W& w, long long k) {
  W out = w;
  const auto n = static_cast<long long>(w.samples.size());
  using T = typename decltype(w.samples)::value_type;
  for (long long i = 0; i < n; ++i) {
    const long long src = i - k;
    out.samples[static_cast<std::size_t>(i)] =
        (src >= 0 && src < n) ? w.samples[static_cast<std::size_t>(src)] : T{};
  }
  return out;
}

/// Converts a time shift to a sample count, rejecting shifts that are not an
/// integer number of sample periods (within 1e-9 relative).
inline long long shift_in_samples(double dt, double sample_rate) {
  require(sample_rate > 0.0, "sample_rate must be positive");
  const double exact = dt * sample_rate;
  const double k = std::round(exact);
  if (std::abs(exact - k) > 1e-9 * std::max(1.0, std::abs(exact)))
    throw std::invalid_argument("delay of " + std::to_string(dt) +
                                " s is not an integer number of samples at " +
                                std::to_string(sample_rate) + " Sa/s");
  return static_cast<long long>(k);
}

/// output[n] = input[n - round(dt * fs)]; length preserved.
inline ComplexWaveform delay(const ComplexWaveform& w, double dt) {
  return delay_samples(w, shift_in_samples(dt, w.sample_rate));
}

namespace detail {

inline double blackman(std::size_t n, std::size_t len) {
  if (len == 1) return 1.0;
  const double x = 2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(len - 1);
  return 0.42 - 0.5 * std::cos(x) + 0.08 * std::cos(2.0 * x);
}

// Blackman main-lobe width is ~5.5 fs / len; 6 leaves margin for the 60 dB target.
inline std::size_t blackman_length(double transition, double sample_rate) {
  auto len = static_cast<std::size_t>(std::ceil(6.0 * sample_rate / transition));
  if (len % 2 == 0) ++len;
  return std::max<std::size_t>(len, 3);
}

inline std::vector<double> windowed_sinc(double cutoff, std::size_t len, double sample_rate) {
  std::vector<double> h(len);
  const double fc = cutoff / sample_rate;
  const auto mid = static_cast<double>(len - 1) / 2.0;
  for (std::size_t n = 0; n < len; ++n) {
    const double t = static_cast<double>(n) - mid;
    const double sinc = (t == 0.0) ? 2.0 * fc
                                   : std::sin(2.0 * std::numbers::pi * fc * t) / (std::numbers::pi * t);
    h[n] = sinc * blackman(n, len);
  }
  for (std::size_t n = 0; n < len / 2; ++n) h[len - 1 - n] = h[n];
  return h;
}

}  // namespace detail

/// Linear-phase Blackman windowed-sinc lowpass. `cutoff` is the -6 dB point and
/// `transition` the full transition width centred on it. DC gain is exactly 1.
inline FirKernel design_lowpass(double cutoff, double transition, double sample_rate) {
  require(sample_rate > 0.0, "sample_rate must be positive");
  require(cutoff > 0.0 && cutoff < sample_rate / 2.0, "lowpass cutoff must lie in (0, fs/2)");
  require(transition > 0.0, "transition width must be positive");
  const std::size_t len = detail::blackman_length(transition, sample_rate);
  auto h = detail::windowed_sinc(cutoff, len, sample_rate);
  const double sum = std::accumulate(h.begin(), h.end(), 0.0);
  for (auto& c : h) c /= sum;
  return FirKernel{std::move(h)};
}

/// Linear-phase bandpass centred on `center`: a lowpass prototype with cutoff and
/// transition both equal to `halfwidth`, shifted up by cosine modulation. Flat over
/// center +- halfwidth/2, stopband beyond center +- 1.5 halfwidth.
inline FirKernel design_bandpass(double center, double halfwidth, double sample_rate) {
  require(sample_rate > 0.0, "sample_rate must be positive");
  require(halfwidth > 0.0, "bandpass halfwidth must be positive");
  require(center - halfwidth > 0.0 && center + halfwidth < sample_rate / 2.0,
          "bandpass band must lie inside (0, fs/2)");
  FirKernel proto = design_lowpass(halfwidth, halfwidth, sample_rate);
  const auto mid = static_cast<double>(proto.size() - 1) / 2.0;
  for (std::size_t n = 0; n < proto.size(); ++n) {
    const double t = static_cast<double>(n) - mid;
    proto.coefficients[n] *= 2.0 * std::cos(2.0 * std::numbers::pi * center * t / sample_rate);
  }
  for (std::size_t n = 0; n < proto.size() / 2; ++n) proto.coefficients[proto.size() - 1 - n] = proto.coefficients[n];
  return proto;
}

/// Zero-padded convolution trimmed to the input length and advanced by the
/// kernel's group delay, so a symmetric kernel adds no net delay.
template <typename W>
W convolve_same(const W& w, const FirKernel& k) {
  require(!k.coefficients.empty(), "kernel is empty");
  require(k.size() <= w.size(), "kernel must not be longer than the waveform");
  using T = typename decltype(w.samples)::value_type;
  const auto n = static_cast<long long>(w.size());
  const auto len = static_cast<long long>(k.size());
  const auto gd = static_cast<long long>(k.group_delay());
  W out = w;
  for (long long i = 0; i < n; ++i) {
    // out[i] = sum_j k[j] * x[i + gd - j]
    const long long jlo = std::max(0LL, i + gd - (n - 1));
    const long long jhi = std::min(len - 1, i + gd);
    T acc{};
    for (long long j = jlo; j <= jhi; ++j)
      acc += k.coefficients[static_cast<std::size_t>(j)] * w.samples[static_cast<std::size_t>(i + gd - j)];
    out.samples[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

/// samples[n] *= exp(sign * j 2 pi f n / fs)
inline ComplexWaveform heterodyne(const ComplexWaveform& w, double f, int sign) {
  require(std::abs(f) < w.sample_rate / 2.0, "heterodyne frequency must be below Nyquist");
  require(sign == 1 || sign == -1, "heterodyne sign must be +1 or -1");
  ComplexWaveform out = w;
  const double cycles_per_sample = f / w.sample_rate;
  for (std::size_t n = 0; n < w.size(); ++n) {
    const double cyc = std::fmod(cycles_per_sample * static_cast<double>(n), 1.0);
    out.samples[n] *= std::polar(1.0, sign * 2.0 * std::numbers::pi * cyc);
  }
  return out;
}

/// Real-to-complex promotion of a real waveform (imaginary part zero).
inline ComplexWaveform to_complex(const RealWaveform& w) {
  ComplexWaveform out{std::vector<cplx>(w.size()), w.sample_rate};
  for (std::size_t i = 0; i < w.size(); ++i) out.samples[i] = cplx{w.samples[i], 0.0};
  return out;
}

/// DFT with bins ordered by frequency on [-fs/2, fs/2). Unnormalized, so
/// sum |W|^2 / N == sum |w|^2.
inline std::vector<SpectralBin> spectrum(const ComplexWaveform& w) {
  require(w.size() >= 2, "spectrum needs at least two samples");
  const auto bins = fft::forward(w.samples);
  const std::size_t n = bins.size();
  std::vector<SpectralBin> out(n);
  const std::size_t half = n / 2;
  // Bin k sits at position (k + n - half) mod n after the shift (numpy fftshift).
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t pos = (k + n - half) % n;
    out[pos] = SpectralBin{fft::bin_frequency(k, n, w.sample_rate), bins[k]};
  }
  return out;
}

/// Inverse of spectrum().
inline ComplexWaveform inverse_spectrum(const std::vector<SpectralBin>& bins, double sample_rate) {
  require(bins.size() >= 2, "inverse_spectrum needs at least two bins");
  const std::size_t n = bins.size();
  const std::size_t half = n / 2;
  std::vector<cplx> raw(n);
  for (std::size_t k = 0; k < n; ++k) raw[k] = bins[(k + n - half) % n].amplitude;
  return ComplexWaveform{fft::inverse(raw), sample_rate};
}

/// Multiplies the DFT of `w` by `response(f)` (circular filtering).
template <typename Fn>
ComplexWaveform filter_in_frequency(const ComplexWaveform& w, Fn&& response) {
  auto bins = fft::forward(w.samples);
  const std::size_t n = bins.size();
  for (std::size_t k = 0; k < n; ++k) bins[k] *= response(fft::bin_frequency(k, n, w.sample_rate));
  return ComplexWaveform{fft::inverse(bins), w.sample_rate};
}

}  // namespace oleq

#endif  // OLEQ_WAVEFORM_HPP
