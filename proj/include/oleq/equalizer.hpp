#ifndef OLEQ_EQUALIZER_HPP
#define OLEQ_EQUALIZER_HPP

// Optical FIR filter: complex-weighted tapped delay line and its response.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "oleq/channel.hpp"
#include "oleq/waveform.hpp"

namespace oleq {

inline constexpr double kTapSpacing = 6.25e-12;  // s

struct EqualizerState {
  std::vector<cplx> weights;
  double tap_spacing = kTapSpacing;
  std::size_t reference_tap = 0;

  std::size_t size() const { return weights.size(); }
  void validate() const {
    require(!weights.empty(), "equalizer needs at least one tap");
    require(tap_spacing > 0.0, "tap spacing must be positive");
    require(reference_tap < weights.size(), "reference tap out of range");
  }
  bool operator==(const EqualizerState&) const = default;
};

struct ResponseSample {
  double frequency = 0.0;  // Hz
  cplx amplitude;
  double phase = 0.0;  // rad, unwrapped along the grid
};

/// w[floor(N/2)] = 1, all other taps zero.
inline EqualizerState init_center_spike(std::size_t n_taps, double tap_spacing = kTapSpacing) {
  require(n_taps >= 1, "n_taps must be >= 1");
  EqualizerState s{std::vector<cplx>(n_taps, cplx{}), tap_spacing, n_taps / 2};
  s.weights[s.reference_tap] = 1.0;
  return s;
}

/// Tap spacing in samples of `sample_rate`; throws if it is not an integer.
inline long long tap_stride(const EqualizerState& state, double sample_rate) {
  return shift_in_samples(state.tap_spacing, sample_rate);
}

/// y[n] = sum_k w_k x[n - (k - ref) m]. The reference tap is delay-neutral.
inline ComplexWaveform apply(const EqualizerState& state, const ComplexWaveform& x) {
  state.validate();
  const long long m = tap_stride(state, x.sample_rate);
  const auto n = static_cast<long long>(x.size());
  const auto ref = static_cast<long long>(state.reference_tap);
  ComplexWaveform y{std::vector<cplx>(x.size(), cplx{}), x.sample_rate};
  for (std::size_t k = 0; k < state.size(); ++k) {
    const cplx w = state.weights[k];
    if (w == cplx{}) continue;
    const long long shift = (static_cast<long long>(k) - ref) * m;
    const long long lo = std::max(0LL, shift);
    const long long hi = std::min(n, n + shift);
    for (long long i = lo; i < hi; ++i)
      y.samples[static_cast<std::size_t>(i)] += w * x.samples[static_cast<std::size_t>(i - shift)];
  }
  return y;
}

/// Wraps phase increments into (-pi, pi] and accumulates.
inline std::vector<double> unwrap_phase(std::span<const cplx> values) {
  std::vector<double> out(values.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double raw = std::arg(values[i]);
    if (i == 0) {
      out[i] = raw;
    } else {
      double d = raw - prev;
      d -= 2.0 * std::numbers::pi * std::round(d / (2.0 * std::numbers::pi));
      out[i] = out[i - 1] + d;
    }
    prev = raw;
  }
  return out;
}

/// H(f) = sum_k w_k exp(-j 2 pi f (k - ref) tau); periodic in 1/tau.
inline cplx response_at(const EqualizerState& state, double f) {
  cplx h{};
  const auto ref = static_cast<double>(state.reference_tap);
  for (std::size_t k = 0; k < state.size(); ++k) {
    const double delay = (static_cast<double>(k) - ref) * state.tap_spacing;
    // Reduce f * delay modulo one cycle so H(f) and H(f + 1/tau) agree to rounding.
    const double cyc = std::fmod(f * delay, 1.0);
    h += state.weights[k] * std::polar(1.0, -2.0 * std::numbers::pi * cyc);
  }
  return h;
}

inline std::vector<ResponseSample> frequency_response(const EqualizerState& state, std::span<const double> freqs) {
  state.validate();
  std::vector<cplx> h(freqs.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) h[i] = response_at(state, freqs[i]);
  const auto phase = unwrap_phase(h);
  std::vector<ResponseSample> out(freqs.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) out[i] = ResponseSample{freqs[i], h[i], phase[i]};
  return out;
}

/// Uniform grid of `points` frequencies covering [-band/2, +band/2].
inline std::vector<double> symmetric_grid(double band, std::size_t points) {
  require(points >= 2, "grid needs at least two points");
  std::vector<double> f(points);
  for (std::size_t i = 0; i < points; ++i)
    f[i] = -band / 2.0 + band * static_cast<double>(i) / static_cast<double>(points - 1);
  return f;
}

/// Removes the least-squares affine trend (constant phase plus pure delay).
inline std::vector<double> detrend_affine(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  const double slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
  const double icpt = (sy - slope * sx) / n;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = y[i] - (icpt + slope * x[i]);
  return out;
}

/// Max |phase deviation| of the equalized link H_eq * H_fiber over
/// [-band/2, band/2] after removing the best affine fit.
inline double residual_phase(const EqualizerState& state, const FiberConfig& fiber, double band,
                             std::size_t points = 401) {
  require(band > 0.0, "band must be positive");
  const auto freqs = symmetric_grid(band, points);
  std::vector<cplx> total(points);
  for (std::size_t i = 0; i < points; ++i)
    total[i] = response_at(state, freqs[i]) * std::polar(1.0, cd_phase(fiber, freqs[i]));
  const auto phase = unwrap_phase(total);
  const auto dev = detrend_affine(freqs, phase);
  double worst = 0.0;
  for (double d : dev) worst = std::max(worst, std::abs(d));
  return worst;
}

/// Scales the weights down so sum |w_k| <= 1 (passive PIC realizability).
inline EqualizerState clamp_tap_sum(EqualizerState s) {
  double sum = 0.0;
  for (const auto& w : s.weights) sum += std::abs(w);
  if (sum > 1.0)
    for (auto& w : s.weights) w /= sum;
  return s;
}

}  // namespace oleq

#endif  // OLEQ_EQUALIZER_HPP
