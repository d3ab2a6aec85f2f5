#ifndef OLEQ_CHANNEL_HPP
#define OLEQ_CHANNEL_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

#include "oleq/waveform.hpp"

namespace oleq {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// Standard single-mode fiber described by its dispersion parameter only
/// (no loss, slope, PMD or nonlinearity).
struct FiberConfig {
  double dispersion_ps_nm_km = 16.0;
  double length_km = 0.0;
  double wavelength_nm = 1550.0;

  void validate() const {
    require(length_km >= 0.0, "fiber length must be >= 0");
    require(wavelength_nm > 0.0, "wavelength must be positive");
  }
  /// D * L * lambda^2 / c in s^2 (the coefficient of f^2 in the group delay
  /// integral, without the factor pi).
  double dispersion_coefficient() const {
    const double d_si = dispersion_ps_nm_km * 1e-6;  // ps/(nm km) -> s/m^2
    const double lambda = wavelength_nm * 1e-9;
    return d_si * length_km * 1e3 * lambda * lambda / kSpeedOfLight;
  }
  bool operator==(const FiberConfig&) const = default;
};

/// ASE loading referenced to an OSNR in `reference_bandwidth`. An empty
/// osnr_db disables the noise (infinite OSNR).
struct NoiseConfig {
  std::optional<double> osnr_db = 21.0;
  double reference_bandwidth = 12.5e9;  // Hz, 0.1 nm at 1550 nm
  std::uint64_t seed = 1;

  void validate() const { require(reference_bandwidth > 0.0, "reference bandwidth must be positive"); }
  bool operator==(const NoiseConfig&) const = default;
};

/// Spectral phase of the fiber: pi * D * lambda^2 * L * f^2 / c.
inline double cd_phase(const FiberConfig& fiber, double f) {
  return std::numbers::pi * fiber.dispersion_coefficient() * f * f;
}

/// All-pass chromatic dispersion H(f) = exp(+j pi D lambda^2 L f^2 / c),
/// applied circularly over the waveform.
inline ComplexWaveform apply_cd(const ComplexWaveform& w, const FiberConfig& fiber) {
  fiber.validate();
  if (fiber.length_km == 0.0 || fiber.dispersion_ps_nm_km == 0.0) return w;
  return filter_in_frequency(w, [&](double f) { return std::polar(1.0, cd_phase(fiber, f)); });
}

/// CD-induced delay spread across `bandwidth`: D * L * (lambda^2 * B / c).
inline double group_delay_spread(const FiberConfig& fiber, double bandwidth) {
  require(bandwidth > 0.0, "bandwidth must be positive");
  return std::abs(fiber.dispersion_coefficient()) * bandwidth;
}

/// Per-sample variance of complex AWGN for a given signal power.
inline double osnr_noise_variance(double signal_power, double osnr_db, double reference_bandwidth,
                                  double sample_rate) {
  return signal_power / (std::pow(10.0, osnr_db / 10.0) * reference_bandwidth) * sample_rate;
}

/// Adds circularly-symmetric white Gaussian noise scaled to the requested OSNR.
inline ComplexWaveform load_osnr_noise(const ComplexWaveform& w, const NoiseConfig& noise) {
  noise.validate();
  if (!noise.osnr_db || std::isinf(*noise.osnr_db)) return w;
  const double p = power(w);
  require(p > 0.0, "noise loading needs a waveform with nonzero power");
  const double var = osnr_noise_variance(p, *noise.osnr_db, noise.reference_bandwidth, w.sample_rate);
  const double sigma = std::sqrt(var / 2.0);
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  ComplexWaveform out = w;
  for (auto& s : out.samples) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    s += cplx{re, im};
  }
  return out;
}

/// Ideal optical demultiplexer: passes |f| <= halfwidth around the signal
/// carrier and blocks everything else.
inline ComplexWaveform demux_filter(const ComplexWaveform& w, double halfwidth) {
  require(halfwidth > 0.0, "demux halfwidth must be positive");
  return filter_in_frequency(w, [&](double f) { return std::abs(f) <= halfwidth ? 1.0 : 0.0; });
}

}  // namespace oleq

#endif  // OLEQ_CHANNEL_HPP
