#ifndef OLEQ_TXRX_HPP
#define OLEQ_TXRX_HPP

// QPSK transmitter, ideal coherent receiver, decision slicer and BER/EVM
// measurement.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "oleq/waveform.hpp"

namespace oleq {

inline constexpr double kSymbolRate = 40e9;  // Bd

/// Two Gray-mapped bits per symbol, (b1, b0).
struct BitPair {
  std::uint8_t b1 = 0;
  std::uint8_t b0 = 0;
  bool operator==(const BitPair&) const = default;
};

struct SymbolFrame {
  std::vector<cplx> symbols;
  std::vector<BitPair> bits;
  double symbol_rate = kSymbolRate;

  std::size_t size() const { return symbols.size(); }
  bool operator==(const SymbolFrame&) const = default;
};

struct BerReport {
  std::uint64_t bit_errors = 0;
  std::uint64_t bits_compared = 0;
  double ber_counted = 0.0;
  double ber_estimated = 0.0;
  double evm_rms = 0.0;
  bool operator==(const BerReport&) const = default;
};

namespace gray {

inline const double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

/// 00 -> (+1+j), 01 -> (-1+j), 11 -> (-1-j), 10 -> (+1-j), all scaled by 1/sqrt(2).
inline cplx map(BitPair b) {
  const double re = b.b0 ? -1.0 : 1.0;
  const double im = b.b1 ? -1.0 : 1.0;
  return cplx{re * kInvSqrt2, im * kInvSqrt2};
}

/// Inverse of map() on the signs of the rails; zero counts as positive.
inline BitPair demap(cplx s) {
  return BitPair{static_cast<std::uint8_t>(s.imag() < 0.0), static_cast<std::uint8_t>(s.real() < 0.0)};
}

}  // namespace gray

/// Deterministic i.i.d. uniform QPSK frame.
inline SymbolFrame generate_symbols(std::size_t n, std::uint64_t seed) {
  require(n >= 1, "generate_symbols needs n >= 1");
  std::mt19937_64 rng(seed);
  SymbolFrame f;
  f.symbols.reserve(n);
  f.bits.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t r = rng();
    const BitPair b{static_cast<std::uint8_t>(r >> 63), static_cast<std::uint8_t>((r >> 62) & 1U)};
    f.bits.push_back(b);
    f.symbols.push_back(gray::map(b));
  }
  return f;
}

/// Rectangular (NRZ) hold of each symbol for `samples_per_symbol` samples.
inline ComplexWaveform modulate_nrz(const SymbolFrame& frame, std::size_t samples_per_symbol) {
  require(samples_per_symbol >= 2, "samples_per_symbol must be >= 2");
  ComplexWaveform w;
  w.sample_rate = frame.symbol_rate * static_cast<double>(samples_per_symbol);
  w.samples.reserve(frame.size() * samples_per_symbol);
  for (const auto& s : frame.symbols) w.samples.insert(w.samples.end(), samples_per_symbol, s);
  return w;
}

/// Ideal homodyne receiver with unit responsivity.
inline ComplexWaveform coherent_receive(const ComplexWaveform& w) { return w; }

/// Integrate-and-dump over each symbol interval; every sample of the output holds
/// the mean of its symbol interval. A trailing partial symbol is averaged over the
/// samples it has.
inline ComplexWaveform integrate_and_dump(const ComplexWaveform& w, std::size_t samples_per_symbol) {
  require(samples_per_symbol >= 1, "samples_per_symbol must be >= 1");
  ComplexWaveform out = w;
  for (std::size_t start = 0; start < w.size(); start += samples_per_symbol) {
    const std::size_t stop = std::min(w.size(), start + samples_per_symbol);
    // Averaging deviations from the first sample keeps a flat symbol exact.
    const cplx first = w.samples[start];
    cplx dev{};
    for (std::size_t i = start + 1; i < stop; ++i) dev += w.samples[i] - first;
    const cplx mean = first + dev / static_cast<double>(stop - start);
    for (std::size_t i = start; i < stop; ++i) out.samples[i] = mean;
  }
  return out;
}

/// output[i] = w[i * sps + offset] for every complete symbol.
inline std::vector<cplx> sample_symbols(const ComplexWaveform& w, std::size_t samples_per_symbol,
                                        std::optional<std::size_t> offset = std::nullopt) {
  require(samples_per_symbol >= 1, "samples_per_symbol must be >= 1");
  const std::size_t off = offset.value_or(samples_per_symbol / 2);
  require(off < samples_per_symbol, "sampling offset must be below samples_per_symbol");
  require(w.size() >= samples_per_symbol, "waveform is shorter than one symbol");
  const std::size_t n = w.size() / samples_per_symbol;
  std::vector<cplx> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = w.samples[i * samples_per_symbol + off];
  return out;
}

/// Per-rail sign decision; exact zero goes to +.
inline cplx decide(cplx y) {
  const double re = y.real() < 0.0 ? -1.0 : 1.0;
  const double im = y.imag() < 0.0 ? -1.0 : 1.0;
  return cplx{re * gray::kInvSqrt2, im * gray::kInvSqrt2};
}

namespace detail {

// Q of one rail from the decision-variable statistics of the two transmitted levels.
inline double rail_q(std::span<const double> pos, std::span<const double> neg) {
  auto stats = [](std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, std::sqrt(s / static_cast<double>(v.size()))};
  };
  if (pos.empty() && neg.empty()) return std::numeric_limits<double>::infinity();
  if (pos.empty() || neg.empty()) {
    const auto [m, s] = stats(pos.empty() ? neg : pos);
    return s > 0.0 ? std::abs(m) / s : std::numeric_limits<double>::infinity();
  }
  const auto [mp, sp] = stats(pos);
  const auto [mn, sn] = stats(neg);
  const double denom = sp + sn;
  if (denom <= 0.0) return (mp > mn) ? std::numeric_limits<double>::infinity() : 0.0;
  return (mp - mn) / denom;
}

inline double q_to_ber(double q) {
  if (std::isinf(q)) return q > 0 ? 0.0 : 0.5;
  return 0.5 * std::erfc(q / std::numbers::sqrt2);
}

}  // namespace detail

/// Hard-decision bit counting plus a Gaussian Q-factor estimate and RMS EVM.
inline BerReport measure_ber(std::span<const cplx> received, const SymbolFrame& reference) {
  if (received.size() != reference.size())
    throw std::invalid_argument("measure_ber: received and reference lengths differ");
  BerReport r;
  const std::size_t n = received.size();
  r.bits_compared = 2 * n;
  std::vector<double> re_pos, re_neg, im_pos, im_neg;
  double err_energy = 0.0, ref_energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const BitPair got = gray::demap(decide(received[i]));
    const BitPair want = reference.bits[i];
    r.bit_errors += static_cast<std::uint64_t>(got.b1 != want.b1) + static_cast<std::uint64_t>(got.b0 != want.b0);
    const cplx s = reference.symbols[i];
    (s.real() > 0 ? re_pos : re_neg).push_back(received[i].real());
    (s.imag() > 0 ? im_pos : im_neg).push_back(received[i].imag());
    err_energy += std::norm(received[i] - s);
    ref_energy += std::norm(s);
  }
  if (n == 0) return r;
  r.ber_counted = static_cast<double>(r.bit_errors) / static_cast<double>(r.bits_compared);
  r.ber_estimated = 0.5 * (detail::q_to_ber(detail::rail_q(re_pos, re_neg)) +
                           detail::q_to_ber(detail::rail_q(im_pos, im_neg)));
  r.evm_rms = ref_energy > 0.0 ? std::sqrt(err_energy / ref_energy) : 0.0;
  return r;
}

}  // namespace oleq

#endif  // OLEQ_TXRX_HPP
