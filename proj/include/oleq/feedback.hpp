#ifndef OLEQ_FEEDBACK_HPP
#define OLEQ_FEEDBACK_HPP

// Error generation, the e * conj(x) correlators and the LMS weight update.
//
// The opto-electronic correlator reproduces the analog feedback path: the error
// drive rides on a pilot tone offset by `pilot_offset`, is added to the tap-delayed
// input field, detected by a square-law photodiode, bandpass filtered around the
// pilot offset, IQ-downconverted and lowpass filtered. The beat term of
// |E_e + E_x|^2 is 2 Re(e conj(x) exp(j w_p t)), so after downconversion the
// baseband output is e * conj(x) and the block mean is the LMS gradient.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "oleq/equalizer.hpp"
#include "oleq/txrx.hpp"
#include "oleq/waveform.hpp"

namespace oleq {

enum class Mode { Training, DecisionDirected };

struct ParallelSchedule {
  bool operator==(const ParallelSchedule&) const = default;
};
struct SequentialSchedule {
  std::size_t runs_per_tap = 10;
  bool operator==(const SequentialSchedule&) const = default;
};
using Schedule = std::variant<ParallelSchedule, SequentialSchedule>;

struct IdealCorrelator {
  bool operator==(const IdealCorrelator&) const = default;
};
struct OptoElectronicCorrelator {
  double pilot_offset = 120e9;
  double bpf_halfwidth = 50e9;
  double lpf_cutoff = 50e9;
  // Bandwidth of the error drive into the pilot modulator; empty drives the
  // modulator with the ideal zero-order-hold error.
  std::optional<double> drive_cutoff = 50e9;
  bool operator==(const OptoElectronicCorrelator&) const = default;
};
using Correlator = std::variant<IdealCorrelator, OptoElectronicCorrelator>;

struct FeedbackConfig {
  double mu = 0.4;
  // Divide mu by the block's mean input power <|x|^2>.
  bool normalize_mu = true;
  std::size_t block_symbols = 256;
  Schedule schedule = ParallelSchedule{};
  Mode mode = Mode::Training;
  Correlator correlator = IdealCorrelator{};

  void validate() const {
    require(std::isfinite(mu) && mu >= 0.0, "mu must be finite and >= 0");
    require(block_symbols >= 1, "block_symbols must be >= 1");
    if (const auto* seq = std::get_if<SequentialSchedule>(&schedule))
      require(seq->runs_per_tap >= 1, "runs_per_tap must be >= 1");
  }
  bool operator==(const FeedbackConfig&) const = default;
};

struct GradientEstimate {
  std::vector<cplx> per_tap;
  std::vector<bool> valid_mask;

  std::size_t size() const { return per_tap.size(); }
};

/// Half-open sample interval [begin, end) over which correlations are averaged.
struct SampleRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  static SampleRange all(std::size_t n) { return {0, n}; }
};

/// Training: e = s_ref - y. Decision-directed: e = decide(y) - y.
inline std::vector<cplx> make_error(std::span<const cplx> y, std::optional<std::span<const cplx>> reference, Mode mode) {
  std::vector<cplx> e(y.size());
  if (mode == Mode::Training) {
    if (!reference) throw std::invalid_argument("training mode needs reference symbols");
    if (reference->size() != y.size()) throw std::invalid_argument("reference and output lengths differ");
    for (std::size_t i = 0; i < y.size(); ++i) e[i] = (*reference)[i] - y[i];
  } else {
    for (std::size_t i = 0; i < y.size(); ++i) e[i] = decide(y[i]) - y[i];
  }
  return e;
}

/// Zero-order hold of each per-symbol error over its symbol interval.
inline ComplexWaveform error_to_waveform(std::span<const cplx> e, std::size_t samples_per_symbol,
                                         double symbol_rate = kSymbolRate) {
  require(samples_per_symbol >= 1, "samples_per_symbol must be >= 1");
  ComplexWaveform w;
  w.sample_rate = symbol_rate * static_cast<double>(samples_per_symbol);
  w.samples.reserve(e.size() * samples_per_symbol);
  for (const auto& v : e) w.samples.insert(w.samples.end(), samples_per_symbol, v);
  return w;
}

namespace detail {

inline void check_pair(const ComplexWaveform& e, const ComplexWaveform& x, SampleRange range) {
  if (e.sample_rate != x.sample_rate) throw std::invalid_argument("error and input sample rates differ");
  if (e.size() != x.size()) throw std::invalid_argument("error and input lengths differ");
  if (range.begin >= range.end || range.end > x.size()) throw std::invalid_argument("invalid correlation range");
}

inline long long tap_offset(const EqualizerState& state, std::size_t tap_k, double sample_rate) {
  require(tap_k < state.size(), "tap index out of range");
  return (static_cast<long long>(tap_k) - static_cast<long long>(state.reference_tap)) *
         tap_stride(state, sample_rate);
}

}  // namespace detail

/// mean_{n in range} e[n] * conj(x[n - (k - ref) m]); samples outside x count as zero.
inline cplx ideal_correlate(const ComplexWaveform& e_wave, const ComplexWaveform& x_wave, std::size_t tap_k,
                            const EqualizerState& state, std::optional<SampleRange> valid = std::nullopt) {
  const SampleRange range = valid.value_or(SampleRange::all(x_wave.size()));
  detail::check_pair(e_wave, x_wave, range);
  const long long d = detail::tap_offset(state, tap_k, x_wave.sample_rate);
  const auto n = static_cast<long long>(x_wave.size());
  cplx acc{};
  for (std::size_t i = range.begin; i < range.end; ++i) {
    const long long src = static_cast<long long>(i) - d;
    if (src < 0 || src >= n) continue;
    acc += e_wave.samples[i] * std::conj(x_wave.samples[static_cast<std::size_t>(src)]);
  }
  return acc / static_cast<double>(range.size());
}

/// Opto-electronic correlator with its filters designed once for a sample rate.
class OeCorrelatorPath {
 public:
  OeCorrelatorPath(const OptoElectronicCorrelator& cfg, double sample_rate)
      : cfg_(cfg), sample_rate_(sample_rate) {
    require(cfg.pilot_offset > 0.0, "pilot offset must be positive");
    require(cfg.pilot_offset - cfg.bpf_halfwidth > 0.0 && cfg.pilot_offset + cfg.bpf_halfwidth < sample_rate / 2.0,
            "pilot band must lie inside (0, fs/2); spectral overlap would corrupt the beat product");
    // The lowpass stopband (1.5 x cutoff) has to clear the lower edge of the 2 x pilot
    // image band, centred at min(2 f_p, fs - 2 f_p) after aliasing.
    const double image = std::min(2.0 * cfg.pilot_offset, sample_rate - 2.0 * cfg.pilot_offset);
    require(cfg.lpf_cutoff > 0.0 && 1.5 * cfg.lpf_cutoff < image - cfg.bpf_halfwidth,
            "lowpass cutoff does not reject the double-frequency mixing term");
    require(!cfg.drive_cutoff || (*cfg.drive_cutoff > 0.0 && *cfg.drive_cutoff < sample_rate / 2.0),
            "drive cutoff must lie in (0, fs/2)");
    bandpass_ = design_bandpass(cfg.pilot_offset, cfg.bpf_halfwidth, sample_rate);
    lowpass_ = design_lowpass(cfg.lpf_cutoff, cfg.lpf_cutoff, sample_rate);
    if (cfg.drive_cutoff) drive_ = design_lowpass(*cfg.drive_cutoff, *cfg.drive_cutoff, sample_rate);
  }

  const OptoElectronicCorrelator& config() const { return cfg_; }
  std::size_t kernel_length() const {
    return std::max({bandpass_.size(), lowpass_.size(), drive_ ? drive_->size() : std::size_t{0}});
  }

  cplx correlate(const ComplexWaveform& e_wave, const ComplexWaveform& x_wave, std::size_t tap_k,
                 const EqualizerState& state, std::optional<SampleRange> valid = std::nullopt) const {
    const SampleRange range = valid.value_or(SampleRange::all(x_wave.size()));
    detail::check_pair(e_wave, x_wave, range);
    require(x_wave.sample_rate == sample_rate_, "correlator was designed for a different sample rate");
    const long long d = detail::tap_offset(state, tap_k, x_wave.sample_rate);

    // (1) error onto the pilot, (2) combine with the tap-delayed input field.
    ComplexWaveform field = heterodyne(drive_ ? convolve_same(e_wave, *drive_) : e_wave, cfg_.pilot_offset, +1);
    const ComplexWaveform delayed = delay_samples(x_wave, d);
    for (std::size_t i = 0; i < field.size(); ++i) field.samples[i] += delayed.samples[i];
    // (3) square-law detection.
    RealWaveform current{std::vector<double>(field.size()), field.sample_rate};
    for (std::size_t i = 0; i < field.size(); ++i) current.samples[i] = std::norm(field.samples[i]);
    // (4) remove the DC mixing terms.
    const RealWaveform passband = convolve_same(current, bandpass_);
    // (5) IQ downconversion of the real passband signal, (6) lowpass.
    const ComplexWaveform baseband = convolve_same(heterodyne(to_complex(passband), cfg_.pilot_offset, -1), lowpass_);
    // (7) average.
    cplx acc{};
    for (std::size_t i = range.begin; i < range.end; ++i) acc += baseband.samples[i];
    return acc / static_cast<double>(range.size());
  }

 private:
  OptoElectronicCorrelator cfg_;
  double sample_rate_;
  FirKernel bandpass_;
  FirKernel lowpass_;
  std::optional<FirKernel> drive_;
};

inline cplx oe_correlate(const ComplexWaveform& e_wave, const ComplexWaveform& x_wave, std::size_t tap_k,
                         const EqualizerState& state, const OptoElectronicCorrelator& cfg,
                         std::optional<SampleRange> valid = std::nullopt) {
  return OeCorrelatorPath(cfg, x_wave.sample_rate).correlate(e_wave, x_wave, tap_k, state, valid);
}

/// Which taps a schedule updates at a given iteration.
inline std::vector<bool> scheduled_taps(const Schedule& schedule, std::size_t n_taps, std::size_t iteration) {
  std::vector<bool> mask(n_taps, false);
  if (std::holds_alternative<ParallelSchedule>(schedule)) {
    mask.assign(n_taps, true);
  } else {
    const auto& seq = std::get<SequentialSchedule>(schedule);
    mask[(iteration / seq.runs_per_tap) % n_taps] = true;
  }
  return mask;
}

/// Gradient for one processed block. `oe_path` must be supplied when the config
/// selects the opto-electronic correlator.
inline GradientEstimate estimate_gradient(const ComplexWaveform& e_wave, const ComplexWaveform& x_wave,
                                          SampleRange valid, const EqualizerState& state,
                                          const FeedbackConfig& cfg, std::size_t iteration,
                                          const OeCorrelatorPath* oe_path = nullptr) {
  GradientEstimate g{std::vector<cplx>(state.size(), cplx{}), scheduled_taps(cfg.schedule, state.size(), iteration)};
  const bool optical = std::holds_alternative<OptoElectronicCorrelator>(cfg.correlator);
  std::optional<OeCorrelatorPath> local;
  if (optical && oe_path == nullptr) {
    local.emplace(std::get<OptoElectronicCorrelator>(cfg.correlator), x_wave.sample_rate);
    oe_path = &*local;
  }
  for (std::size_t k = 0; k < state.size(); ++k) {
    if (!g.valid_mask[k]) continue;
    g.per_tap[k] = optical ? oe_path->correlate(e_wave, x_wave, k, state, valid)
                           : ideal_correlate(e_wave, x_wave, k, state, valid);
  }
  return g;
}

/// Raised when the loop produces non-finite weights or gradients.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// w_k <- w_k + mu g_k on the valid taps.
inline EqualizerState lms_update(EqualizerState state, const GradientEstimate& g, double mu) {
  if (g.size() != state.size()) throw std::invalid_argument("gradient length does not match the tap count");
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!g.valid_mask[k]) continue;
    if (!std::isfinite(g.per_tap[k].real()) || !std::isfinite(g.per_tap[k].imag()))
      throw DivergenceError("non-finite gradient at tap " + std::to_string(k) + ": feedback loop diverged");
    state.weights[k] += mu * g.per_tap[k];
  }
  return state;
}

}  // namespace oleq

#endif  // OLEQ_FEEDBACK_HPP
