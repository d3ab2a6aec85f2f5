#ifndef OLEQ_EXPERIMENT_HPP
#define OLEQ_EXPERIMENT_HPP

// End-to-end link simulation: block chain, convergence runs, post-convergence
// BER measurement and the taps / length / OSNR sweeps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "oleq/channel.hpp"
#include "oleq/equalizer.hpp"
#include "oleq/feedback.hpp"
#include "oleq/txrx.hpp"
#include "oleq/waveform.hpp"

namespace oleq {

struct ScenarioConfig {
  FiberConfig fiber;
  NoiseConfig noise;
  std::size_t n_taps = 15;
  FeedbackConfig feedback;
  std::size_t training_iterations = 2000;
  std::size_t dd_iterations = 500;
  std::uint64_t seed = 1;
  std::size_t samples_per_symbol = 16;

  // Ideal optical demultiplexer half-width; empty passes the full simulation band.
  std::optional<double> demux_halfwidth_hz = 35e9;
  // Integrate-and-dump electrical filter after the coherent receiver.
  bool integrate_and_dump = true;
  // Symbols added on each side of every processed block and excluded from metrics.
  std::size_t guard_symbols = 128;
  double fec_threshold = 2.4e-2;
  // Fresh symbols used for the post-convergence BER of each sweep point.
  std::size_t measure_symbols = std::size_t{1} << 18;
  // Rescale weights after each update so sum |w_k| <= 1.
  bool clamp_tap_sum = false;

  std::size_t total_iterations() const { return training_iterations + dd_iterations; }

  void validate() const {
    fiber.validate();
    noise.validate();
    feedback.validate();
    require(n_taps >= 1, "n_taps must be >= 1");
    require(training_iterations + dd_iterations >= 1, "training_iterations + dd_iterations must be >= 1");
    require(samples_per_symbol >= 2, "samples_per_symbol must be >= 2");
    require(!demux_halfwidth_hz || *demux_halfwidth_hz > 0.0, "demux_halfwidth_hz must be positive");
    require(fec_threshold > 0.0 && fec_threshold < 0.5, "fec_threshold must lie in (0, 0.5)");
    require(measure_symbols >= 1, "measure_symbols must be >= 1");
    const double fs = kSymbolRate * static_cast<double>(samples_per_symbol);
    shift_in_samples(kTapSpacing, fs);
    const std::size_t reach = (n_taps / 2 + 1) * static_cast<std::size_t>(tap_stride(init_center_spike(1), fs));
    require(guard_symbols * samples_per_symbol >= reach,
            "guard_symbols too short for the equalizer memory");
  }
  bool operator==(const ScenarioConfig&) const = default;
};

struct IterationRecord {
  std::size_t iteration = 0;
  Mode mode = Mode::Training;
  std::vector<cplx> weights;
  double block_error_power = 0.0;
  double ber_counted = 0.0;
  double ber_estimated = 0.0;
  bool operator==(const IterationRecord&) const = default;
};

enum class SweepVariable { Taps, LengthKm, OsnrDb };

struct SweepPoint {
  double value = 0.0;
  BerReport ber;
  std::vector<cplx> weights;
  bool operator==(const SweepPoint&) const = default;
};

struct SweepResult {
  SweepVariable variable = SweepVariable::Taps;
  std::vector<SweepPoint> points;
  bool operator==(const SweepResult&) const = default;
};

inline const char* to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::Taps: return "taps";
    case SweepVariable::LengthKm: return "length_km";
    case SweepVariable::OsnrDb: return "osnr_db";
  }
  return "?";
}

inline const char* to_string(Mode m) { return m == Mode::Training ? "training" : "decision_directed"; }

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

enum class Stream : std::uint64_t { Symbols = 0, Noise = 1, MeasureSymbols = 2, MeasureNoise = 3 };

/// Independent generator seed for (scenario seed, block index, stream).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t block, Stream stream) {
  std::uint64_t h = detail::splitmix64(seed);
  h = detail::splitmix64(h ^ block);
  return detail::splitmix64(h ^ static_cast<std::uint64_t>(stream));
}

/// One processed block: pre-equalizer field x, receiver output and the
/// interior symbols.
struct BlockOutput {
  SymbolFrame frame;  // interior symbols only
  ComplexWaveform x;  // equalizer input, full block with guards
  std::vector<cplx> y_symbols;
  SampleRange interior;
};

/// Transmit, propagate, add noise, demux, equalize and detect one block of
/// `symbols` interior symbols wrapped in guards.
inline BlockOutput process_block(const ScenarioConfig& cfg, const EqualizerState& state, std::size_t symbols,
                                 std::uint64_t symbol_seed, std::uint64_t noise_seed) {
  const std::size_t sps = cfg.samples_per_symbol;
  const std::size_t guard = cfg.guard_symbols;
  const SymbolFrame full = generate_symbols(symbols + 2 * guard, symbol_seed);

  ComplexWaveform field = apply_cd(modulate_nrz(full, sps), cfg.fiber);
  NoiseConfig noise = cfg.noise;
  noise.seed = noise_seed;
  field = load_osnr_noise(field, noise);
  if (cfg.demux_halfwidth_hz) field = demux_filter(field, *cfg.demux_halfwidth_hz);

  ComplexWaveform rx = coherent_receive(apply(state, field));
  if (cfg.integrate_and_dump) rx = integrate_and_dump(rx, sps);
  const auto all = sample_symbols(rx, sps);

  BlockOutput out;
  out.frame.symbol_rate = full.symbol_rate;
  out.frame.symbols.assign(full.symbols.begin() + static_cast<std::ptrdiff_t>(guard),
                           full.symbols.begin() + static_cast<std::ptrdiff_t>(guard + symbols));
  out.frame.bits.assign(full.bits.begin() + static_cast<std::ptrdiff_t>(guard),
                        full.bits.begin() + static_cast<std::ptrdiff_t>(guard + symbols));
  out.y_symbols.assign(all.begin() + static_cast<std::ptrdiff_t>(guard),
                       all.begin() + static_cast<std::ptrdiff_t>(guard + symbols));
  out.interior = SampleRange{guard * sps, (guard + symbols) * sps};
  out.x = std::move(field);
  return out;
}

/// Mutable state of one convergence run.
class Simulation {
 public:
  explicit Simulation(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    state_ = init_center_spike(cfg_.n_taps);
    if (const auto* oe = std::get_if<OptoElectronicCorrelator>(&cfg_.feedback.correlator))
      oe_path_.emplace(*oe, kSymbolRate * static_cast<double>(cfg_.samples_per_symbol));
  }

  const ScenarioConfig& config() const { return cfg_; }
  const EqualizerState& state() const { return state_; }
  void set_state(EqualizerState s) { state_ = std::move(s); }
  std::size_t iteration() const { return iteration_; }
  bool done() const { return iteration_ >= cfg_.total_iterations(); }
  Mode current_mode() const {
    return iteration_ < cfg_.training_iterations ? Mode::Training : Mode::DecisionDirected;
  }

  /// Processes one block and commits one weight update.
  IterationRecord step() {
    const std::size_t it = iteration_;
    const Mode mode = current_mode();
    const std::size_t sps = cfg_.samples_per_symbol;
    const BlockOutput blk = process_block(cfg_, state_, cfg_.feedback.block_symbols,
                                          derive_seed(cfg_.seed, it, Stream::Symbols),
                                          derive_seed(cfg_.seed ^ cfg_.noise.seed, it, Stream::Noise));

    const auto e = mode == Mode::Training
                       ? make_error(blk.y_symbols, std::span<const cplx>(blk.frame.symbols), mode)
                       : make_error(blk.y_symbols, std::nullopt, mode);

    ComplexWaveform e_wave{std::vector<cplx>(blk.x.size(), cplx{}), blk.x.sample_rate};
    const ComplexWaveform held = error_to_waveform(e, sps, blk.frame.symbol_rate);
    std::copy(held.samples.begin(), held.samples.end(),
              e_wave.samples.begin() + static_cast<std::ptrdiff_t>(blk.interior.begin));

    FeedbackConfig fb = cfg_.feedback;
    fb.mode = mode;
    const GradientEstimate g =
        estimate_gradient(e_wave, blk.x, blk.interior, state_, fb, it, oe_path_ ? &*oe_path_ : nullptr);

    double mu = fb.mu;
    if (fb.normalize_mu) {
      double p = 0.0;
      for (std::size_t i = blk.interior.begin; i < blk.interior.end; ++i) p += std::norm(blk.x.samples[i]);
      p /= static_cast<double>(blk.interior.size());
      if (p > 0.0) mu /= p;
    }

    double err_power = 0.0;
    for (const auto& v : e) err_power += std::norm(v);
    err_power /= static_cast<double>(e.size());
    const BerReport ber = measure_ber(blk.y_symbols, blk.frame);

    state_ = lms_update(std::move(state_), g, mu);
    if (cfg_.clamp_tap_sum) state_ = clamp_tap_sum(std::move(state_));
    for (std::size_t k = 0; k < state_.size(); ++k)
      if (!std::isfinite(state_.weights[k].real()) || !std::isfinite(state_.weights[k].imag()))
        throw DivergenceError("weights diverged at iteration " + std::to_string(it) + ", tap " + std::to_string(k));
    if (!std::isfinite(err_power))
      throw DivergenceError("error power is not finite at iteration " + std::to_string(it));

    ++iteration_;
    return IterationRecord{it, mode, state_.weights, err_power, ber.ber_counted, ber.ber_estimated};
  }

 private:
  ScenarioConfig cfg_;
  EqualizerState state_;
  std::optional<OeCorrelatorPath> oe_path_;
  std::size_t iteration_ = 0;
};

inline IterationRecord run_iteration(Simulation& sim) { return sim.step(); }

/// Training followed by decision-directed adaptation; one record per iteration.
inline std::vector<IterationRecord> run_convergence(const ScenarioConfig& cfg) {
  Simulation sim(cfg);
  std::vector<IterationRecord> trace;
  trace.reserve(cfg.total_iterations());
  while (!sim.done()) trace.push_back(sim.step());
  return trace;
}

/// Final equalizer state of a convergence run.
inline EqualizerState converge(const ScenarioConfig& cfg) {
  Simulation sim(cfg);
  while (!sim.done()) sim.step();
  return sim.state();
}

inline constexpr std::size_t kMeasureBlockSymbols = 3840;

/// BER of a frozen equalizer on at least cfg.measure_symbols fresh symbols.
/// Blocks are measured separately and pooled into one report.
inline BerReport measure_post_convergence_ber(const ScenarioConfig& cfg, const EqualizerState& state) {
  cfg.validate();
  const std::size_t blocks = (cfg.measure_symbols + kMeasureBlockSymbols - 1) / kMeasureBlockSymbols;
  SymbolFrame ref;
  std::vector<cplx> received;
  ref.symbols.reserve(blocks * kMeasureBlockSymbols);
  ref.bits.reserve(blocks * kMeasureBlockSymbols);
  received.reserve(blocks * kMeasureBlockSymbols);
  for (std::size_t b = 0; b < blocks; ++b) {
    const BlockOutput blk = process_block(cfg, state, kMeasureBlockSymbols,
                                          derive_seed(cfg.seed, b, Stream::MeasureSymbols),
                                          derive_seed(cfg.seed ^ cfg.noise.seed, b, Stream::MeasureNoise));
    ref.symbols.insert(ref.symbols.end(), blk.frame.symbols.begin(), blk.frame.symbols.end());
    ref.bits.insert(ref.bits.end(), blk.frame.bits.begin(), blk.frame.bits.end());
    received.insert(received.end(), blk.y_symbols.begin(), blk.y_symbols.end());
  }
  return measure_ber(received, ref);
}

/// BER of the link with no equalization (a single unit tap).
inline BerReport measure_unequalized_ber(const ScenarioConfig& cfg) {
  ScenarioConfig c = cfg;
  c.n_taps = 1;
  return measure_post_convergence_ber(c, init_center_spike(1));
}

namespace detail {

// Runs fn(i) for i in [0, n) on up to `threads` workers; results are written
// by index so the output does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mtx;
  std::size_t next = 0;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard lock(mtx);
          if (next >= n || first_error) return;
          i = next++;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mtx);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

template <typename Apply>
SweepResult sweep(const ScenarioConfig& base, SweepVariable var, std::vector<double> values, std::size_t threads,
                  Apply&& apply_value) {
  std::sort(values.begin(), values.end());
  SweepResult result{var, std::vector<SweepPoint>(values.size())};
  parallel_for(values.size(), threads, [&](std::size_t i) {
    ScenarioConfig cfg = base;
    apply_value(cfg, values[i]);
    const EqualizerState w = converge(cfg);
    result.points[i] = SweepPoint{values[i], measure_post_convergence_ber(cfg, w), w.weights};
  });
  return result;
}

}  // namespace detail

/// One full convergence plus a fresh-symbol BER measurement per tap count.
inline SweepResult sweep_taps(const ScenarioConfig& base, const std::vector<std::size_t>& taps,
                              std::size_t threads = 1) {
  std::vector<double> values(taps.begin(), taps.end());
  for (std::size_t t : taps) require(t >= 1, "tap counts must be >= 1");
  return detail::sweep(base, SweepVariable::Taps, values, threads,
                       [](ScenarioConfig& c, double v) { c.n_taps = static_cast<std::size_t>(v); });
}

inline SweepResult sweep_length(const ScenarioConfig& base, const std::vector<double>& lengths_km,
                                std::size_t threads = 1) {
  for (double l : lengths_km) require(l >= 0.0, "fiber lengths must be >= 0");
  return detail::sweep(base, SweepVariable::LengthKm, lengths_km, threads,
                       [](ScenarioConfig& c, double v) { c.fiber.length_km = v; });
}

inline SweepResult sweep_osnr(const ScenarioConfig& base, const std::vector<double>& osnr_db,
                              std::size_t threads = 1) {
  return detail::sweep(base, SweepVariable::OsnrDb, osnr_db, threads,
                       [](ScenarioConfig& c, double v) { c.noise.osnr_db = v; });
}

}  // namespace oleq

#endif  // OLEQ_EXPERIMENT_HPP
