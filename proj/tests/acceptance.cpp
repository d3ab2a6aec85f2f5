// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "oleq/channel.hpp"
#include "oleq/equalizer.hpp"
#include "oleq/experiment.hpp"
#include "oleq/feedback.hpp"
#include "oleq/io.hpp"

using namespace oleq;

namespace {

// ---- pinned tolerances ----------------------------------------------------
constexpr double kDgdTarget = 128e-12;
constexpr double kDgdRelTol = 0.01;
constexpr double kCdRelTol = 1e-9;
constexpr int kCdTrials = 100;
constexpr double kGradRelTol = 1e-3;
constexpr int kGradBlocks = 10;
constexpr double kFdStep = 1e-5;
constexpr double kCorrRelRms = 0.05;
constexpr int kCorrBlocks = 100;
constexpr double kResidualPhaseMax = 0.3;  // rad over 40 GHz
constexpr double kEstimatedBerMax = 1e-5;
constexpr std::size_t kConvergenceMeasureSymbols = std::size_t{1} << 20;
constexpr double kScheduleDistance = 0.05;  // x max|w|
constexpr std::size_t kSequentialIterations = 30000;
constexpr double kFec = 2.4e-2;
constexpr std::size_t kSweepMeasureSymbols = std::size_t{1} << 18;
constexpr std::size_t kLengthMeasureSymbols = std::size_t{1} << 20;
constexpr int kTapCrossingTarget = 11;
constexpr int kTapCrossingTol = 2;
constexpr double kPenaltyFactor = 2.0;
constexpr double kOsnrFloorDb = 12.0;
constexpr double kMonotoneSigmas = 3.0;
constexpr std::size_t kTransientWindow = 50;
constexpr std::size_t kRecoveryWindow = 200;
constexpr double kRecoveryFactor = 2.0;

int failures = 0;

void verdict(const std::string& id, bool ok, const std::string& detail) {
  std::printf("criterion %-3s %s  %s\n", id.c_str(), ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void note(const char* fmt, auto... args) {
  std::printf("    ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

ScenarioConfig reference_link() {
  ScenarioConfig c;
  c.fiber = FiberConfig{16.0, 25.0, 1550.0};
  c.noise.osnr_db = 21.0;
  c.n_taps = 15;
  c.feedback.schedule = ParallelSchedule{};
  c.training_iterations = 2000;
  c.dd_iterations = 500;
  c.fec_threshold = kFec;
  return c;
}

// Block mean-square symbol error for a state on fixed block seeds.
double block_mse(const ScenarioConfig& c, const EqualizerState& s, std::uint64_t sym_seed, std::uint64_t noise_seed) {
  const auto blk = process_block(c, s, c.feedback.block_symbols, sym_seed, noise_seed);
  double j = 0.0;
  for (std::size_t i = 0; i < blk.y_symbols.size(); ++i) j += std::norm(blk.frame.symbols[i] - blk.y_symbols[i]);
  return j / static_cast<double>(blk.y_symbols.size());
}

ComplexWaveform held_error(const BlockOutput& blk, std::size_t sps) {
  const auto e = make_error(blk.y_symbols, std::span<const cplx>(blk.frame.symbols), Mode::Training);
  ComplexWaveform w{std::vector<cplx>(blk.x.size()), blk.x.sample_rate};
  const auto held = error_to_waveform(e, sps);
  std::copy(held.samples.begin(), held.samples.end(), w.samples.begin() + static_cast<std::ptrdiff_t>(blk.interior.begin));
  return w;
}

// ---- criteria ------------------------------------------------------------

void criterion1() {
  const double dgd = group_delay_spread(FiberConfig{16.0, 25.0, 1550.0}, 40e9);
  verdict("1", std::abs(dgd - kDgdTarget) <= kDgdRelTol * kDgdTarget,
          fmt("DGD(25 km, 40 GHz) = %.2f ps, target 128 ps +-1%%", dgd * 1e12));
}

void criterion2() {
  double worst_energy = 0.0, worst_inverse = 0.0;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> len(256, 8192);
  std::uniform_real_distribution<double> km(0.0, 80.0);
  for (int t = 0; t < kCdTrials; ++t) {
    ComplexWaveform w{std::vector<cplx>(static_cast<std::size_t>(len(rng))), 640e9};
    for (auto& s : w.samples) s = {g(rng), g(rng)};
    const FiberConfig fib{16.0, km(rng), 1550.0};
    const auto out = apply_cd(w, fib);
    worst_energy = std::max(worst_energy, std::abs(energy(out) / energy(w) - 1.0));
    const auto back = apply_cd(out, FiberConfig{-16.0, fib.length_km, 1550.0});
    double d = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) d += std::norm(back.samples[i] - w.samples[i]);
    worst_inverse = std::max(worst_inverse, std::sqrt(d / energy(w)));
  }
  verdict("2", worst_energy <= kCdRelTol && worst_inverse <= kCdRelTol,
          fmt("%d waveforms: max energy error %.2e, max inverse error %.2e (limit 1e-9)", kCdTrials, worst_energy,
              worst_inverse));
}

void criterion3() {
  ScenarioConfig c = reference_link();
  double worst = 0.0;
  std::mt19937_64 rng(33);
  std::normal_distribution<double> g(0.0, 0.1);
  for (int b = 0; b < kGradBlocks; ++b) {
    EqualizerState s = init_center_spike(c.n_taps);
    for (auto& w : s.weights) w += cplx(g(rng), g(rng));
    const std::uint64_t ss = derive_seed(303, static_cast<std::uint64_t>(b), Stream::Symbols);
    const std::uint64_t ns = derive_seed(303, static_cast<std::uint64_t>(b), Stream::Noise);
    const auto blk = process_block(c, s, c.feedback.block_symbols, ss, ns);
    const auto e_wave = held_error(blk, c.samples_per_symbol);
    for (std::size_t k = 0; k < s.size(); ++k) {
      auto probe = [&](cplx d) {
        auto p = s;
        p.weights[k] += d;
        return block_mse(c, p, ss, ns);
      };
      const double d_re = (probe({kFdStep, 0}) - probe({-kFdStep, 0})) / (2 * kFdStep);
      const double d_im = (probe({0, kFdStep}) - probe({0, -kFdStep})) / (2 * kFdStep);
      const cplx fd = -0.5 * cplx(d_re, d_im);
      const cplx gi = ideal_correlate(e_wave, blk.x, k, s, blk.interior);
      worst = std::max(worst, std::abs(gi - fd) / std::abs(fd));
    }
  }
  verdict("3", worst <= kGradRelTol,
          fmt("%d blocks x 15 taps: max relative deviation from central difference %.2e (limit 1e-3)", kGradBlocks,
              worst));
}

void criterion4() {
  ScenarioConfig c = reference_link();
  const OeCorrelatorPath path(OptoElectronicCorrelator{}, 640e9);
  const auto s = init_center_spike(c.n_taps);
  double err = 0.0, ref = 0.0;
  for (int b = 0; b < kCorrBlocks; ++b) {
    const auto blk = process_block(c, s, c.feedback.block_symbols,
                                   derive_seed(404, static_cast<std::uint64_t>(b), Stream::Symbols),
                                   derive_seed(404, static_cast<std::uint64_t>(b), Stream::Noise));
    const auto e_wave = held_error(blk, c.samples_per_symbol);
    for (std::size_t k = 0; k < s.size(); ++k) {
      const cplx a = path.correlate(e_wave, blk.x, k, s, blk.interior);
      const cplx i = ideal_correlate(e_wave, blk.x, k, s, blk.interior);
      err += std::norm(a - i);
      ref += std::norm(i);
    }
  }
  const double rel = std::sqrt(err / ref);
  verdict("4", rel <= kCorrRelRms,
          fmt("%d blocks: opto-electronic vs ideal relative RMS %.3f%% (limit 5%%)", kCorrBlocks, 100 * rel));
}

struct ReferenceRun {
  std::vector<IterationRecord> trace;
  EqualizerState trained;  // state at the end of training
};

ReferenceRun criterion5() {
  const ScenarioConfig c = reference_link();
  ReferenceRun run;
  Simulation sim(c);
  while (!sim.done()) {
    run.trace.push_back(sim.step());
    if (sim.iteration() == c.training_iterations) run.trained = sim.state();
  }
  const double rp = residual_phase(run.trained, c.fiber, 40e9);
  ScenarioConfig m = c;
  m.measure_symbols = kConvergenceMeasureSymbols;
  const auto ber = measure_post_convergence_ber(m, run.trained);
  note("residual phase over +-20 GHz: %.3f rad (limit 0.3)", rp);
  note("post-convergence: %llu errors / %llu bits, estimated BER %.2e (limit 1e-5), EVM %.3f",
       static_cast<unsigned long long>(ber.bit_errors), static_cast<unsigned long long>(ber.bits_compared),
       ber.ber_estimated, ber.evm_rms);
  const bool a = rp <= kResidualPhaseMax;
  const bool b = ber.ber_estimated <= kEstimatedBerMax && ber.bit_errors == 0;
  verdict("5", a && b,
          fmt("(a) residual phase %.3f rad %s; (b) estimated BER %.2e with %llu counted errors %s", rp,
              a ? "ok" : "too large", ber.ber_estimated, static_cast<unsigned long long>(ber.bit_errors),
              b ? "ok" : "not met"));
  return run;
}

void criterion6(const ReferenceRun& par) {
  ScenarioConfig c = reference_link();
  c.feedback.schedule = SequentialSchedule{10};
  c.training_iterations = kSequentialIterations;
  c.dd_iterations = 0;
  const auto seq = converge(c);
  double wmax = 0.0, dist = 0.0;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    wmax = std::max(wmax, std::abs(par.trained.weights[k]));
    dist = std::max(dist, std::abs(seq.weights[k] - par.trained.weights[k]));
  }
  note("sequential residual phase %.3f rad, parallel %.3f rad", residual_phase(seq, c.fiber, 40e9),
       residual_phase(par.trained, c.fiber, 40e9));
  verdict("6", dist <= kScheduleDistance * wmax,
          fmt("sequential (%zu iterations, 10 runs/tap) vs parallel (2000): max tap distance %.3f = %.3f x max|w| "
              "(limit 0.05)",
              kSequentialIterations, dist, dist / wmax));
}

// Smallest tap count from which every larger swept count is at or below threshold.
int crossing(const SweepResult& r, double thr) {
  int n = -1;
  for (auto it = r.points.rbegin(); it != r.points.rend(); ++it) {
    if (it->ber.ber_counted > thr) break;
    n = static_cast<int>(it->value);
  }
  return n;
}

double at(const SweepResult& r, double v) {
  for (const auto& p : r.points)
    if (p.value == v) return p.ber.ber_counted;
  return std::nan("");
}

void print_sweep(const char* label, const SweepResult& r) {
  for (const auto& p : r.points)
    note("%s %6g: counted %.3e (%llu errors), estimated %.3e", label, p.value, p.ber.ber_counted,
         static_cast<unsigned long long>(p.ber.bit_errors), p.ber.ber_estimated);
}

void criterion7() {
  ScenarioConfig c = reference_link();
  c.measure_symbols = kSweepMeasureSymbols;
  c.fiber.length_km = 10.0;
  const auto ten = sweep_taps(c, {1, 2, 3}, worker_count());
  print_sweep("10 km taps", ten);
  c.fiber.length_km = 25.0;
  std::vector<std::size_t> all(15);
  for (std::size_t i = 0; i < 15; ++i) all[i] = i + 1;
  const auto tw5 = sweep_taps(c, all, worker_count());
  print_sweep("25 km taps", tw5);
  const bool three = at(ten, 3) <= kFec;
  const int cross = crossing(tw5, kFec);
  const bool cross_ok = cross >= 0 && std::abs(cross - kTapCrossingTarget) <= kTapCrossingTol;
  const bool nine = at(tw5, 9) > kFec;
  verdict("7", three && cross_ok && nine,
          fmt("10 km/3 taps BER %.2e %s; 25 km crossing at %d taps (target 11 +-2) %s; 25 km/9 taps %.2e %s",
              at(ten, 3), three ? "<= FEC" : "> FEC", cross, cross_ok ? "ok" : "out of range", at(tw5, 9),
              nine ? "> FEC" : "<= FEC"));
}

void criterion8() {
  ScenarioConfig c = reference_link();
  c.measure_symbols = kLengthMeasureSymbols;
  const auto r = sweep_length(c, {0, 5, 10, 15, 20, 25, 30}, worker_count());
  print_sweep("length km", r);
  const double b2b = at(r, 0);
  bool penalty_ok = true;
  for (const auto& p : r.points) {
    if (p.value == 0 || p.value > 20) continue;
    // Both zero means both are below counting resolution: ratio 1.
    const bool ok = (p.ber.ber_counted == 0.0) || (p.ber.ber_counted <= kPenaltyFactor * b2b);
    penalty_ok = penalty_ok && ok;
  }
  const bool thirty = at(r, 30) <= kFec;
  ScenarioConfig u = c;
  u.fiber.length_km = 25.0;
  u.measure_symbols = kSweepMeasureSymbols;
  const auto raw = measure_unequalized_ber(u);
  note("unequalized 25 km: counted %.3e", raw.ber_counted);
  const bool raw_ok = raw.ber_counted > kFec;
  verdict("8", penalty_ok && thirty && raw_ok,
          fmt("<= 20 km within x2 of back-to-back (%.2e): %s; 30 km %.2e %s; unequalized 25 km %.2e %s", b2b,
              penalty_ok ? "yes" : "no", at(r, 30), thirty ? "<= FEC" : "> FEC", raw.ber_counted,
              raw_ok ? "> FEC" : "<= FEC"));
}

void criterion9() {
  ScenarioConfig c = reference_link();
  c.measure_symbols = kSweepMeasureSymbols;
  std::vector<double> osnr;
  for (int o = 9; o <= 21; ++o) osnr.push_back(o);
  const auto r = sweep_osnr(c, osnr, worker_count());
  print_sweep("OSNR dB", r);
  bool floor_ok = true;
  double worst_above = 0.0;
  for (const auto& p : r.points)
    if (p.value >= kOsnrFloorDb) {
      floor_ok = floor_ok && p.ber.ber_counted <= kFec;
      worst_above = std::max(worst_above, p.ber.ber_counted);
    }
  bool monotone = true;
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    const auto& lo = r.points[i - 1].ber;
    const auto& hi = r.points[i].ber;
    const double n = static_cast<double>(lo.bits_compared);
    const double sigma = std::sqrt(lo.ber_counted * (1 - lo.ber_counted) / n + hi.ber_counted * (1 - hi.ber_counted) / n);
    if (hi.ber_counted > lo.ber_counted + kMonotoneSigmas * sigma) monotone = false;
  }
  verdict("9", floor_ok && monotone,
          fmt("worst BER at OSNR >= 12 dB: %.2e %s; monotone within 3 sigma: %s", worst_above,
              floor_ok ? "<= FEC" : "> FEC", monotone ? "yes" : "no"));
}

void criterion10(const ReferenceRun& run) {
  const std::size_t sw = reference_link().training_iterations;
  const auto& tr = run.trace;
  double pre = 0.0;
  for (std::size_t i = sw - 100; i < sw; ++i) pre += tr[i].block_error_power;
  pre /= 100.0;
  double peak = 0.0;
  for (std::size_t i = sw; i < sw + kTransientWindow; ++i) peak = std::max(peak, tr[i].block_error_power);
  double late = 0.0;
  for (std::size_t i = sw + kRecoveryWindow - kTransientWindow; i < sw + kRecoveryWindow; ++i)
    late += tr[i].block_error_power;
  late /= static_cast<double>(kTransientWindow);
  const bool rise = peak > pre;
  const bool back = late <= kRecoveryFactor * pre;
  verdict("10", rise && back,
          fmt("pre-switch error power %.4f; peak in first 50 DD iterations %.4f %s; mean over DD iterations "
              "150-199 %.4f %s",
              pre, peak, rise ? "(increase)" : "(no increase)", late, back ? "(within x2)" : "(above x2)"));
}

void criterion11() {
  ScenarioConfig c = reference_link();
  const auto r1 = run_convergence(c), r2 = run_convergence(c);
  const bool run_csv = io::to_csv(r1) == io::to_csv(r2);
  const bool run_json = io::to_json(c, r1).dump(2) == io::to_json(c, r2).dump(2);
  ScenarioConfig s = c;
  s.measure_symbols = 20000;
  s.training_iterations = 500;
  s.dd_iterations = 100;
  const auto a = sweep_taps(s, {3, 7, 11, 15}, 1), b = sweep_taps(s, {3, 7, 11, 15}, 4);
  const bool sweep_csv = io::to_csv(a) == io::to_csv(b);
  const bool sweep_json = io::to_json(s, a).dump(2) == io::to_json(s, b).dump(2);
  verdict("11", run_csv && run_json && sweep_csv && sweep_json,
          fmt("run CSV %s, run JSON %s, sweep CSV (1 vs 4 threads) %s, sweep JSON %s",
              run_csv ? "identical" : "differs", run_json ? "identical" : "differs",
              sweep_csv ? "identical" : "differs", sweep_json ? "identical" : "differs"));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    const auto ref = criterion5();
    criterion6(ref);
    criterion7();
    criterion8();
    criterion9();
    criterion10(ref);
    criterion11();
  } catch (const std::exception& e) {
    std::printf("aborted: %s\n", e.what());
    return 2;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d criteria failed (%.0f s)\n", failures, secs);
  return failures == 0 ? 0 : 1;
}
