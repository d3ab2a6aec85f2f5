#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "oleq/experiment.hpp"

using namespace oleq;

namespace {

ScenarioConfig noiseless_b2b() {
  ScenarioConfig c;
  c.fiber.length_km = 0.0;
  c.noise.osnr_db = std::nullopt;
  c.demux_halfwidth_hz = std::nullopt;
  c.training_iterations = 20;
  c.dd_iterations = 5;
  return c;
}

double slope(const std::vector<IterationRecord>& tr, std::size_t from, std::size_t n) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = from; i < from + n; ++i) {
    const double x = static_cast<double>(i), y = tr[i].block_error_power;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

}  // namespace

TEST(DeriveSeed, DistinctAcrossBlocksAndStreams) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t b = 0; b < 100; ++b)
    for (auto s : {Stream::Symbols, Stream::Noise, Stream::MeasureSymbols, Stream::MeasureNoise})
      seen.insert(derive_seed(1, b, s));
  EXPECT_EQ(seen.size(), 400u);
  EXPECT_EQ(derive_seed(5, 7, Stream::Noise), derive_seed(5, 7, Stream::Noise));
  EXPECT_NE(derive_seed(5, 7, Stream::Noise), derive_seed(6, 7, Stream::Noise));
}

TEST(ScenarioConfig, Validation) {
  ScenarioConfig c;
  EXPECT_NO_THROW(c.validate());
  c.training_iterations = 0;
  c.dd_iterations = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ScenarioConfig{};
  c.n_taps = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ScenarioConfig{};
  c.samples_per_symbol = 10;  // 6.25 ps is 2.5 samples at 400 GSa/s
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ScenarioConfig{};
  c.guard_symbols = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ScenarioConfig{};
  c.fiber.length_km = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(RunIteration, NoiselessBackToBackIsFixedPoint) {
  Simulation sim(noiseless_b2b());
  for (int i = 0; i < 5; ++i) {
    const auto rec = run_iteration(sim);
    EXPECT_EQ(rec.block_error_power, 0.0);
    EXPECT_EQ(rec.ber_counted, 0.0);
    EXPECT_EQ(rec.weights, init_center_spike(15).weights);
  }
}

TEST(RunConvergence, RecordCountAndModes) {
  ScenarioConfig c = noiseless_b2b();
  c.training_iterations = 2000;
  c.dd_iterations = 500;
  c.fiber.length_km = 5.0;
  const auto tr = run_convergence(c);
  ASSERT_EQ(tr.size(), 2500u);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    EXPECT_EQ(tr[i].iteration, i);
    EXPECT_EQ(tr[i].mode, i < 2000 ? Mode::Training : Mode::DecisionDirected);
    EXPECT_EQ(tr[i].weights.size(), 15u);
    EXPECT_GE(tr[i].block_error_power, 0.0);
  }
}

TEST(RunConvergence, EarlyTrainingErrorTrendsDown) {
  ScenarioConfig c;
  c.fiber.length_km = 25.0;
  c.training_iterations = 300;
  c.dd_iterations = 0;
  const auto tr = run_convergence(c);
  for (std::size_t from : {0u, 50u, 100u, 200u}) EXPECT_LT(slope(tr, from, 100), 0.0) << from;
}

TEST(RunConvergence, ZeroStepFreezesWeights) {
  ScenarioConfig c;
  c.fiber.length_km = 25.0;
  c.feedback.mu = 0.0;
  c.training_iterations = 30;
  c.dd_iterations = 10;
  for (const auto& r : run_convergence(c)) EXPECT_EQ(r.weights, init_center_spike(15).weights);
}

TEST(RunConvergence, Deterministic) {
  ScenarioConfig c;
  c.fiber.length_km = 20.0;
  c.training_iterations = 60;
  c.dd_iterations = 20;
  c.feedback.schedule = SequentialSchedule{3};
  EXPECT_EQ(run_convergence(c), run_convergence(c));
  ScenarioConfig d = c;
  d.seed = 2;
  EXPECT_NE(run_convergence(c).back().weights, run_convergence(d).back().weights);
}

TEST(RunConvergence, OptoElectronicCorrelatorConverges) {
  ScenarioConfig c;
  c.fiber.length_km = 10.0;
  c.training_iterations = 200;
  c.dd_iterations = 0;
  ScenarioConfig oe = c;
  oe.feedback.correlator = OptoElectronicCorrelator{};
  const auto a = run_convergence(c), b = run_convergence(oe);
  double ma = 0, mb = 0;
  for (std::size_t i = 150; i < 200; ++i) {
    ma += a[i].block_error_power;
    mb += b[i].block_error_power;
  }
  EXPECT_LT(mb, 0.5 * 50 * a[0].block_error_power);
  EXPECT_NEAR(mb / ma, 1.0, 0.1);
}

TEST(RunConvergence, HugeStepDiverges) {
  ScenarioConfig c;
  c.fiber.length_km = 25.0;
  c.feedback.mu = 1e3;
  c.training_iterations = 500;
  EXPECT_THROW(run_convergence(c), DivergenceError);
}

TEST(MeasureBer, NoiselessSingleTapBackToBackIsErrorFree) {
  ScenarioConfig c = noiseless_b2b();
  c.n_taps = 1;
  c.measure_symbols = 20000;
  const auto rep = measure_post_convergence_ber(c, init_center_spike(1));
  EXPECT_EQ(rep.bit_errors, 0u);
  EXPECT_GE(rep.bits_compared, 40000u);
  EXPECT_LT(rep.evm_rms, 1e-12);
}

TEST(MeasureBer, GuardLengthDoesNotChangeConvergedNoiselessBer) {
  ScenarioConfig c;
  c.fiber.length_km = 10.0;
  c.noise.osnr_db = std::nullopt;
  c.training_iterations = 300;
  c.dd_iterations = 0;
  c.measure_symbols = 8000;
  const auto w = converge(c);
  ScenarioConfig wide = c;
  wide.guard_symbols *= 2;
  const auto a = measure_post_convergence_ber(c, w), b = measure_post_convergence_ber(wide, w);
  EXPECT_EQ(a.bit_errors, 0u);
  EXPECT_EQ(a.ber_counted, b.ber_counted);
}

TEST(MeasureBer, UnequalizedLongFiberFailsEqualizedPasses) {
  ScenarioConfig c;
  c.fiber.length_km = 15.0;
  c.training_iterations = 400;
  c.dd_iterations = 0;
  c.measure_symbols = 20000;
  const auto eq = measure_post_convergence_ber(c, converge(c));
  const auto raw = measure_unequalized_ber(c);
  EXPECT_GT(raw.ber_counted, c.fec_threshold);
  EXPECT_LT(eq.ber_counted, c.fec_threshold);
}

TEST(Sweep, SortedAndIndependentOfThreads) {
  ScenarioConfig c;
  c.fiber.length_km = 10.0;
  c.training_iterations = 80;
  c.dd_iterations = 10;
  c.measure_symbols = 4000;
  const auto serial = sweep_taps(c, {5, 1, 3}, 1);
  const auto threaded = sweep_taps(c, {5, 1, 3}, 3);
  EXPECT_EQ(serial, threaded);
  ASSERT_EQ(serial.points.size(), 3u);
  EXPECT_EQ(serial.variable, SweepVariable::Taps);
  EXPECT_EQ(serial.points[0].value, 1.0);
  EXPECT_EQ(serial.points[2].value, 5.0);
  EXPECT_EQ(serial.points[2].weights.size(), 5u);
  EXPECT_TRUE(sweep_osnr(c, {}, 2).points.empty());
  const auto lens = sweep_length(c, {10, 0}, 2);
  EXPECT_EQ(lens.points[0].value, 0.0);
  EXPECT_THROW(sweep_length(c, {-1}, 1), std::invalid_argument);
}
