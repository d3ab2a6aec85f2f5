// Command-line front end: single runs, parameter sweeps and converged responses.

#include <cstdio>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "oleq/experiment.hpp"
#include "oleq/io.hpp"

namespace {

constexpr int kExitDiverged = 3;
constexpr int kExitBadInput = 2;

struct Common {
  std::string config;
  std::string out;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
};

oleq::ScenarioConfig load(const Common& c) {
  auto cfg = oleq::io::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

oleq::io::Format format_of(const Common& c) {
  return c.format == "json" ? oleq::io::Format::Json : oleq::io::Format::Csv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive optical FIR equalizer link simulator"};
  app.require_subcommand(1);

  Common common;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the scenario seed");
  app.add_option("--threads", common.threads, "Worker threads for sweep points")->check(CLI::PositiveNumber);

  auto add_io = [&](CLI::App* sub, bool with_out) {
    sub->add_option("--config", common.config, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    if (with_out) {
      sub->add_option("--out", common.out, "Output file (default stdout)");
      sub->add_option("--format", common.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    }
  };

  auto* run = app.add_subcommand("run", "Training + decision-directed convergence run, one record per iteration");
  add_io(run, true);

  auto* sweep = app.add_subcommand("sweep", "Post-convergence BER versus taps, fiber length or OSNR");
  std::string variable;
  std::vector<double> values;
  sweep->add_option("variable", variable, "taps | length | osnr")
      ->required()
      ->check(CLI::IsMember({"taps", "length", "osnr"}));
  sweep->add_option("--values", values, "Comma-separated sweep values")->required()->delimiter(',');
  add_io(sweep, true);

  auto* response = app.add_subcommand("response", "Magnitude and phase of the converged equalizer");
  double span_hz = 160e9;
  std::size_t points = 641;
  response->add_option("--span", span_hz, "Frequency span in Hz, centred on the carrier");
  response->add_option("--points", points, "Number of frequency points")->check(CLI::Range(2, 1000000));
  add_io(response, true);

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) common.seed = seed_value;

  try {
    const auto cfg = load(common);
    const auto fmt = format_of(common);
    if (*run) {
      oleq::io::emit_results(cfg, oleq::run_convergence(cfg), common.out, fmt);
    } else if (*sweep) {
      oleq::SweepResult result;
      if (variable == "taps") {
        std::vector<std::size_t> taps;
        for (double v : values) {
          if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v)))
            throw std::invalid_argument("tap counts must be positive integers");
          taps.push_back(static_cast<std::size_t>(v));
        }
        result = oleq::sweep_taps(cfg, taps, common.threads);
      } else if (variable == "length") {
        result = oleq::sweep_length(cfg, values, common.threads);
      } else {
        result = oleq::sweep_osnr(cfg, values, common.threads);
      }
      oleq::io::emit_results(cfg, result, common.out, fmt);
    } else if (*response) {
      const auto state = oleq::converge(cfg);
      const auto grid = oleq::symmetric_grid(span_hz, points);
      const auto resp = oleq::frequency_response(state, grid);
      if (fmt == oleq::io::Format::Csv)
        oleq::io::write_text(common.out, oleq::io::to_csv(resp));
      else
        oleq::io::write_text(common.out, nlohmann::json{{"config", oleq::io::to_json(cfg)},
                                                        {"weights", oleq::io::detail::weights_json(state.weights)},
                                                        {"response", oleq::io::to_json(resp)}}
                                                 .dump(2) + "\n");
    }
  } catch (const oleq::DivergenceError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return kExitDiverged;
  } catch (const oleq::io::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitBadInput;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
