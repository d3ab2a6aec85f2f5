#ifndef OLEQ_IO_HPP
#define OLEQ_IO_HPP

// JSON scenario files and CSV / JSON result emission.

#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "oleq/experiment.hpp"

namespace oleq::io {

using json = nlohmann::json;

enum class Format { Csv, Json };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key \"" + key + "\"");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline void read_optional(const json& j, const char* key, std::optional<double>& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  double v = 0.0;
  read(j, key, v, where);
  out = v;
}

inline json weights_json(const std::vector<cplx>& w) {
  json a = json::array();
  for (const auto& c : w) a.push_back(json::array({c.real(), c.imag()}));
  return a;
}

inline std::vector<cplx> weights_from(const json& a) {
  std::vector<cplx> w;
  for (const auto& p : a) w.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  return w;
}

inline std::string weights_csv(const std::vector<cplx>& w) {
  std::string s = "\"[";
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) s += ",";
    s += "[" + fmt(w[i].real()) + "," + fmt(w[i].imag()) + "]";
  }
  return s + "]\"";
}

}  // namespace detail

inline json to_json(const ScenarioConfig& c) {
  json fb;
  fb["mu"] = c.feedback.mu;
  fb["normalize_mu"] = c.feedback.normalize_mu;
  fb["block_symbols"] = c.feedback.block_symbols;
  if (const auto* seq = std::get_if<SequentialSchedule>(&c.feedback.schedule))
    fb["schedule"] = {{"type", "sequential"}, {"runs_per_tap", seq->runs_per_tap}};
  else
    fb["schedule"] = {{"type", "parallel"}};
  fb["mode"] = c.feedback.mode == Mode::Training ? "training" : "decision_directed";
  if (const auto* oe = std::get_if<OptoElectronicCorrelator>(&c.feedback.correlator))
    fb["correlator"] = {{"type", "opto_electronic"},
                        {"pilot_offset", oe->pilot_offset},
                        {"bpf_halfwidth", oe->bpf_halfwidth},
                        {"lpf_cutoff", oe->lpf_cutoff},
                        {"drive_cutoff", oe->drive_cutoff ? json(*oe->drive_cutoff) : json(nullptr)}};
  else
    fb["correlator"] = {{"type", "ideal"}};

  json j;
  j["fiber"] = {{"dispersion_ps_nm_km", c.fiber.dispersion_ps_nm_km},
                {"length_km", c.fiber.length_km},
                {"wavelength_nm", c.fiber.wavelength_nm}};
  j["noise"] = {{"osnr_db", c.noise.osnr_db ? json(*c.noise.osnr_db) : json(nullptr)},
                {"reference_bandwidth", c.noise.reference_bandwidth},
                {"seed", c.noise.seed}};
  j["n_taps"] = c.n_taps;
  j["feedback"] = fb;
  j["training_iterations"] = c.training_iterations;
  j["dd_iterations"] = c.dd_iterations;
  j["seed"] = c.seed;
  j["samples_per_symbol"] = c.samples_per_symbol;
  j["demux_halfwidth_hz"] = c.demux_halfwidth_hz ? json(*c.demux_halfwidth_hz) : json(nullptr);
  j["integrate_and_dump"] = c.integrate_and_dump;
  j["guard_symbols"] = c.guard_symbols;
  j["fec_threshold"] = c.fec_threshold;
  j["measure_symbols"] = c.measure_symbols;
  j["clamp_tap_sum"] = c.clamp_tap_sum;
  return j;
}

/// Parses a scenario; absent keys keep their defaults, unknown keys are errors.
inline ScenarioConfig config_from_json(const json& j) {
  using detail::read;
  ScenarioConfig c;
  detail::reject_unknown(j,
                         {"fiber", "noise", "n_taps", "feedback", "training_iterations", "dd_iterations", "seed",
                          "samples_per_symbol", "demux_halfwidth_hz", "integrate_and_dump", "guard_symbols",
                          "fec_threshold", "measure_symbols", "clamp_tap_sum"},
                         "config");
  if (j.contains("fiber")) {
    const auto& f = j.at("fiber");
    detail::reject_unknown(f, {"dispersion_ps_nm_km", "length_km", "wavelength_nm"}, "fiber");
    read(f, "dispersion_ps_nm_km", c.fiber.dispersion_ps_nm_km, "fiber");
    read(f, "length_km", c.fiber.length_km, "fiber");
    read(f, "wavelength_nm", c.fiber.wavelength_nm, "fiber");
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    detail::reject_unknown(n, {"osnr_db", "reference_bandwidth", "seed"}, "noise");
    detail::read_optional(n, "osnr_db", c.noise.osnr_db, "noise");
    read(n, "reference_bandwidth", c.noise.reference_bandwidth, "noise");
    read(n, "seed", c.noise.seed, "noise");
  }
  if (j.contains("feedback")) {
    const auto& f = j.at("feedback");
    detail::reject_unknown(f, {"mu", "normalize_mu", "block_symbols", "schedule", "mode", "correlator"}, "feedback");
    read(f, "mu", c.feedback.mu, "feedback");
    read(f, "normalize_mu", c.feedback.normalize_mu, "feedback");
    read(f, "block_symbols", c.feedback.block_symbols, "feedback");
    if (f.contains("schedule")) {
      const auto& s = f.at("schedule");
      std::string type = "parallel";
      read(s, "type", type, "feedback.schedule");
      if (type == "parallel") {
        detail::reject_unknown(s, {"type"}, "feedback.schedule");
        c.feedback.schedule = ParallelSchedule{};
      } else if (type == "sequential") {
        detail::reject_unknown(s, {"type", "runs_per_tap"}, "feedback.schedule");
        SequentialSchedule seq;
        read(s, "runs_per_tap", seq.runs_per_tap, "feedback.schedule");
        c.feedback.schedule = seq;
      } else {
        throw ConfigError("feedback.schedule.type: unknown schedule \"" + type + "\"");
      }
    }
    if (f.contains("mode")) {
      std::string mode;
      read(f, "mode", mode, "feedback");
      if (mode == "training") c.feedback.mode = Mode::Training;
      else if (mode == "decision_directed") c.feedback.mode = Mode::DecisionDirected;
      else throw ConfigError("feedback.mode: unknown mode \"" + mode + "\"");
    }
    if (f.contains("correlator")) {
      const auto& k = f.at("correlator");
      std::string type = "ideal";
      read(k, "type", type, "feedback.correlator");
      if (type == "ideal") {
        detail::reject_unknown(k, {"type"}, "feedback.correlator");
        c.feedback.correlator = IdealCorrelator{};
      } else if (type == "opto_electronic") {
        detail::reject_unknown(k, {"type", "pilot_offset", "bpf_halfwidth", "lpf_cutoff", "drive_cutoff"},
                               "feedback.correlator");
        OptoElectronicCorrelator oe;
        read(k, "pilot_offset", oe.pilot_offset, "feedback.correlator");
        read(k, "bpf_halfwidth", oe.bpf_halfwidth, "feedback.correlator");
        read(k, "lpf_cutoff", oe.lpf_cutoff, "feedback.correlator");
        detail::read_optional(k, "drive_cutoff", oe.drive_cutoff, "feedback.correlator");
        c.feedback.correlator = oe;
      } else {
        throw ConfigError("feedback.correlator.type: unknown correlator \"" + type + "\"");
      }
    }
  }
  read(j, "n_taps", c.n_taps, "config");
  read(j, "training_iterations", c.training_iterations, "config");
  read(j, "dd_iterations", c.dd_iterations, "config");
  read(j, "seed", c.seed, "config");
  read(j, "samples_per_symbol", c.samples_per_symbol, "config");
  detail::read_optional(j, "demux_halfwidth_hz", c.demux_halfwidth_hz, "config");
  read(j, "integrate_and_dump", c.integrate_and_dump, "config");
  read(j, "guard_symbols", c.guard_symbols, "config");
  read(j, "fec_threshold", c.fec_threshold, "config");
  read(j, "measure_symbols", c.measure_symbols, "config");
  read(j, "clamp_tap_sum", c.clamp_tap_sum, "config");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j);
}

// ---- results -------------------------------------------------------------

inline json to_json(const ScenarioConfig& cfg, const std::vector<IterationRecord>& records) {
  json recs = json::array();
  for (const auto& r : records)
    recs.push_back({{"iteration", r.iteration},
                    {"mode", to_string(r.mode)},
                    {"block_error_power", r.block_error_power},
                    {"ber_counted", r.ber_counted},
                    {"ber_estimated", r.ber_estimated},
                    {"weights", detail::weights_json(r.weights)}});
  return {{"config", to_json(cfg)}, {"records", recs}};
}

inline json to_json(const ScenarioConfig& cfg, const SweepResult& sweep) {
  json pts = json::array();
  for (const auto& p : sweep.points)
    pts.push_back({{"value", p.value},
                   {"bit_errors", p.ber.bit_errors},
                   {"bits_compared", p.ber.bits_compared},
                   {"ber_counted", p.ber.ber_counted},
                   {"ber_estimated", p.ber.ber_estimated},
                   {"evm_rms", p.ber.evm_rms},
                   {"weights", detail::weights_json(p.weights)}});
  return {{"config", to_json(cfg)}, {"variable", to_string(sweep.variable)}, {"points", pts}};
}

inline std::vector<IterationRecord> records_from_json(const json& j) {
  std::vector<IterationRecord> out;
  for (const auto& r : j.at("records")) {
    IterationRecord rec;
    rec.iteration = r.at("iteration").get<std::size_t>();
    rec.mode = r.at("mode").get<std::string>() == "training" ? Mode::Training : Mode::DecisionDirected;
    rec.block_error_power = r.at("block_error_power").get<double>();
    rec.ber_counted = r.at("ber_counted").get<double>();
    rec.ber_estimated = r.at("ber_estimated").get<double>();
    rec.weights = detail::weights_from(r.at("weights"));
    out.push_back(std::move(rec));
  }
  return out;
}

inline SweepResult sweep_from_json(const json& j) {
  SweepResult s;
  const auto var = j.at("variable").get<std::string>();
  if (var == "taps") s.variable = SweepVariable::Taps;
  else if (var == "length_km") s.variable = SweepVariable::LengthKm;
  else if (var == "osnr_db") s.variable = SweepVariable::OsnrDb;
  else throw std::invalid_argument("unknown sweep variable " + var);
  for (const auto& p : j.at("points")) {
    SweepPoint pt;
    pt.value = p.at("value").get<double>();
    pt.ber.bit_errors = p.at("bit_errors").get<std::uint64_t>();
    pt.ber.bits_compared = p.at("bits_compared").get<std::uint64_t>();
    pt.ber.ber_counted = p.at("ber_counted").get<double>();
    pt.ber.ber_estimated = p.at("ber_estimated").get<double>();
    pt.ber.evm_rms = p.at("evm_rms").get<double>();
    pt.weights = detail::weights_from(p.at("weights"));
    s.points.push_back(std::move(pt));
  }
  return s;
}

inline std::string to_csv(const std::vector<IterationRecord>& records) {
  std::string s = "iteration,mode,block_error_power,ber_counted,ber_estimated,weights\n";
  for (const auto& r : records) {
    s += std::to_string(r.iteration) + "," + to_string(r.mode) + "," + detail::fmt(r.block_error_power) + "," +
         detail::fmt(r.ber_counted) + "," + detail::fmt(r.ber_estimated) + "," + detail::weights_csv(r.weights) +
         "\n";
  }
  return s;
}

inline std::string to_csv(const SweepResult& sweep) {
  std::string s = std::string(to_string(sweep.variable)) +
                  ",bit_errors,bits_compared,ber_counted,ber_estimated,evm_rms,weights\n";
  for (const auto& p : sweep.points) {
    s += detail::fmt(p.value) + "," + std::to_string(p.ber.bit_errors) + "," + std::to_string(p.ber.bits_compared) +
         "," + detail::fmt(p.ber.ber_counted) + "," + detail::fmt(p.ber.ber_estimated) + "," +
         detail::fmt(p.ber.evm_rms) + "," + detail::weights_csv(p.weights) + "\n";
  }
  return s;
}

inline std::string to_csv(const std::vector<ResponseSample>& response) {
  std::string s = "frequency_hz,magnitude,phase_rad\n";
  for (const auto& r : response)
    s += detail::fmt(r.frequency) + "," + detail::fmt(std::abs(r.amplitude)) + "," + detail::fmt(r.phase) + "\n";
  return s;
}

inline json to_json(const std::vector<ResponseSample>& response) {
  json a = json::array();
  for (const auto& r : response)
    a.push_back({{"frequency_hz", r.frequency}, {"magnitude", std::abs(r.amplitude)}, {"phase_rad", r.phase}});
  return a;
}

/// Writes `text` to `path`, or to stdout when path is empty or "-".
inline void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for output file " + path);
}

template <typename Result>
void emit_results(const ScenarioConfig& cfg, const Result& result, const std::string& path, Format format) {
  write_text(path, format == Format::Csv ? to_csv(result) : to_json(cfg, result).dump(2) + "\n");
}

}  // namespace oleq::io

#endif  // OLEQ_IO_HPP
