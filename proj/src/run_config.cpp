#include "qdblink/run_config.hpp"

#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "qdblink/error.hpp"

namespace qdb {
namespace {

using Setter = std::function<void(const std::string& value)>;

double to_double(const std::string& key, std::string value) {
  boost::algorithm::trim(value);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    throw ValidationError(key + ": expected a number, got '" + value + "'");
  }
  return out;
}

std::int64_t to_int(const std::string& key, std::string value) {
  boost::algorithm::trim(value);
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    throw ValidationError(key + ": expected an integer, got '" + value + "'");
  }
  return out;
}

std::vector<double> to_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, item));
  return out;
}

std::string to_word(std::string value) {
  boost::algorithm::trim(value);
  return value;
}

std::map<std::string, Setter> setters(RunConfig& c) {
  std::map<std::string, Setter> s;
  auto num = [&s](const std::string& key, double& field) {
    s[key] = [key, &field](const std::string& v) { field = to_double(key, v); };
  };
  auto integer = [&s](const std::string& key, auto& field) {
    s[key] = [key, &field](const std::string& v) {
      field = static_cast<std::remove_reference_t<decltype(field)>>(to_int(key, v));
    };
  };
  auto list = [&s](const std::string& key, std::vector<double>& field) {
    s[key] = [key, &field](const std::string& v) { field = to_list(key, v); };
  };
  auto word = [&s](const std::string& key, std::string& field) {
    s[key] = [&field](const std::string& v) { field = to_word(v); };
  };

  num("rates.p_xx", c.rates.p_xx);
  num("rates.gamma_xx_per_ns", c.rates.gamma_xx_per_ns);
  num("rates.gamma_x_per_ns", c.rates.gamma_x_per_ns);
  num("rates.gamma_gc_per_us", c.rates.gamma_gc_per_us);
  num("rates.gamma_cg_per_us", c.rates.gamma_cg_per_us);
  num("rates.p_c", c.rates.p_c);
  num("rates.gamma_c_per_ns", c.rates.gamma_c_per_ns);
  num("rates.gamma_e_d_per_us", c.rates.gamma_e_d_per_us);
  num("rates.gamma_h_d_per_us", c.rates.gamma_h_d_per_us);

  num("pulses.rep_rate_hz", c.pulses.rep_rate_hz);
  num("pulses.pulse_len_ps", c.pulses.pulse_len_ps);
  num("pulses.duration_s", c.duration_s);

  num("detector.efficiency_x", c.detector.efficiency[0]);
  num("detector.efficiency_xx", c.detector.efficiency[1]);
  num("detector.efficiency_xplus", c.detector.efficiency[2]);
  num("detector.efficiency_aux", c.detector.efficiency[3]);
  num("detector.dark_rate_cps", c.detector.dark_rate_cps);
  num("detector.jitter_sigma_ps", c.detector.jitter_sigma_ps);
  num("detector.dead_time_ps", c.detector.dead_time_ps);

  num("gate.wavelength_nm", c.gate.wavelength_nm);
  num("gate.power_nw", c.gate.power_nw);
  num("gate.map_gc_per_nw_us", c.gate.map_gc_per_nw_us);
  num("gate.map_cg_per_nw_us", c.gate.map_cg_per_nw_us);
  num("gate.sat_power_nw", c.gate.sat_power_nw);

  word("sweep.kind", c.sweep.kind);
  list("sweep.labels", c.sweep.labels);
  list("sweep.gamma_gc_per_us", c.sweep.gamma_gc_per_us);
  list("sweep.gamma_cg_per_us", c.sweep.gamma_cg_per_us);
  list("sweep.gate_power_nw", c.sweep.gate_power_nw);

  num("fit.tau_max_us", c.fit.tau_max_us);
  integer("fit.min_pulse_index", c.fit.min_pulse_index);
  num("fit.norm_window_us", c.fit.norm_window_us);
  integer("fit.max_iterations", c.fit.max_iterations);
  num("fit.log_tau_min_us", c.fit.log_tau_min_us);
  num("fit.log_tau_max_us", c.fit.log_tau_max_us);
  integer("fit.points_per_decade", c.fit.points_per_decade);

  word("tomo.state", c.tomo.state);
  num("tomo.werner_p", c.tomo.werner_p);
  integer("tomo.pairs_per_setting", c.tomo.pairs_per_setting);
  integer("tomo.resamples", c.tomo.resamples);
  word("tomo.settings", c.tomo.settings);
  return s;
}

void check(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

void validate(const RunConfig& c) {
  validate(c.rates);
  validate(c.pulses);
  validate(c.detector);
  validate(c.gate);
  check(c.duration_s > 0.0, "pulses.duration_s must be > 0");

  const auto& s = c.sweep;
  check(s.kind == "wavelength" || s.kind == "power", "sweep.kind must be 'wavelength' or 'power'");
  for (const auto* list : {&s.gamma_gc_per_us, &s.gamma_cg_per_us, &s.gate_power_nw}) {
    check(list->empty() || list->size() == s.labels.size(),
          "sweep: per-label lists must match sweep.labels in length");
  }
  for (double v : s.gamma_gc_per_us) check(v >= 0.0, "sweep.gamma_gc_per_us must be >= 0");
  for (double v : s.gamma_cg_per_us) check(v >= 0.0, "sweep.gamma_cg_per_us must be >= 0");
  for (double v : s.gate_power_nw) check(v >= 0.0, "sweep.gate_power_nw must be >= 0");

  const auto& f = c.fit;
  check(f.tau_max_us > 0.0, "fit.tau_max_us must be > 0");
  check(f.min_pulse_index >= 1, "fit.min_pulse_index must be >= 1");
  check(f.norm_window_us >= 0.0, "fit.norm_window_us must be >= 0");
  check(f.max_iterations > 0, "fit.max_iterations must be > 0");
  check(f.log_tau_min_us > 0.0 && f.log_tau_max_us > f.log_tau_min_us,
        "fit.log_tau_min_us / log_tau_max_us must satisfy 0 < min < max");
  check(f.points_per_decade >= 4, "fit.points_per_decade must be >= 4");

  const auto& t = c.tomo;
  check(t.state == "werner" || t.state == "bell" || t.state == "mixed",
        "tomo.state must be werner, bell or mixed");
  check(t.werner_p >= 0.0 && t.werner_p <= 1.0, "tomo.werner_p must lie in [0, 1]");
  check(t.pairs_per_setting > 0, "tomo.pairs_per_setting must be > 0");
  check(t.resamples == 0 || t.resamples >= 100, "tomo.resamples must be 0 or >= 100");
  check(t.settings == "canonical" || t.settings == "full", "tomo.settings must be canonical or full");
}

}  // namespace

RunConfig parse_run_config(std::string_view text) {
  boost::property_tree::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError("config line " + std::to_string(e.line()) + ": " + e.message());
  }

  RunConfig config;
  const auto table = setters(config);
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ValidationError("config key '" + section + "' is outside any section");
    }
    for (const auto& [key, value] : body) {
      const std::string path = section + "." + key;
      const auto it = table.find(path);
      if (it == table.end()) throw ValidationError("unknown config key '" + path + "'");
      it->second(value.data());
    }
  }
  validate(config);
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

RateSet gated_rates(const RunConfig& config) { return apply_gate(config.rates, config.gate); }

}  // namespace qdb
