#include "levsim/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <iterator>
#include <clocale>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "levsim/estimators.hpp"
#include "levsim/interference.hpp"
#include "levsim/protocols.hpp"
#include "levsim/units.hpp"

namespace levsim::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Value parsing (locale-free, strict: the whole token must be consumed).

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& raw) {
  const std::string t = trim(raw);
  const char* first = t.c_str();
  if (!t.empty() && t[0] == '+') ++first; // from_chars rejects a leading '+'
  double v = 0.0;
  const char* last = t.c_str() + t.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last || t.empty())
    throw ConfigError(key + ": not a number: '" + raw + "'");
  return v;
}

long parse_int(const std::string& key, const std::string& raw) {
  const std::string t = trim(raw);
  const char* first = t.c_str();
  if (!t.empty() && t[0] == '+') ++first;
  long v = 0;
  const char* last = t.c_str() + t.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last || t.empty())
    throw ConfigError(key + ": not an integer: '" + raw + "'");
  return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  std::string token;
  std::istringstream in(raw);
  // Accept comma and/or whitespace separated values; an empty value is an
  // empty list (used by sweeps).
  std::string normalized = raw;
  for (char& c : normalized)
    if (c == ',') c = ' ';
  std::istringstream nin(normalized);
  while (nin >> token) out.push_back(parse_double(key, token));
  return out;
}

double checked_double(const std::string& key, const std::string& raw,
                      double lo, double hi, bool lo_inclusive) {
  const double v = parse_double(key, raw);
  const bool above = lo_inclusive ? v >= lo : v > lo;
  if (!std::isfinite(v) || !above || v > hi) {
    std::ostringstream os;
    os << key << ": value " << raw << " outside allowed range "
       << (lo_inclusive ? "[" : "(") << lo << ", " << hi << "]";
    throw ConfigError(os.str());
  }
  return v;
}

int checked_int(const std::string& key, const std::string& raw, long lo,
                long hi) {
  const long v = parse_int(key, raw);
  if (v < lo || v > hi) {
    std::ostringstream os;
    os << key << ": value " << raw << " outside allowed range [" << lo << ", "
       << hi << "]";
    throw ConfigError(os.str());
  }
  return static_cast<int>(v);
}

// ---------------------------------------------------------------------------
// Key schema: one table drives config files, --set overrides, and --help.

struct KeySpec {
  std::string key; // dotted: "params.diameter", or "experiment"
  const char* doc;
  std::function<void(ScenarioConfig&, const std::string&, const std::string&)>
      set; // (cfg, reported key label, raw value)
};

const std::vector<KeySpec>& schema() {
  auto param = [](double ExperimentParams::* field, double lo, double hi,
                  bool lo_incl) {
    return [field, lo, hi, lo_incl](ScenarioConfig& c, const std::string& k,
                                    const std::string& v) {
      c.params.*field = checked_double(k, v, lo, hi, lo_incl);
    };
  };
  auto trap_hz = [](double ExperimentParams::* field) {
    return [field](ScenarioConfig& c, const std::string& k,
                   const std::string& v) {
      c.params.*field = constants::angular(checked_double(k, v, 0.0, 1e12, false));
    };
  };
  static const std::vector<KeySpec> table = {
      {"experiment",
       "scenario: fidelity-scan | fock-ladder | qnd | cat | interference | "
       "thermal | decoherence | sweep-Dm",
       [](ScenarioConfig& c, const std::string& k, const std::string& v) {
         static const std::set<std::string> known = {
             "fidelity-scan", "fock-ladder", "qnd",          "cat",
             "interference",  "thermal",     "decoherence",  "sweep-Dm"};
         const std::string t = trim(v);
         if (!known.count(t))
           throw ConfigError(k + ": unknown scenario '" + t + "'");
         c.experiment = t;
       }},
      {"params.diameter", "sphere diameter [m], (0, 1e-3]",
       param(&ExperimentParams::diameter, 0.0, 1e-3, false)},
      {"params.density", "material density [kg/m^3], (0, 1e6]",
       param(&ExperimentParams::density, 0.0, 1e6, false)},
      {"params.trap_hz_0", "preparation trap frequency [Hz], (0, 1e12]",
       trap_hz(&ExperimentParams::omega_m0)},
      {"params.trap_hz_1", "post-sweep trap frequency [Hz], (0, 1e12]",
       trap_hz(&ExperimentParams::omega_m1)},
      {"params.trap_hz_2", "splitting trap frequency [Hz], (0, 1e12]",
       trap_hz(&ExperimentParams::omega_m2)},
      {"params.gradient", "magnetic field gradient [T/m], [0, 1e12]",
       param(&ExperimentParams::gradient, 0.0, 1e12, true)},
      {"params.pressure_torr", "gas pressure [Torr], (0, 1e6]",
       [](ScenarioConfig& c, const std::string& k, const std::string& v) {
         c.params.pressure =
             constants::torr_to_pa(checked_double(k, v, 0.0, 1e6, false));
       }},
      {"params.gas_temperature", "environment gas temperature [K], (0, 1e6]",
       param(&ExperimentParams::gas_temperature, 0.0, 1e6, false)},
      {"params.internal_temperature",
       "internal (blackbody) temperature [K], (0, 1e6]",
       param(&ExperimentParams::internal_temperature, 0.0, 1e6, false)},
      {"params.gas_mass", "gas molecule mass [kg], (0, 1]",
       param(&ExperimentParams::gas_mass, 0.0, 1.0, false)},
      {"params.flight_time", "free expansion time [s], (0, 1e4]",
       param(&ExperimentParams::flight_time, 0.0, 1e4, false)},
      {"params.spin_t2", "spin dephasing budget T2 [s], (0, 1e6]",
       param(&ExperimentParams::spin_T2, 0.0, 1e6, false)},
      {"params.interference_width",
       "blackbody coherence length z [m], [0, 1]; 0 = derived separation",
       param(&ExperimentParams::interference_width, 0.0, 1.0, true)},
      {"params.im_eps",
       "Im[(eps-1)/(eps+2)] at thermal wavelengths (calibration), (0, 1e3]",
       param(&ExperimentParams::im_eps, 0.0, 1e3, false)},
      {"numerics.fock_dim", "Fock truncation, [0, 16384]; 0 = automatic",
       [](ScenarioConfig& c, const std::string& k, const std::string& v) {
         c.numerics.fock_dim = checked_int(k, v, 0, 16384);
       }},
      {"numerics.grid_points", "position grid points, power of two in [8, 2^22]",
       [](ScenarioConfig& c, const std::string& k, const std::string& v) {
         const int n = checked_int(k, v, 8, 1 << 22);
         if ((n & (n - 1)) != 0)
           throw ConfigError(k + ": must be a power of two, got " + v);
         c.numerics.grid_points = n;
       }},
      {"numerics.grid_extent", "position grid full width [m], (0, 1]",
       [](ScenarioConfig& c, const std::string& k, const std::string& v) {
         c.numerics.grid_extent = checked_double(k, v, 0.0, 1.0, false);
       }},
      {"numerics.time_samples",
       "trace/scan samples, 0 or [8, 1e6]; 0 = per-protocol default",
       [](ScenarioConfig& c, const std::string& k, const std::string& v) {
         const int n = checked_int(k, v, 0, 1000000);
         if (n != 0 && n < 8)
           throw ConfigError(k + ": must be 0 or at least 8, got " + v);
         c.numerics.time_samples = n;
       }},
      {"output.path", "output directory (default '.'; env LEVSIM_OUT overrides"
       " file/default, an explicit flag overrides both)",
       [](ScenarioConfig& c, const std::string&, const std::string& v) {
         c.output.path = trim(v);
       }},
      {"output.format", "table artifact format: csv | json",
       [](ScenarioConfig& c, const std::string& k, const std::string& v) {
         const std::string t = trim(v);
         if (t != "csv" && t != "json")
           throw ConfigError(k + ": must be csv or json, got '" + t + "'");
         c.output.format = t;
       }},
      {"scenario.n",
       "phonon number for cat/interference/qnd, [0, 64]; unset = scenario "
       "default (qnd: 1, others: 0)",
       [](ScenarioConfig& c, const std::string& k, const std::string& v) {
         c.scenario.n = checked_int(k, v, 0, 64);
       }},
      {"scenario.n_max", "fock-ladder target phonon number, [1, 64]",
       [](ScenarioConfig& c, const std::string& k, const std::string& v) {
         c.scenario.n_max = checked_int(k, v, 1, 64);
       }},
      {"scenario.sign", "branch recombination sign: + | - (also +1 | -1)",
       [](ScenarioConfig& c, const std::string& k, const std::string& v) {
         const std::string t = trim(v);
         if (t == "+" || t == "+1")
           c.scenario.sign = +1;
         else if (t == "-" || t == "-1")
           c.scenario.sign = -1;
         else
           throw ConfigError(k + ": must be + or -, got '" + t + "'");
       }},
      {"scenario.hold_time", "qnd hold time [s], [0, 1e4]; 0 = pi/(2|chi|)",
       [](ScenarioConfig& c, const std::string& k, const std::string& v) {
         c.scenario.hold_time = checked_double(k, v, 0.0, 1e4, true);
       }},
      {"scenario.nbar",
       "thermal occupations, comma list of values in [0, 1e3]",
       [](ScenarioConfig& c, const std::string& k, const std::string& v) {
         auto list = parse_list(k, v);
         for (double x : list)
           if (!(x >= 0.0) || !(x <= 1e3))
             throw ConfigError(k + ": occupation must be in [0, 1e3]");
         c.scenario.nbar = std::move(list);
       }},
      {"scenario.s",
       "fidelity-scan trap/coupling ratios, comma list of values in (2, 1e6]",
       [](ScenarioConfig& c, const std::string& k, const std::string& v) {
         auto list = parse_list(k, v);
         for (double x : list)
           if (!(x > 2.0) || !(x <= 1e6))
             throw ConfigError(k + ": ratio must be in (2, 1e6]");
         c.scenario.s = std::move(list);
       }},
      {"sweep.param", "sweep axis: G | omega_m2 | d | nbar | s",
       [](ScenarioConfig& c, const std::string& k, const std::string& v) {
         static const std::set<std::string> known = {"G", "omega_m2", "d",
                                                     "nbar", "s"};
         const std::string t = trim(v);
         if (!known.count(t))
           throw ConfigError(k + ": unknown sweep parameter '" + t + "'");
         c.sweep.param = t;
       }},
      {"sweep.values",
       "sweep axis values, comma list (units: G [T/m], omega_m2 [Hz], d [m], "
       "nbar, s); empty = empty table",
       [](ScenarioConfig& c, const std::string& k, const std::string& v) {
         c.sweep.values = parse_list(k, v);
         c.sweep.has_values = true;
       }},
  };
  return table;
}

const KeySpec* find_key(const std::string& key) {
  for (const auto& spec : schema())
    if (spec.key == key) return &spec;
  return nullptr;
}

} // namespace

void apply_key(ScenarioConfig& cfg, const std::string& key,
               const std::string& value) {
  const KeySpec* spec = find_key(trim(key));
  if (!spec) throw ConfigError(trim(key) + ": unknown key");
  spec->set(cfg, spec->key, value);
}

void parse_config_text(ScenarioConfig& cfg, const std::string& text,
                       const std::string& filename) {
  std::istringstream in(text);
  std::string line, section;
  std::set<std::string> seen;
  int lineno = 0;
  static const std::set<std::string> sections = {"params", "numerics",
                                                 "output", "scenario", "sweep"};
  while (std::getline(in, line)) {
    ++lineno;
    const auto label = [&] { return filename + ":" + std::to_string(lineno); };
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty() || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(label() + ": malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section))
        throw ConfigError(label() + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(label() + ": expected key = value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(label() + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (!seen.insert(full).second)
      throw ConfigError(label() + ": duplicate key '" + full + "'");
    try {
      apply_key(cfg, full, value);
    } catch (const ConfigError& e) {
      throw ConfigError(label() + ": " + e.what());
    }
  }
}

void validate_config(const ScenarioConfig& cfg) {
  if (cfg.experiment.empty())
    throw ConfigError(
        "experiment: required (pass it to `run`, or set it in the config)");
  // Scenario identity is validated on assignment; cross-checks follow.
  const std::string& ex = cfg.experiment;
  const std::string& axis = cfg.sweep.param;
  if (ex == "sweep-Dm") {
    if (axis != "G" && axis != "omega_m2" && axis != "d")
      throw ConfigError(
          "sweep.param: sweep-Dm sweeps G, omega_m2 or d; got '" + axis + "'");
    if (!cfg.sweep.has_values)
      throw ConfigError("sweep.values: required for sweep-Dm");
  } else if (!axis.empty()) {
    const bool ok = (axis == "nbar" && ex == "thermal") ||
                    (axis == "s" && ex == "fidelity-scan");
    if (!ok)
      throw ConfigError("sweep.param: axis '" + axis +
                        "' is not sweepable for experiment '" + ex +
                        "' (G/omega_m2/d -> sweep-Dm, nbar -> thermal, "
                        "s -> fidelity-scan)");
    if (!cfg.sweep.has_values)
      throw ConfigError("sweep.values: required when sweep.param is set");
  }
  if (cfg.sweep.has_values) {
    for (double v : cfg.sweep.values) {
      if (!std::isfinite(v))
        throw ConfigError("sweep.values: values must be finite");
      if (axis == "G" && v < 0.0)
        throw ConfigError("sweep.values: gradient must be >= 0 T/m");
      if (axis == "omega_m2" && !(v > 0.0))
        throw ConfigError("sweep.values: trap frequency must be > 0 Hz");
      if (axis == "d" && !(v > 0.0 && v <= 1e-3))
        throw ConfigError("sweep.values: diameter must be in (0, 1e-3] m");
      if (axis == "nbar" && v < 0.0)
        throw ConfigError("sweep.values: occupation must be >= 0");
      if (axis == "s" && !(v > 2.0))
        throw ConfigError("sweep.values: ratio must exceed 2");
    }
  }
}

std::string schema_help() {
  std::ostringstream os;
  os << "Config file keys (flat `key = value` with [sections]; every key is\n"
        "also settable on the command line via --set <key>=<value>):\n";
  std::string section;
  for (const auto& spec : schema()) {
    const auto dot = spec.key.find('.');
    const std::string sec = dot == std::string::npos ? "" : spec.key.substr(0, dot);
    const std::string leaf = dot == std::string::npos ? spec.key : spec.key.substr(dot + 1);
    if (sec != section) {
      section = sec;
      os << "\n  [" << section << "]\n";
    }
    os << "  " << (sec.empty() ? "" : "  ") << leaf << "\n      " << spec.doc
       << "\n";
  }
  os << "\nEnvironment:\n  LEVSIM_OUT\n      output directory override "
        "(an explicit --out / --set output.path wins)\n";
  return os.str();
}

namespace {

// ---------------------------------------------------------------------------
// Artifact emission.

std::string fmt17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

ordered_json json_num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

std::string join17(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt17(v[i]);
  }
  return out;
}

ordered_json json_list(const std::vector<double>& v) {
  ordered_json a = ordered_json::array();
  for (double x : v) a.push_back(json_num(x));
  return a;
}

// The resolved configuration block that opens every artifact: scenario name,
// full parameter set (SI), numeric settings, artifact version.
ordered_json envelope(const ScenarioConfig& cfg) {
  ordered_json j;
  j["artifact_version"] = "1";
  j["experiment"] = cfg.experiment;
  ordered_json p;
  p["diameter_m"] = json_num(cfg.params.diameter);
  p["density_kg_m3"] = json_num(cfg.params.density);
  p["omega_m0_rad_s"] = json_num(cfg.params.omega_m0);
  p["omega_m1_rad_s"] = json_num(cfg.params.omega_m1);
  p["omega_m2_rad_s"] = json_num(cfg.params.omega_m2);
  p["gradient_t_per_m"] = json_num(cfg.params.gradient);
  p["pressure_pa"] = json_num(cfg.params.pressure);
  p["gas_temperature_k"] = json_num(cfg.params.gas_temperature);
  p["internal_temperature_k"] = json_num(cfg.params.internal_temperature);
  p["gas_mass_kg"] = json_num(cfg.params.gas_mass);
  p["flight_time_s"] = json_num(cfg.params.flight_time);
  p["spin_t2_s"] = json_num(cfg.params.spin_T2);
  p["interference_width_m"] = json_num(cfg.params.interference_width);
  p["im_eps"] = json_num(cfg.params.im_eps);
  j["params"] = std::move(p);
  ordered_json n;
  n["fock_dim"] = cfg.numerics.fock_dim;
  n["grid_points"] = cfg.numerics.grid_points;
  n["grid_extent_m"] = json_num(cfg.numerics.grid_extent);
  n["time_samples"] = cfg.numerics.time_samples;
  j["numerics"] = std::move(n);
  ordered_json s;
  s["n"] = cfg.scenario.n;
  s["n_max"] = cfg.scenario.n_max;
  s["sign"] = cfg.scenario.sign;
  s["hold_time_s"] = json_num(cfg.scenario.hold_time);
  s["nbar"] = json_list(cfg.scenario.nbar);
  s["s"] = json_list(cfg.scenario.s);
  j["scenario"] = std::move(s);
  if (!cfg.sweep.param.empty()) {
    ordered_json w;
    w["param"] = cfg.sweep.param;
    w["values"] = json_list(cfg.sweep.values);
    j["sweep"] = std::move(w);
  }
  return j;
}

std::string csv_header(const ScenarioConfig& cfg,
                       const std::vector<std::string>& columns) {
  std::ostringstream os;
  os << "# levsim artifact v1\n";
  os << "# experiment: " << cfg.experiment << "\n";
  const auto& p = cfg.params;
  os << "# params:"
     << " diameter_m=" << fmt17(p.diameter)
     << " density_kg_m3=" << fmt17(p.density)
     << " omega_m0_rad_s=" << fmt17(p.omega_m0)
     << " omega_m1_rad_s=" << fmt17(p.omega_m1)
     << " omega_m2_rad_s=" << fmt17(p.omega_m2)
     << " gradient_t_per_m=" << fmt17(p.gradient)
     << " pressure_pa=" << fmt17(p.pressure)
     << " gas_temperature_k=" << fmt17(p.gas_temperature)
     << " internal_temperature_k=" << fmt17(p.internal_temperature)
     << " gas_mass_kg=" << fmt17(p.gas_mass)
     << " flight_time_s=" << fmt17(p.flight_time)
     << " spin_t2_s=" << fmt17(p.spin_T2)
     << " interference_width_m=" << fmt17(p.interference_width)
     << " im_eps=" << fmt17(p.im_eps) << "\n";
  os << "# numerics: fock_dim=" << cfg.numerics.fock_dim
     << " grid_points=" << cfg.numerics.grid_points
     << " grid_extent_m=" << fmt17(cfg.numerics.grid_extent)
     << " time_samples=" << cfg.numerics.time_samples << "\n";
  os << "# scenario: n=" << cfg.scenario.n << " n_max=" << cfg.scenario.n_max
     << " sign=" << (cfg.scenario.sign > 0 ? "+1" : "-1")
     << " hold_time_s=" << fmt17(cfg.scenario.hold_time)
     << " nbar=" << join17(cfg.scenario.nbar)
     << " s=" << join17(cfg.scenario.s) << "\n";
  if (!cfg.sweep.param.empty())
    os << "# sweep: param=" << cfg.sweep.param
       << " values=" << join17(cfg.sweep.values) << "\n";
  os << "# columns: ";
  for (size_t i = 0; i < columns.size(); ++i)
    os << (i ? "," : "") << columns[i];
  os << "\n";
  return os.str();
}

struct Table {
  std::string stem;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct Artifacts {
  std::vector<Table> tables;
  std::vector<std::pair<std::string, ordered_json>> reports; // stem, payload
};

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.generic_string());
  out << content;
  out.close();
  if (!out) throw IoError("write failed: " + path.generic_string());
}

std::string render_csv(const ScenarioConfig& cfg, const Table& t) {
  std::string out = csv_header(cfg, t.columns);
  for (const auto& row : t.rows) {
    std::string line;
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) line += ',';
      line += fmt17(row[i]);
    }
    out += line;
    out += '\n';
  }
  return out;
}

std::string render_json_table(const ScenarioConfig& cfg, const Table& t) {
  ordered_json j = envelope(cfg);
  j["columns"] = t.columns;
  ordered_json rows = ordered_json::array();
  for (const auto& row : t.rows) {
    ordered_json r = ordered_json::array();
    for (double v : row) r.push_back(json_num(v));
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

// Writes every table and report plus manifest.json; returns the file names.
std::vector<std::string> write_all(const ScenarioConfig& cfg,
                                   const Artifacts& art) {
  const fs::path dir = cfg.output.path.empty() ? fs::path(".")
                                               : fs::path(cfg.output.path);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create output directory '" + dir.generic_string() +
                  "': " + ec.message());
  std::vector<std::string> files;
  const bool csv = cfg.output.format == "csv";
  for (const auto& t : art.tables) {
    const std::string name = t.stem + (csv ? ".csv" : ".json");
    write_text(dir / name, csv ? render_csv(cfg, t) : render_json_table(cfg, t));
    files.push_back(name);
  }
  for (const auto& [stem, payload] : art.reports) {
    ordered_json j = envelope(cfg);
    for (const auto& [k, v] : payload.items()) j[k] = v;
    write_text(dir / (stem + ".json"), j.dump(2) + "\n");
    files.push_back(stem + ".json");
  }
  ordered_json manifest = envelope(cfg);
  manifest["output"] = ordered_json{{"format", cfg.output.format}};
  files.push_back("manifest.json");
  manifest["files"] = files;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  for (const auto& f : files)
    std::cout << "wrote " << (dir / f).generic_string() << "\n";
  return files;
}

// ---------------------------------------------------------------------------
// Worker pool: independent rows, deterministic gather by index.

template <typename Fn>
void parallel_rows(size_t count, int jobs, Fn&& fn) {
  if (count == 0) return;
  unsigned workers = jobs > 0 ? static_cast<unsigned>(jobs)
                              : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<size_t>(workers, count));
  if (workers <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr error;
  auto body = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

void report_warnings(const WarningSink& sink) {
  for (const auto& w : sink) std::cerr << "warning: " << w << "\n";
}

// ---------------------------------------------------------------------------
// Scenario runners.

Artifacts run_fidelity_scan(const ScenarioConfig& cfg) {
  const std::vector<double>& svals =
      (cfg.sweep.param == "s" && cfg.sweep.has_values) ? cfg.sweep.values
                                                       : cfg.scenario.s;
  Table t{"fidelity_scan", {"s", "peak_fidelity"}, {}};
  t.rows.resize(svals.size());
  parallel_rows(svals.size(), cfg.jobs, [&](size_t i) {
    TransferOptions o;
    o.dim = cfg.numerics.fock_dim;
    if (cfg.numerics.time_samples > 0)
      o.samples_per_period = cfg.numerics.time_samples;
    const auto rows = fidelity_scan({svals[i]}, cfg.params, o);
    t.rows[i] = {svals[i], rows.at(0).second};
  });
  return {{std::move(t)}, {}};
}

Artifacts run_fock_ladder(const ScenarioConfig& cfg) {
  WarningSink sink;
  LadderOptions o;
  o.dim = cfg.numerics.fock_dim;
  o.warnings = &sink;
  const ProtocolResult r = fock_ladder(cfg.scenario.n_max, cfg.params, o);
  report_warnings(sink);
  Table t{"fock_ladder", {"n", "step_duration_s", "cumulative_time_s",
                          "fidelity"}, {}};
  for (int i = 1; i <= cfg.scenario.n_max; ++i) {
    const auto step = r.summary.find("step_" + std::to_string(i) + "_s");
    if (step == r.summary.end() ||
        r.fidelity_series.size() < static_cast<size_t>(i))
      throw std::runtime_error("fock-ladder: missing step " +
                               std::to_string(i));
    const auto& [t_cum, fid] = r.fidelity_series[i - 1];
    t.rows.push_back({double(i), step->second, t_cum, fid});
  }
  ordered_json summary;
  for (const auto& [k, v] : r.summary) summary[k] = json_num(v);
  Artifacts art;
  art.tables.push_back(std::move(t));
  art.reports.emplace_back("fock_ladder_summary",
                           ordered_json{{"summary", std::move(summary)}});
  return art;
}

Artifacts run_qnd(const ScenarioConfig& cfg) {
  const int n = cfg.scenario.n < 0 ? 1 : cfg.scenario.n;
  double hold = cfg.scenario.hold_time;
  if (hold <= 0.0) {
    const DerivedParams d = derive(cfg.params);
    if (d.chi == 0.0)
      throw std::runtime_error(
          "qnd: dispersive rate chi is zero for this parameter set; "
          "set scenario.hold_time explicitly");
    hold = constants::pi / (2.0 * std::abs(d.chi));
  }
  WarningSink sink;
  QndOptions o;
  o.dim = cfg.numerics.fock_dim;
  if (cfg.numerics.time_samples > 0) o.samples = cfg.numerics.time_samples;
  o.warnings = &sink;
  const QndResult r = qnd_phase(n, hold, cfg.params, o);
  report_warnings(sink);
  Table t{"qnd_phase", {"t_s", "phase_rad"}, {}};
  for (const auto& [time, phase] : r.phase_series)
    t.rows.push_back({time, phase});
  ordered_json rep;
  rep["n"] = n;
  rep["hold_time_s"] = json_num(hold);
  rep["chi_rad_s"] = json_num(r.chi);
  rep["rate_fit_rad_s"] = json_num(r.rate_fit);
  rep["expected_rate_rad_s"] = json_num(2.0 * r.chi * n);
  rep["phase_end_rad"] = json_num(r.phase);
  rep["full_model_deviation_rad"] = json_num(r.full_model_deviation);
  Artifacts art;
  art.tables.push_back(std::move(t));
  art.reports.emplace_back("qnd_summary", std::move(rep));
  return art;
}

CatOptions cat_options(const ScenarioConfig& cfg, WarningSink* sink) {
  CatOptions c;
  c.sign = cfg.scenario.sign;
  c.dim = cfg.numerics.fock_dim;
  c.grid_points = cfg.numerics.grid_points;
  c.grid_extent = cfg.numerics.grid_extent;
  if (cfg.numerics.time_samples > 0)
    c.trace_samples = cfg.numerics.time_samples;
  c.warnings = sink;
  return c;
}

Table density_table(const std::string& stem, const GridSpec& grid,
                    const Eigen::VectorXd& density) {
  Table t{stem, {"z_nm", "density_per_nm"}, {}};
  t.rows.reserve(static_cast<size_t>(grid.n_points));
  for (int j = 0; j < grid.n_points; ++j)
    t.rows.push_back({grid.z(j) * 1e9, density[j] * 1e-9});
  return t;
}

Artifacts run_cat(const ScenarioConfig& cfg) {
  const int n = std::max(cfg.scenario.n, 0);
  WarningSink sink;
  const ProtocolResult r = cat_pipeline(n, cfg.params, cat_options(cfg, &sink));
  report_warnings(sink);
  if (!r.grid.has_value())
    throw std::runtime_error("cat: pipeline returned no grid wavefunction");
  Artifacts art;
  art.tables.push_back(
      density_table("cat_density", r.grid->grid, r.grid->density()));
  Table sep{"cat_separation", {"t_s", "separation_m"}, {}};
  for (const auto& [time, s] : r.trace) sep.rows.push_back({time, s});
  art.tables.push_back(std::move(sep));
  ordered_json summary;
  for (const auto& [k, v] : r.summary) summary[k] = json_num(v);
  art.reports.emplace_back("cat_summary",
                           ordered_json{{"n", n}, {"summary", std::move(summary)}});
  return art;
}

Artifacts run_interference(const ScenarioConfig& cfg) {
  const int n = std::max(cfg.scenario.n, 0);
  WarningSink sink;
  const ProtocolResult r = cat_pipeline(n, cfg.params, cat_options(cfg, &sink));
  if (!r.grid.has_value())
    throw std::runtime_error("interference: pipeline returned no grid state");
  PatternOptions po;
  po.warnings = &sink;
  const FringeReport f = pattern(*r.grid, cfg.params.flight_time, po);
  report_warnings(sink);
  Artifacts art;
  art.tables.push_back(density_table("fringe_density", f.grid, f.density));
  ordered_json rep;
  rep["n"] = n;
  rep["sign"] = cfg.scenario.sign;
  rep["flight_time_s"] = json_num(cfg.params.flight_time);
  rep["period_measured_m"] = json_num(f.period_measured);
  rep["period_predicted_m"] = json_num(f.period_predicted);
  rep["visibility"] = json_num(f.visibility);
  rep["far_field_period_m"] = json_num(derive(cfg.params).fringe_period);
  const auto sep = r.summary.find("separation_m");
  if (sep != r.summary.end()) rep["separation_m"] = json_num(sep->second);
  const auto dim = r.summary.find("fock_dim");
  if (dim != r.summary.end()) rep["fock_dim"] = dim->second;
  art.reports.emplace_back("interference_summary", std::move(rep));
  return art;
}

Artifacts run_thermal(const ScenarioConfig& cfg) {
  const std::vector<double>& nbars =
      (cfg.sweep.param == "nbar" && cfg.sweep.has_values) ? cfg.sweep.values
                                                          : cfg.scenario.nbar;
  ThermalOptions base;
  base.sign = cfg.scenario.sign;
  base.grid_points = cfg.numerics.grid_points;
  base.grid_extent = cfg.numerics.grid_extent;
  base.dim = cfg.numerics.fock_dim;
  std::vector<FringeReport> reports(nbars.size());
  std::vector<WarningSink> sinks(nbars.size());
  parallel_rows(nbars.size(), cfg.jobs, [&](size_t i) {
    ThermalOptions o = base;
    o.warnings = &sinks[i];
    reports[i] = thermal_pattern(nbars[i], cfg.params, cfg.params.flight_time, o);
  });
  for (const auto& sink : sinks) report_warnings(sink);

  Table dens{"thermal_densities", {"z_nm"}, {}};
  for (double nb : nbars)
    dens.columns.push_back(std::string("density_per_nm_nbar_") + fmt_short(nb));
  if (!reports.empty()) {
    const GridSpec& grid = reports.front().grid;
    dens.rows.reserve(static_cast<size_t>(grid.n_points));
    for (int j = 0; j < grid.n_points; ++j) {
      std::vector<double> row{grid.z(j) * 1e9};
      for (const auto& rep : reports) row.push_back(rep.density[j] * 1e-9);
      dens.rows.push_back(std::move(row));
    }
  }
  Table summary{"thermal_summary",
                {"nbar", "period_measured_m", "period_predicted_m",
                 "visibility"}, {}};
  for (size_t i = 0; i < nbars.size(); ++i)
    summary.rows.push_back({nbars[i], reports[i].period_measured,
                            reports[i].period_predicted,
                            reports[i].visibility});
  Artifacts art;
  art.tables.push_back(std::move(dens));
  art.tables.push_back(std::move(summary));
  return art;
}

Artifacts run_decoherence(const ScenarioConfig& cfg) {
  WarningSink sink;
  const DecoherenceReport rep = feasibility_report(cfg.params, &sink);
  report_warnings(sink);
  ordered_json j;
  j["mean_velocity_m_s"] = json_num(rep.mean_velocity);
  j["gamma_gas_hz"] = json_num(rep.gamma_gas);
  j["gamma_bb_hz"] = json_num(rep.gamma_bb);
  ordered_json budget = ordered_json::array();
  for (const auto& b : rep.budget)
    budget.push_back(ordered_json{{"name", b.name},
                                  {"value", json_num(b.value)},
                                  {"pass", b.pass},
                                  {"note", b.note}});
  j["budget"] = std::move(budget);
  j["annotations"] = rep.annotations;
  Artifacts art;
  art.reports.emplace_back("decoherence", std::move(j));
  return art;
}

Artifacts run_sweep_dm(const ScenarioConfig& cfg) {
  const std::string& axis = cfg.sweep.param;
  const std::string col0 = axis == "G"          ? "gradient_t_per_m"
                           : axis == "omega_m2" ? "trap_hz_2"
                                                : "diameter_m";
  Table t{"sweep_dm",
          {col0, "d_m_m", "a2_m", "lambda2_rad_s", "separation_over_width",
           "splitting_rad_s"}, {}};
  t.rows.resize(cfg.sweep.values.size());
  parallel_rows(cfg.sweep.values.size(), cfg.jobs, [&](size_t i) {
    const double v = cfg.sweep.values[i];
    ExperimentParams p = cfg.params;
    if (axis == "G")
      p.gradient = v;
    else if (axis == "omega_m2")
      p.omega_m2 = constants::angular(v);
    else
      p.diameter = v;
    const DerivedParams d = derive(p);
    t.rows[i] = {v, d.d_m, d.a2, d.lambda2,
                 d.a2 > 0.0 ? d.d_m / d.a2 : 0.0, d.splitting};
  });
  return {{std::move(t)}, {}};
}

Artifacts run_scenario(const ScenarioConfig& cfg) {
  const std::string& ex = cfg.experiment;
  if (ex == "fidelity-scan") return run_fidelity_scan(cfg);
  if (ex == "fock-ladder") return run_fock_ladder(cfg);
  if (ex == "qnd") return run_qnd(cfg);
  if (ex == "cat") return run_cat(cfg);
  if (ex == "interference") return run_interference(cfg);
  if (ex == "thermal") return run_thermal(cfg);
  if (ex == "decoherence") return run_decoherence(cfg);
  if (ex == "sweep-Dm") return run_sweep_dm(cfg);
  throw ConfigError("experiment: unknown scenario '" + ex + "'");
}

} // namespace

} // namespace levsim::cli

namespace levsim {

int cli_main(int argc, char** argv) {
  using cli::ConfigError;
  using cli::IoError;
  std::setlocale(LC_NUMERIC, "C");

  CLI::App app{
      "levsim: levitated-nanodiamond spin-optomechanics simulator.\n"
      "Runs named scenarios from flat key = value config files, with flag\n"
      "overrides (flags > file > defaults), and writes deterministic\n"
      "CSV/JSON artifacts plus a manifest.json."};
  app.footer(cli::schema_help());
  app.require_subcommand(1);

  struct Flags {
    std::string config, experiment, out, format, n, n_max, sign, hold_time,
        nbar, svals, fock_dim, grid_points, grid_extent, time_samples, param,
        values;
    std::vector<std::string> sets;
    int jobs = 0;
  } flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "config file to load first");
    sub->add_option_function<std::string>(
           "--set",
           [&](const std::string& kv) { flags.sets.push_back(kv); },
           "override any config key: --set section.key=value (repeatable)")
        ->take_all();
    sub->add_option("--out", flags.out, "output directory (wins over LEVSIM_OUT)");
    sub->add_option("--format", flags.format, "table format: csv | json");
    sub->add_option("--n", flags.n, "phonon number (cat/interference/qnd)");
    sub->add_option("--n-max", flags.n_max, "fock-ladder target");
    sub->add_option("--sign", flags.sign, "branch recombination sign: + | -");
    sub->add_option("--hold-time", flags.hold_time, "qnd hold time [s]");
    sub->add_option("--nbar", flags.nbar, "thermal occupations, comma list");
    sub->add_option("--s-values", flags.svals, "fidelity-scan ratios, comma list");
    sub->add_option("--fock-dim", flags.fock_dim, "Fock truncation (0 = auto)");
    sub->add_option("--grid-points", flags.grid_points, "grid points (power of two)");
    sub->add_option("--grid-extent", flags.grid_extent, "grid full width [m]");
    sub->add_option("--time-samples", flags.time_samples, "trace samples (0 = default)");
    sub->add_option("--jobs", flags.jobs, "sweep worker threads (default: cores)");
  };

  CLI::App* run = app.add_subcommand("run", "run one scenario");
  run->add_option("experiment", flags.experiment,
                  "scenario name (optional when --config provides it)");
  add_common(run);

  CLI::App* sweep = app.add_subcommand(
      "sweep", "run a parameter sweep (axis: G | omega_m2 | d | nbar | s)");
  sweep->add_option("--param", flags.param, "sweep axis")->required();
  sweep->add_option("--values", flags.values,
                    "axis values, comma list; empty string = empty table");
  add_common(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* sub = run->parsed() ? run : sweep;
  cli::ScenarioConfig cfg;
  try {
    if (!flags.config.empty()) {
      std::ifstream in(flags.config, std::ios::binary);
      if (!in) {
        std::cerr << "error: cannot read config file: " << flags.config << "\n";
        return 4;
      }
      std::ostringstream text;
      text << in.rdbuf();
      cli::parse_config_text(cfg, text.str(), flags.config);
    }
    for (const std::string& kv : flags.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw ConfigError("--set: expected key=value, got '" + kv + "'");
      cli::apply_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    const std::pair<const char*, const std::string*> named[] = {
        {"output.path", &flags.out},
        {"output.format", &flags.format},
        {"scenario.n", &flags.n},
        {"scenario.n_max", &flags.n_max},
        {"scenario.sign", &flags.sign},
        {"scenario.hold_time", &flags.hold_time},
        {"scenario.nbar", &flags.nbar},
        {"scenario.s", &flags.svals},
        {"numerics.fock_dim", &flags.fock_dim},
        {"numerics.grid_points", &flags.grid_points},
        {"numerics.grid_extent", &flags.grid_extent},
        {"numerics.time_samples", &flags.time_samples},
    };
    const char* flag_names[] = {"--out",       "--format",     "--n",
                                "--n-max",     "--sign",       "--hold-time",
                                "--nbar",      "--s-values",   "--fock-dim",
                                "--grid-points", "--grid-extent",
                                "--time-samples"};
    for (size_t i = 0; i < std::size(named); ++i)
      if (sub->count(flag_names[i]))
        cli::apply_key(cfg, named[i].first, *named[i].second);
    if (run->parsed() && !flags.experiment.empty())
      cli::apply_key(cfg, "experiment", flags.experiment);
    if (sweep->parsed()) {
      cli::apply_key(cfg, "sweep.param", flags.param);
      if (sweep->count("--values"))
        cli::apply_key(cfg, "sweep.values", flags.values);
      if (cfg.experiment.empty()) {
        const std::string& p = cfg.sweep.param;
        cli::apply_key(cfg, "experiment",
                       p == "nbar" ? "thermal"
                       : p == "s"  ? "fidelity-scan"
                                   : "sweep-Dm");
      }
    }
    const bool out_flagged =
        sub->count("--out") ||
        std::any_of(flags.sets.begin(), flags.sets.end(), [](const auto& kv) {
          return kv.rfind("output.path=", 0) == 0;
        });
    // Precedence for the output directory: flag > LEVSIM_OUT > file > ".".
    if (!out_flagged) {
      if (const char* env = std::getenv("LEVSIM_OUT"); env && *env)
        cfg.output.path = env;
    }
    if (sub->count("--jobs")) cfg.jobs = flags.jobs;
    cli::validate_config(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    const cli::Artifacts art = cli::run_scenario(cfg);
    cli::write_all(cfg, art);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: numeric failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

} // namespace levsim
