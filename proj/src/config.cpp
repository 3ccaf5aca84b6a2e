#include "photonlock/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <vector>

#include "photonlock/error.hpp"
#include "photonlock/experiments.hpp"
#include "photonlock/format.hpp"
#include "photonlock/rng.hpp"

namespace photonlock {
namespace {

constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kCountingStream = 2;
constexpr std::uint64_t kPsdStream = 3;

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_plain_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

/// Number with an optional pi factor: `0.1pi`, `0.1*pi`, `-pi`, `pi/3`.
double parse_number(const std::string& key, std::string_view text, int line) {
  const std::string_view s = trim(text);
  double value = 0.0;
  if (parse_plain_double(s, value)) return value;
  const auto pos = s.find("pi");
  if (pos != std::string_view::npos) {
    std::string_view factor = trim(s.substr(0, pos));
    std::string_view divisor = trim(s.substr(pos + 2));
    if (!factor.empty() && factor.back() == '*') factor = trim(factor.substr(0, factor.size() - 1));
    double f = 1.0;
    bool ok = true;
    if (factor == "-") {
      f = -1.0;
    } else if (!factor.empty() && factor != "+") {
      ok = parse_plain_double(factor, f);
    }
    double d = 1.0;
    if (ok && !divisor.empty()) {
      ok = divisor.front() == '/' && parse_plain_double(trim(divisor.substr(1)), d) && d != 0.0;
    }
    if (ok) return f * std::numbers::pi / d;
  }
  throw ConfigError(key, "expected a number, got '" + std::string(s) + "'", line);
}

std::int64_t parse_integer(const std::string& key, std::string_view text, int line) {
  std::string_view s = trim(text);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  std::int64_t value = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ConfigError(key, "expected an integer, got '" + std::string(trim(text)) + "'", line);
  }
  return value;
}

int parse_int(const std::string& key, std::string_view text, int line) {
  const auto v = parse_integer(key, text, line);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError(key, "integer out of range", line);
  }
  return static_cast<int>(v);
}

std::uint64_t parse_seed(const std::string& key, std::string_view text, int line) {
  const std::string_view s = trim(text);
  std::uint64_t value = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + std::string(s) + "'", line);
  }
  return value;
}

bool parse_bool(const std::string& key, std::string_view text, int line) {
  const auto s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + std::string(s) + "'", line);
}

/// A config key: how to read it into a RunConfig and how to print it back.
/// `present` decides whether serialization emits it (device keys depend on the
/// chosen specification path).
struct KeySpec {
  std::string key;
  std::function<void(RunConfig&, std::string_view, int)> set;
  std::function<std::string(const RunConfig&)> get;
  std::function<bool(const RunConfig&)> present = [](const RunConfig&) { return true; };
};

FourPortDevice& explicit_device(RunConfig& c) {
  if (!c.device) c.device = FourPortDevice::ideal_cpa();
  return *c.device;
}

DeviceTargets& fit_targets(RunConfig& c) {
  if (!c.device_targets) c.device_targets = DeviceTargets{};
  return *c.device_targets;
}

#define PL_DOUBLE(KEY, FIELD)                                                                  \
  KeySpec {                                                                                    \
    KEY, [](RunConfig& c, std::string_view v, int l) { c.FIELD = parse_number(KEY, v, l); },   \
        [](const RunConfig& c) { return format_double(c.FIELD); }                              \
  }
#define PL_INT(KEY, FIELD)                                                                     \
  KeySpec {                                                                                    \
    KEY, [](RunConfig& c, std::string_view v, int l) { c.FIELD = parse_int(KEY, v, l); },      \
        [](const RunConfig& c) { return format_int(c.FIELD); }                                 \
  }

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = [] {
    const auto has_explicit = [](const RunConfig& c) { return c.device.has_value(); };
    const auto has_targets = [](const RunConfig& c) { return c.device_targets.has_value(); };
    std::vector<KeySpec> t;
    t.push_back({"experiment",
                 [](RunConfig& c, std::string_view v, int l) {
                   try {
                     c.experiment = parse_experiment_kind(trim(v));
                   } catch (const InvalidArgument& e) {
                     throw ConfigError("experiment", e.what(), l);
                   }
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.experiment)); }});
    t.push_back({"seed", [](RunConfig& c, std::string_view v, int l) { c.seed = parse_seed("seed", v, l); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    t.push_back(PL_DOUBLE("window_s", window_length));
    t.push_back(PL_DOUBLE("noise.cutoff_hz", noise.cutoff_frequency));
    t.push_back(PL_DOUBLE("noise.fast_rms", noise.fast_rms));
    t.push_back(PL_DOUBLE("noise.drift_rate", noise.drift_rate));
    t.push_back(PL_DOUBLE("plant.initial_phase", initial_phase));
    t.push_back({"device.type",
                 [](RunConfig& c, std::string_view v, int l) {
                   const auto s = trim(v);
                   if (s == "beamsplitter") {
                     c.device_type = DeviceType::beamsplitter;
                   } else if (s == "four_port") {
                     c.device_type = DeviceType::four_port;
                   } else {
                     throw ConfigError("device.type",
                                       "expected beamsplitter or four_port, got '" + std::string(s) + "'", l);
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.device_type == DeviceType::beamsplitter ? "beamsplitter" : "four_port");
                 }});
    const auto device_double = [&](const char* key, auto member) {
      return KeySpec{key,
                     [key, member](RunConfig& c, std::string_view v, int l) {
                       member(explicit_device(c)) = parse_number(key, v, l);
                     },
                     [member](const RunConfig& c) {
                       auto d = *c.device;
                       return format_double(member(d));
                     },
                     has_explicit};
    };
    // std::complex exposes its parts through reinterpret-as-array access.
    t.push_back(device_double("device.t_re", [](FourPortDevice& d) -> double& { return reinterpret_cast<double(&)[2]>(d.t)[0]; }));
    t.push_back(device_double("device.t_im", [](FourPortDevice& d) -> double& { return reinterpret_cast<double(&)[2]>(d.t)[1]; }));
    t.push_back(device_double("device.r_re", [](FourPortDevice& d) -> double& { return reinterpret_cast<double(&)[2]>(d.r)[0]; }));
    t.push_back(device_double("device.r_im", [](FourPortDevice& d) -> double& { return reinterpret_cast<double(&)[2]>(d.r)[1]; }));
    t.push_back(device_double("device.background_c", [](FourPortDevice& d) -> double& { return d.background_c; }));
    t.push_back(device_double("device.background_d", [](FourPortDevice& d) -> double& { return d.background_d; }));
    const auto target_double = [&](const char* key, double DeviceTargets::*member) {
      return KeySpec{key,
                     [key, member](RunConfig& c, std::string_view v, int l) {
                       fit_targets(c).*member = parse_number(key, v, l);
                     },
                     [member](const RunConfig& c) { return format_double((*c.device_targets).*member); },
                     has_targets};
    };
    t.push_back(target_double("device.fit.visibility_c", &DeviceTargets::visibility_c));
    t.push_back(target_double("device.fit.visibility_d", &DeviceTargets::visibility_d));
    t.push_back(target_double("device.fit.relative_shift", &DeviceTargets::relative_shift));
    t.push_back(PL_DOUBLE("source.mean_photons", mean_photons));
    t.push_back(PL_DOUBLE("source.dark_counts", dark_counts));
    t.push_back(PL_DOUBLE("herald.efficiency", herald_efficiency));
    t.push_back(PL_DOUBLE("controller.setpoint_fraction", controller.setpoint_fraction));
    t.push_back(PL_DOUBLE("controller.gain", controller.gain));
    t.push_back({"controller.dead_band",
                 [](RunConfig& c, std::string_view v, int l) {
                   if (trim(v) == "auto") {
                     c.controller.dead_band.reset();
                   } else {
                     c.controller.dead_band = parse_number("controller.dead_band", v, l);
                   }
                 },
                 [](const RunConfig& c) {
                   return c.controller.dead_band ? format_double(*c.controller.dead_band) : std::string("auto");
                 }});
    t.push_back(PL_DOUBLE("controller.max_step", controller.max_step));
    t.push_back(PL_INT("controller.slope_sign", controller.slope_sign));
    t.push_back(PL_INT("controller.lock_loss_windows", controller.lock_loss_windows));
    t.push_back(PL_INT("calibration.scan_windows", loop.calibration_windows));
    t.push_back(PL_INT("calibration.max_lock_windows", loop.acquisition_max_windows));
    t.push_back(PL_INT("calibration.confirm_windows", loop.lock_confirm_windows));
    t.push_back(PL_DOUBLE("calibration.lock_tolerance", loop.lock_tolerance));
    t.push_back(PL_DOUBLE("scan.delta_phi", scan.delta_phi));
    t.push_back(PL_INT("scan.n_min", scan.n_min));
    t.push_back(PL_INT("scan.n_max", scan.n_max));
    t.push_back({"scan.restabilize",
                 [](RunConfig& c, std::string_view v, int l) {
                   c.scan.restabilize_between_points = parse_bool("scan.restabilize", v, l);
                 },
                 [](const RunConfig& c) { return std::string(c.scan.restabilize_between_points ? "true" : "false"); }});
    t.push_back(PL_INT("scan.relock_min_windows", scan.relock_min_windows));
    t.push_back(PL_INT("scan.relock_max_windows", scan.relock_max_windows));
    t.push_back(PL_DOUBLE("stab.duration_s", stab_duration));
    t.push_back(PL_DOUBLE("stab.unstabilized_s", unstabilized_duration));
    t.push_back(PL_INT("stab.record_decimation", record_decimation));
    t.push_back(PL_DOUBLE("stab.psd_duration_s", psd_duration));
    t.push_back(PL_INT("switching.cycles", switching_cycles));
    t.push_back(PL_INT("switching.stabilize_windows", stabilize_windows));
    t.push_back(PL_DOUBLE("switching.ctr_mean", ctr_mean));
    t.push_back(PL_DOUBLE("switching.car_mean", car_mean));
    t.push_back({"output.dir",
                 [](RunConfig& c, std::string_view v, int) { c.output_dir = std::string(trim(v)); },
                 [](const RunConfig& c) { return c.output_dir; },
                 [](const RunConfig& c) { return !c.output_dir.empty(); }});
    return t;
  }();
  return table;
}

#undef PL_DOUBLE
#undef PL_INT

const KeySpec* find_key(std::string_view key) {
  for (const auto& k : key_table()) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

void require(bool ok, const char* key, const std::string& message) {
  if (!ok) throw ConfigError(key, message);
}

}  // namespace

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::long_term_stab: return "long_term_stab";
    case ExperimentKind::fringe_bs: return "fringe_bs";
    case ExperimentKind::fringe_cpa: return "fringe_cpa";
    case ExperimentKind::switching: return "switching";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (auto k : {ExperimentKind::long_term_stab, ExperimentKind::fringe_bs, ExperimentKind::fringe_cpa,
                 ExperimentKind::switching}) {
    if (name == to_string(k)) return k;
  }
  throw InvalidArgument("unknown experiment '" + std::string(name) +
                        "' (expected long_term_stab, fringe_bs, fringe_cpa or switching)");
}

RunConfig RunConfig::defaults(ExperimentKind kind) {
  RunConfig c;
  c.experiment = kind;
  const bool four_port = kind == ExperimentKind::fringe_cpa || kind == ExperimentKind::switching;
  c.device_type = four_port ? DeviceType::four_port : DeviceType::beamsplitter;
  if (four_port) c.device = FourPortDevice::ideal_cpa();
  c.controller.mode = four_port ? ControlMode::cpa_combined : ControlMode::bs_midfringe;
  return c;
}

std::uint64_t RunConfig::noise_seed() const { return stream_seed(seed, kNoiseStream); }
std::uint64_t RunConfig::counting_seed() const { return stream_seed(seed, kCountingStream); }
std::uint64_t RunConfig::psd_seed() const { return stream_seed(seed, kPsdStream); }

OutputDevice RunConfig::resolved_device() const {
  if (device_type == DeviceType::beamsplitter) return LosslessBeamSplitter{};
  if (device_targets) return fit_imperfect_device(*device_targets);
  return device.value_or(FourPortDevice::ideal_cpa());
}

void RunConfig::validate() const {
  // Noise.
  require(noise.cutoff_frequency > 0.0, "noise.cutoff_hz", "must be > 0");
  require(noise.fast_rms >= 0.0, "noise.fast_rms", "must be >= 0");
  require(noise.drift_rate >= 0.0, "noise.drift_rate", "must be >= 0");
  require(window_length > 0.0, "window_s", "must be > 0");
  require(window_length <= 1.0 / (10.0 * noise.cutoff_frequency) * (1.0 + 1e-12), "window_s",
          "must resolve the noise band (window_s <= 1 / (10 noise.cutoff_hz))");

  // Device: exactly one specification path.
  if (device && device_targets) {
    throw ConfigError("device",
                      "explicit device parameters (device.t_re ... device.background_d) and fit targets "
                      "(device.fit.*) are mutually exclusive: give exactly one device specification");
  }
  if (device_type == DeviceType::beamsplitter) {
    require(!device && !device_targets, "device.type",
            "beamsplitter takes no four-port parameters; set device.type = four_port");
  } else {
    require(device.has_value() || device_targets.has_value(), "device",
            "four_port needs explicit parameters or fit targets");
  }
  if (device) {
    try {
      device->validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError("device", e.what());
    }
  }
  if (device_targets) {
    const auto& t = *device_targets;
    require(t.visibility_c > 0.0 && t.visibility_c <= 1.0, "device.fit.visibility_c", "must be in (0, 1]");
    require(t.visibility_d > 0.0 && t.visibility_d <= 1.0, "device.fit.visibility_d", "must be in (0, 1]");
    require(std::abs(t.relative_shift) < std::numbers::pi, "device.fit.relative_shift",
            "must lie strictly inside (-pi, pi)");
    try {
      (void)fit_imperfect_device(t);
    } catch (const Error& e) {
      throw ConfigError("device.fit", e.what());
    }
  }
  const bool four_port = device_type == DeviceType::four_port;
  if (experiment == ExperimentKind::fringe_cpa || experiment == ExperimentKind::switching) {
    require(four_port, "device.type", std::string(to_string(experiment)) + " needs device.type = four_port");
  }
  const auto expected_mode = four_port ? ControlMode::cpa_combined : ControlMode::bs_midfringe;
  require(controller.mode == expected_mode, "controller.mode", "does not match device.type");

  // Sources.
  require(mean_photons > 0.0, "source.mean_photons", "must be > 0");
  require(dark_counts >= 0.0, "source.dark_counts", "must be >= 0");
  require(herald_efficiency > 0.0 && herald_efficiency <= 1.0, "herald.efficiency", "must be in (0, 1]");

  // Controller.
  require(controller.setpoint_fraction > 0.0 && controller.setpoint_fraction < 1.0,
          "controller.setpoint_fraction", "must be in (0, 1)");
  require(controller.gain > 0.0, "controller.gain", "must be > 0");
  require(!controller.dead_band || *controller.dead_band >= 0.0, "controller.dead_band", "must be >= 0 or auto");
  require(controller.max_step > 0.0, "controller.max_step", "must be > 0");
  require(controller.slope_sign == 1 || controller.slope_sign == -1, "controller.slope_sign", "must be +1 or -1");
  require(controller.lock_loss_windows >= 1, "controller.lock_loss_windows", "must be >= 1");
  require(loop.calibration_windows >= 16, "calibration.scan_windows", "must be >= 16");
  require(loop.acquisition_max_windows >= 1, "calibration.max_lock_windows", "must be >= 1");
  require(loop.lock_confirm_windows >= 1, "calibration.confirm_windows", "must be >= 1");
  require(loop.lock_tolerance >= 0.0, "calibration.lock_tolerance", "must be >= 0");

  // Scan.
  require(scan.delta_phi > 0.0, "scan.delta_phi", "must be > 0");
  require(scan.n_max >= scan.n_min, "scan.n_max", "must be >= scan.n_min");
  require(scan.relock_min_windows >= 1, "scan.relock_min_windows", "must be >= 1");
  require(scan.relock_max_windows >= scan.relock_min_windows, "scan.relock_max_windows",
          "must be >= scan.relock_min_windows");
  if (experiment == ExperimentKind::fringe_bs || experiment == ExperimentKind::fringe_cpa) {
    require(scan.n_max - scan.n_min + 1 >= 8, "scan.n_max", "a fringe fit needs at least 8 scan points");
    require(scan.covers_full_fringe(), "scan.delta_phi",
            "(n_max - n_min) * delta_phi must cover a full 2 pi fringe");
  }

  // Durations.
  require(stab_duration > 0.0, "stab.duration_s", "must be > 0");
  require(unstabilized_duration >= 0.0, "stab.unstabilized_s", "must be >= 0");
  require(record_decimation >= 1, "stab.record_decimation", "must be >= 1");
  require(psd_duration == 0.0 || psd_duration >= 64.0 * window_length, "stab.psd_duration_s",
          "must be 0 or cover at least 64 windows");

  // Switching.
  require(switching_cycles >= 1, "switching.cycles", "must be >= 1");
  require(stabilize_windows >= 1, "switching.stabilize_windows", "must be >= 1");
  require(car_mean >= 0.0, "switching.car_mean", "must be >= 0");
  require(ctr_mean > car_mean, "switching.ctr_mean", "must exceed switching.car_mean");
  if (experiment == ExperimentKind::switching) {
    try {
      (void)calibrate_herald(std::get<FourPortDevice>(resolved_device()), ctr_mean, car_mean, herald_efficiency);
    } catch (const InfeasibleTarget& e) {
      throw ConfigError("switching.car_mean", e.what());
    }
  }
}

RunConfig parse_config_text(std::string_view text) {
  struct Entry {
    std::string value;
    int line;
  };
  std::map<std::string, Entry> entries;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    // A `#` starts a comment at the beginning of a line or after whitespace.
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '#' && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("", "expected 'key = value', got '" + std::string(line) + "'", line_no);
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("", "missing key before '='", line_no);
    if (!find_key(key)) throw ConfigError(key, "unknown key", line_no);
    if (value.empty()) throw ConfigError(key, "missing value", line_no);
    if (!entries.emplace(key, Entry{value, line_no}).second) {
      throw ConfigError(key, "duplicate key (first set on line " + std::to_string(entries[key].line) + ")",
                        line_no);
    }
  }

  // The experiment picks the defaults every other key overrides.
  ExperimentKind kind = ExperimentKind::fringe_bs;
  if (const auto it = entries.find("experiment"); it != entries.end()) {
    RunConfig probe;
    find_key("experiment")->set(probe, it->second.value, it->second.line);
    kind = probe.experiment;
  }
  RunConfig config = RunConfig::defaults(kind);
  const bool type_given = entries.count("device.type") > 0;
  bool explicit_given = false, targets_given = false;
  for (const auto& [key, entry] : entries) {
    explicit_given |= key.starts_with("device.") && !key.starts_with("device.fit.") && key != "device.type";
    targets_given |= key.starts_with("device.fit.");
  }
  if (type_given) {
    find_key("device.type")->set(config, entries["device.type"].value, entries["device.type"].line);
  } else if (explicit_given || targets_given) {
    config.device_type = DeviceType::four_port;
  }
  // Explicit parameters start from the ideal absorber; fit targets replace it.
  config.device.reset();
  config.device_targets.reset();
  if (config.device_type == DeviceType::four_port && !targets_given) config.device = FourPortDevice::ideal_cpa();
  for (const auto& spec : key_table()) {
    if (spec.key == "device.type") continue;
    const auto it = entries.find(spec.key);
    if (it != entries.end()) spec.set(config, it->second.value, it->second.line);
  }
  config.controller.mode =
      config.device_type == DeviceType::four_port ? ControlMode::cpa_combined : ControlMode::bs_midfringe;
  config.validate();
  return config;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& spec : key_table()) {
    if (!spec.present(config)) continue;
    out += spec.key;
    out += " = ";
    out += spec.get(config);
    out += '\n';
  }
  return out;
}

}  // namespace photonlock
