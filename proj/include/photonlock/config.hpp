#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "photonlock/control.hpp"
#include "photonlock/counting.hpp"
#include "photonlock/optics.hpp"
#include "photonlock/phase_noise.hpp"
#include "photonlock/protocols.hpp"

namespace photonlock {

enum class ExperimentKind { long_term_stab, fringe_bs, fringe_cpa, switching };

const char* to_string(ExperimentKind kind);
/// Throws InvalidArgument for an unknown name.
ExperimentKind parse_experiment_kind(std::string_view name);

enum class DeviceType { beamsplitter, four_port };

/// Everything needed to re-run an experiment bit-exactly.
///
/// The file format is flat `key = value` text with dotted section prefixes,
/// `#` comments and an optional `pi` suffix on angles (`0.1pi`, `pi/3`).
/// Every key has a default; the defaults follow the reference setup
/// (24 ms windows, 0.1 pi scan steps, 300 switching cycles).
struct RunConfig {
  ExperimentKind experiment = ExperimentKind::fringe_bs;
  std::uint64_t seed = 1;
  double window_length = kDefaultWindowLength;

  PhaseNoiseSpec noise;       ///< noise.seed is derived from `seed`
  double initial_phase = 0.7; ///< static arm imbalance, rad

  DeviceType device_type = DeviceType::beamsplitter;
  /// Exactly one of these is set for a four-port device, neither for the
  /// lossless splitter.
  std::optional<FourPortDevice> device;
  std::optional<DeviceTargets> device_targets;

  double mean_photons = 1000.0;  ///< laser photons per window at the device
  double dark_counts = 0.0;      ///< per detector per window
  double herald_efficiency = 0.5;

  ControllerConfig controller;  ///< mode follows device_type
  LoopOptions loop;
  ScanPlan scan;

  double stab_duration = 3600.0;         ///< s, stabilized run
  double unstabilized_duration = 3600.0; ///< s, frozen-modulator reference run (0 = skip)
  int record_decimation = 416;           ///< keep every n-th window in the series (~10 s)
  double psd_duration = 600.0;           ///< s of open-loop noise for the spectrum (0 = skip)

  int switching_cycles = 300;
  int stabilize_windows = 10;  ///< feedback windows before each switching measurement
  double ctr_mean = 8.0;       ///< calibrated mean coincidences, transmission regime
  double car_mean = 1.0;       ///< calibrated mean coincidences, absorption regime

  std::string output_dir;  ///< empty: chosen by the caller

  /// Default configuration for an experiment kind.
  static RunConfig defaults(ExperimentKind kind);

  /// Throws ConfigError naming the first offending key.
  void validate() const;

  /// The output device the plant uses (fit targets resolved).
  OutputDevice resolved_device() const;

  /// Seeds for independent random streams.
  std::uint64_t noise_seed() const;
  std::uint64_t counting_seed() const;
  std::uint64_t psd_seed() const;

  bool operator==(const RunConfig&) const = default;
};

/// Parses and validates config text.
/// Throws ConfigError (with line numbers for syntax problems).
RunConfig parse_config_text(std::string_view text);

/// Reads, parses and validates a config file. A missing or unreadable file is
/// a ConfigError.
RunConfig parse_config(const std::filesystem::path& path);

/// Canonical text with every key; parse_config_text(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

}  // namespace photonlock
