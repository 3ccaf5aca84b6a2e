#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "photonlock/analysis.hpp"
#include "photonlock/config.hpp"
#include "photonlock/counting.hpp"
#include "photonlock/phase_noise.hpp"
#include "photonlock/protocols.hpp"

namespace photonlock {

inline constexpr int kResultSchemaVersion = 1;
inline constexpr double kPhaseHistogramBin = 0.02;  // rad

/// Sampled retrieved phase of a long stabilization run.
struct PhaseSample {
  double time;
  double retrieved_phase;
  bool stabilized;
};

struct NamedHistogram {
  std::string name;
  Histogram histogram;
};

/// Self-describing outcome of one experiment.
///
/// `metrics` always holds the kind's headline values:
///   long_term_stab  sigma_rad, sigma_unstabilized_rad, skewness, gaussian_fit_sigma_rad, ...
///   fringe_bs       visibility_c, visibility_d, antiphase_error_rad, offset_c/_d (+ _se), ...
///   fringe_cpa      visibility_c, visibility_d, visibility_combined, relative_shift_rad, ...
///   switching       car_mean, ctr_mean, car_sd, ctr_sd, switching_visibility, *_gof_p, ...
struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::fringe_bs;
  std::uint64_t seed = 0;
  RunConfig config;  ///< resolved configuration; re-running it reproduces the result
  std::map<std::string, double> metrics;

  std::vector<TimedWindow> series;  ///< windowed counts (decimated for long runs)
  std::vector<PhaseSample> phase_series;
  std::vector<PsdBin> psd;
  std::vector<FringePoint> fringe;
  std::vector<SwitchingRecord> switching;
  std::vector<NamedHistogram> histograms;
  std::optional<FourPortDevice> device;  ///< four-port actually simulated

  double metric(const std::string& name) const;
};

/// Runs one experiment. Errors propagate with the experiment name prepended.
ExperimentResult run_experiment(ExperimentKind kind, const RunConfig& config);
inline ExperimentResult run_experiment(const RunConfig& config) {
  return run_experiment(config.experiment, config);
}

/// Mean heralded pairs and accidental coincidences per window that produce the
/// requested CTR and CAR coincidence means at the device's transmission (pi)
/// and absorption (0) points. Throws InfeasibleTarget when the device cannot
/// reach the requested contrast.
struct HeraldCalibration {
  double pairs_per_window;
  double accidental_mean;
};
HeraldCalibration calibrate_herald(const FourPortDevice& device, double ctr_mean, double car_mean,
                                   double heralding_efficiency);

/// JSON document with schema_version, config snapshot, metrics and tables.
std::string result_document(const ExperimentResult& result);

/// Writes result.json, resolved.cfg, windows.csv and the kind's CSV tables
/// into `dir` (created if needed). Returns the file names written. Throws
/// IoError when the directory or a file cannot be written.
std::vector<std::string> write_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace photonlock
