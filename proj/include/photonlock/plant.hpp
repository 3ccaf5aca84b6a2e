#pragma once

#include <cstdint>
#include <optional>

#include "photonlock/counting.hpp"
#include "photonlock/optics.hpp"
#include "photonlock/phase_noise.hpp"
#include "photonlock/rng.hpp"

namespace photonlock {

struct PlantConfig {
  PhaseNoiseSpec noise;
  OutputDevice device = LosslessBeamSplitter{};
  SourceSpec laser;
  std::optional<SourceSpec> herald;
  double window_length = kDefaultWindowLength;
  double initial_phase = 0.0;      ///< static arm imbalance, rad
  std::uint64_t counting_seed = 0;
};

/// Noisy interferometer followed by the output device and detectors.
///
/// Device phase of window k = initial_phase + noise(t_k) + modulator, with the
/// noise sampled once per window (zero-order hold at the window start).
class Plant {
 public:
  explicit Plant(PlantConfig config);

  /// Acquires one window at the given modulator phase and advances time.
  CountWindow acquire(double modulator_phase, SourceKind source = SourceKind::attenuated_laser);

  /// Device phase of the last acquired window.
  double last_phase() const { return last_phase_; }
  std::int64_t windows_elapsed() const { return windows_; }
  double time() const { return static_cast<double>(windows_) * config_.window_length; }
  const PlantConfig& config() const { return config_; }

  /// Shifts the static arm imbalance, e.g. to inject a step disturbance.
  void perturb(double delta_phase) { config_.initial_phase += delta_phase; }

 private:
  PlantConfig config_;
  PhaseNoiseGenerator noise_;
  Rng rng_;
  std::int64_t windows_ = 0;
  double last_phase_ = 0.0;
};

}  // namespace photonlock
