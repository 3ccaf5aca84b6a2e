#pragma once

#include <optional>
#include <span>

#include "photonlock/counting.hpp"

namespace photonlock {

enum class ControlMode {
  bs_midfringe,  ///< error signal n_c / N of a lossless splitter
  cpa_combined,  ///< error signal (n_c + n_d) / N of an absorber
};

struct ControllerConfig {
  ControlMode mode = ControlMode::bs_midfringe;
  double setpoint_fraction = 0.5;
  double gain = 1.0;  ///< rad per unit normalized error
  /// Normalized-error dead band; defaults to 1/sqrt(N) once N is calibrated.
  std::optional<double> dead_band;
  double max_step = 0.3;  ///< rad per window
  int slope_sign = +1;    ///< sign of d(fraction)/d(phase) at the setpoint
  int lock_loss_windows = 20;

  void validate() const;
  double resolved_dead_band(double calibrated_photons) const;

  bool operator==(const ControllerConfig&) const = default;
};

struct ControllerState {
  double phi_st = 0.0;           ///< stabilization point, rad
  double modulator_phase = 0.0;  ///< accumulated correction, wrapped to (-pi, pi]
  double calibrated_N = 0.0;     ///< photons per window
  int slope_sign = +1;
  int saturated_windows = 0;  ///< consecutive windows with a clamped correction

  bool calibrated() const { return calibrated_N > 0.0; }
  bool operator==(const ControllerState&) const = default;
};

/// Stabilization phase implied by the setpoint on the chosen slope.
double stabilization_phase(const ControllerConfig& cfg);

/// n_c / N (splitter) or (n_c + n_d) / N (absorber).
double observed_fraction(double n_c, double n_d, double photons, ControlMode mode);

/// Photon number per window from a scan covering at least one full fringe.
/// Splitter: mean(n_c + n_d). Absorber: maximum of the 5-window moving average
/// of n_c + n_d. `commanded_phase` must span >= 2 pi.
double calibrate_N(std::span<const CountWindow> scan, std::span<const double> commanded_phase,
                   ControlMode mode);

/// Phase retrieved from counts on the monotonic branch containing phi_st.
double phase_from_counts(double n_c, double n_d, const ControllerState& state, ControlMode mode);
double phase_from_counts(const CountWindow& window, const ControllerState& state, ControlMode mode);

/// One proportional update with dead band and step clamp.
ControllerState feedback_step(const CountWindow& window, const ControllerState& state,
                              const ControllerConfig& cfg);

/// Normalized error observed_fraction - setpoint for the calibrated state.
double normalized_error(const CountWindow& window, const ControllerState& state,
                        const ControllerConfig& cfg);

}  // namespace photonlock
