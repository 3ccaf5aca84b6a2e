#pragma once

#include <cstdint>
#include <vector>

#include "photonlock/control.hpp"
#include "photonlock/plant.hpp"

namespace photonlock {

/// What a window was used for. A window has exactly one role; only feedback
/// and acquisition windows actuate the modulator.
enum class WindowRole { calibration, acquisition, feedback, measurement, free_running };

const char* to_string(WindowRole role);

struct WindowRecord {
  std::int64_t index = 0;  ///< 0-based plant window index
  double time = 0.0;       ///< window start, s
  WindowRole role = WindowRole::feedback;
  double commanded_phase = 0.0;  ///< modulator phase applied during the window
  double device_phase = 0.0;     ///< ground-truth phase at the device
  double retrieved_phase = 0.0;  ///< from laser counts; NaN for heralded windows
  double error = 0.0;            ///< normalized error seen by the controller (feedback roles)
  double correction = 0.0;       ///< modulator change made after this window
  CountWindow counts;
};

struct LoopOptions {
  int calibration_windows = 100;  ///< windows in the 2 pi calibration ramp
  int acquisition_max_windows = 200;
  int lock_confirm_windows = 3;  ///< consecutive in-band windows to declare lock
  /// Normalized-error band for declaring lock after acquisition; the band is
  /// max(dead band, lock_tolerance) so that a narrow shot-noise dead band at
  /// high photon numbers does not make lock unattainable under phase jitter.
  double lock_tolerance = 0.05;

  bool operator==(const LoopOptions&) const = default;
};

/// Plant + controller advancing one window at a time.
class StabilizationLoop {
 public:
  StabilizationLoop(Plant& plant, ControllerConfig config, LoopOptions options = {});

  /// Scans the modulator over 2 pi, calibrates N, jumps to the setpoint
  /// crossing and runs feedback until locked. Throws LockLost on failure.
  void calibrate_and_lock();

  /// One feedback window.
  WindowRecord feedback_window();

  /// Feedback disabled; modulator at the locked value plus `offset` for one
  /// window. The controller state is untouched.
  WindowRecord measure(double offset, SourceKind source = SourceKind::attenuated_laser);

  /// Feedback disabled; modulator held at its current value.
  WindowRecord free_run_window();

  /// Feedback for at least `min_windows`, then until the error sits inside the
  /// dead band, giving up after `max_windows`. Returns windows used, or -1.
  int relock(int min_windows, int max_windows, std::vector<WindowRecord>* log = nullptr);

  bool lock_lost() const { return state_.saturated_windows >= config_.lock_loss_windows; }

  const ControllerState& state() const { return state_; }
  const ControllerConfig& config() const { return config_; }
  Plant& plant() { return plant_; }
  double dead_band() const { return config_.resolved_dead_band(state_.calibrated_N); }

  /// Windows spent in calibrate_and_lock so far.
  const std::vector<WindowRecord>& acquisition_log() const { return acquisition_log_; }

 private:
  WindowRecord acquire(WindowRole role, double commanded, SourceKind source);

  Plant& plant_;
  ControllerConfig config_;
  LoopOptions options_;
  ControllerState state_;
  std::vector<WindowRecord> acquisition_log_;
};

struct StabilizedRun {
  std::vector<WindowRecord> recorded;   ///< every record_decimation-th window
  std::vector<double> retrieved_phase;  ///< every window
  double sigma = 0.0;                   ///< rms of retrieved phase about phi_st
  std::int64_t windows = 0;
  std::int64_t lock_losses = 0;
};

/// One feedback step per window for `duration` seconds. With `feedback` false
/// the modulator is frozen (unstabilized reference run).
StabilizedRun run_stabilized(StabilizationLoop& loop, double duration, int record_decimation,
                             bool feedback = true);

struct ScanPlan {
  double delta_phi = 0.1 * 3.141592653589793;
  int n_min = -10;
  int n_max = 10;
  bool restabilize_between_points = true;
  int relock_min_windows = 5;
  int relock_max_windows = 50;

  void validate() const;
  std::vector<int> n_values() const;
  bool covers_full_fringe() const;

  bool operator==(const ScanPlan&) const = default;
};

struct FringePoint {
  int n = 0;
  double phi = 0.0;  ///< phi_st + n delta_phi
  std::int64_t n_c = 0;
  std::int64_t n_d = 0;
  bool lock_lost = false;  ///< re-lock after this point failed
  int relock_windows = 0;
};

struct FringeScanResult {
  std::vector<FringePoint> points;
  std::vector<WindowRecord> windows;
  std::int64_t lock_losses = 0;
};

/// Measures one window at each phi_st + n delta_phi with feedback disabled,
/// re-locking to phi_st between points when the plan asks for it.
FringeScanResult fringe_scan(const ScanPlan& plan, StabilizationLoop& loop);

enum class Regime { car, ctr };
const char* to_string(Regime regime);

struct SwitchingRecord {
  int cycle = 0;
  Regime regime = Regime::car;
  CountWindow counts;
  bool lock_lost = false;
  std::int64_t coincidences() const { return counts.coinc_ch + counts.coinc_dh; }
};

struct SwitchingRunResult {
  std::vector<SwitchingRecord> records;
  std::vector<WindowRecord> windows;
  std::int64_t lock_losses = 0;
};

/// For each of `cycles` cycles: stabilize, then measure heralded coincidences
/// once at the absorption point (phase 0) and, after re-stabilizing, once at
/// the transmission point (phase pi). Returns 2 * cycles records.
SwitchingRunResult switching_run(int cycles, int stabilize_windows, StabilizationLoop& loop);

}  // namespace photonlock
