#include "photonlock/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "photonlock/error.hpp"
#include "photonlock/kernels.hpp"

namespace photonlock {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kSmoothing = 5;

std::vector<double> smoothed(const std::vector<double>& v) {
  const std::size_t n = v.size(), half = kSmoothing / 2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t from = i >= half ? i - half : 0;
    const std::size_t to = std::min(n, i + half + 1);
    double sum = 0.0;
    for (std::size_t j = from; j < to; ++j) sum += v[j];
    out[i] = sum / static_cast<double>(to - from);
  }
  return out;
}

}  // namespace

const char* to_string(WindowRole role) {
  switch (role) {
    case WindowRole::calibration: return "calibration";
    case WindowRole::acquisition: return "acquisition";
    case WindowRole::feedback: return "feedback";
    case WindowRole::measurement: return "measurement";
    case WindowRole::free_running: return "free_running";
  }
  return "unknown";
}

const char* to_string(Regime regime) { return regime == Regime::car ? "CAR" : "CTR"; }

StabilizationLoop::StabilizationLoop(Plant& plant, ControllerConfig config, LoopOptions options)
    : plant_(plant), config_(config), options_(options) {
  config_.validate();
  if (options_.calibration_windows < 8) throw InvalidArgument("calibration scan is too short");
  if (options_.acquisition_max_windows < 1 || options_.lock_confirm_windows < 1) {
    throw InvalidArgument("lock acquisition window counts must be >= 1");
  }
  if (!(options_.lock_tolerance >= 0.0)) throw InvalidArgument("lock_tolerance must be >= 0");
  state_.slope_sign = config_.slope_sign;
  state_.phi_st = stabilization_phase(config_);
}

WindowRecord StabilizationLoop::acquire(WindowRole role, double commanded, SourceKind source) {
  WindowRecord rec;
  rec.index = plant_.windows_elapsed();
  rec.time = plant_.time();
  rec.role = role;
  rec.commanded_phase = wrap_phase(commanded);
  rec.counts = plant_.acquire(rec.commanded_phase, source);
  rec.device_phase = plant_.last_phase();
  rec.retrieved_phase = source == SourceKind::attenuated_laser && state_.calibrated()
                            ? phase_from_counts(rec.counts, state_, config_.mode)
                            : std::numeric_limits<double>::quiet_NaN();
  return rec;
}

void StabilizationLoop::calibrate_and_lock() {
  const int m = options_.calibration_windows;
  const double base = state_.modulator_phase;
  std::vector<CountWindow> scan;
  std::vector<double> commanded;
  scan.reserve(m + 1);
  commanded.reserve(m + 1);
  for (int k = 0; k <= m; ++k) {
    const double phase = base + kTwoPi * k / m;
    WindowRecord rec = acquire(WindowRole::calibration, phase, SourceKind::attenuated_laser);
    scan.push_back(rec.counts);
    commanded.push_back(phase);
    acquisition_log_.push_back(rec);
  }

  state_.calibrated_N = calibrate_N(scan, commanded, config_.mode);
  state_.slope_sign = config_.slope_sign;
  state_.phi_st = stabilization_phase(config_);
  state_.saturated_windows = 0;

  std::vector<double> fraction(scan.size());
  for (std::size_t i = 0; i < scan.size(); ++i) {
    fraction[i] = observed_fraction(static_cast<double>(scan[i].n_c),
                                    static_cast<double>(scan[i].n_d), state_.calibrated_N,
                                    config_.mode);
  }
  fraction = smoothed(fraction);

  // Commanded phase where the smoothed fraction crosses the setpoint on the
  // requested slope; nearest point when no clean crossing exists.
  const double sp = config_.setpoint_fraction;
  double target = commanded.front();
  bool found = false;
  for (std::size_t k = 0; k + 1 < fraction.size() && !found; ++k) {
    const double a = fraction[k] - sp, b = fraction[k + 1] - sp;
    const bool rising = a < 0.0 && b >= 0.0;
    const bool falling = a > 0.0 && b <= 0.0;
    if ((config_.slope_sign > 0 && rising) || (config_.slope_sign < 0 && falling)) {
      const double t = a / (a - b);
      target = commanded[k] + t * (commanded[k + 1] - commanded[k]);
      found = true;
    }
  }
  if (!found) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < fraction.size(); ++k) {
      if (std::abs(fraction[k] - sp) < best) {
        best = std::abs(fraction[k] - sp);
        target = commanded[k];
      }
    }
  }
  state_.modulator_phase = wrap_phase(target);

  const double band = std::max(dead_band(), options_.lock_tolerance);
  int in_band = 0;
  for (int i = 0; i < options_.acquisition_max_windows; ++i) {
    WindowRecord rec = acquire(WindowRole::acquisition, state_.modulator_phase,
                               SourceKind::attenuated_laser);
    rec.error = normalized_error(rec.counts, state_, config_);
    const ControllerState next = feedback_step(rec.counts, state_, config_);
    rec.correction = wrap_phase(next.modulator_phase - state_.modulator_phase);
    state_ = next;
    acquisition_log_.push_back(rec);
    in_band = std::abs(rec.error) <= band ? in_band + 1 : 0;
    if (in_band >= options_.lock_confirm_windows) {
      state_.saturated_windows = 0;
      return;
    }
  }
  throw LockLost("lock acquisition failed after " +
                 std::to_string(options_.acquisition_max_windows) + " windows");
}

WindowRecord StabilizationLoop::feedback_window() {
  if (!state_.calibrated()) throw InvalidArgument("feedback requires a calibrated controller");
  WindowRecord rec = acquire(WindowRole::feedback, state_.modulator_phase,
                             SourceKind::attenuated_laser);
  rec.error = normalized_error(rec.counts, state_, config_);
  const ControllerState next = feedback_step(rec.counts, state_, config_);
  rec.correction = wrap_phase(next.modulator_phase - state_.modulator_phase);
  state_ = next;
  return rec;
}

WindowRecord StabilizationLoop::measure(double offset, SourceKind source) {
  return acquire(WindowRole::measurement, state_.modulator_phase + offset, source);
}

WindowRecord StabilizationLoop::free_run_window() {
  return acquire(WindowRole::free_running, state_.modulator_phase, SourceKind::attenuated_laser);
}

int StabilizationLoop::relock(int min_windows, int max_windows, std::vector<WindowRecord>* log) {
  const double band = dead_band();
  for (int i = 1; i <= max_windows; ++i) {
    WindowRecord rec = feedback_window();
    const bool settled = std::abs(rec.error) <= band;
    if (log) log->push_back(rec);
    if (i >= min_windows && settled) return i;
  }
  return -1;
}

StabilizedRun run_stabilized(StabilizationLoop& loop, double duration, int record_decimation,
                             bool feedback) {
  if (!(duration > 0.0)) throw InvalidArgument("run_stabilized: duration must be > 0");
  if (record_decimation < 1) throw InvalidArgument("run_stabilized: record_decimation must be >= 1");
  if (!loop.state().calibrated()) throw InvalidArgument("run_stabilized: loop is not locked");

  const double dt = loop.plant().config().window_length;
  const auto windows = static_cast<std::int64_t>(std::ceil(duration / dt - 1e-9));
  StabilizedRun run;
  run.windows = windows;
  run.retrieved_phase.reserve(static_cast<std::size_t>(windows));
  for (std::int64_t i = 0; i < windows; ++i) {
    WindowRecord rec = feedback ? loop.feedback_window() : loop.free_run_window();
    run.retrieved_phase.push_back(rec.retrieved_phase);
    if (i % record_decimation == 0) run.recorded.push_back(rec);
    if (feedback && loop.lock_lost()) {
      ++run.lock_losses;
      loop.calibrate_and_lock();
    }
  }
  const auto sums = kernels::power_sums(run.retrieved_phase, loop.state().phi_st);
  run.sigma = std::sqrt(sums.s2 / static_cast<double>(sums.count));
  return run;
}

void ScanPlan::validate() const {
  if (!(delta_phi > 0.0) || !std::isfinite(delta_phi)) throw InvalidArgument("delta_phi must be > 0");
  if (n_max < n_min) throw InvalidArgument("scan range is empty (n_max < n_min)");
  if (relock_min_windows < 1 || relock_max_windows < relock_min_windows) {
    throw InvalidArgument("relock window bounds are inconsistent");
  }
}

std::vector<int> ScanPlan::n_values() const {
  std::vector<int> out;
  for (int n = n_min; n <= n_max; ++n) out.push_back(n);
  return out;
}

bool ScanPlan::covers_full_fringe() const {
  return static_cast<double>(n_max - n_min) * delta_phi >= kTwoPi - 1e-9;
}

FringeScanResult fringe_scan(const ScanPlan& plan, StabilizationLoop& loop) {
  plan.validate();
  if (!loop.state().calibrated()) throw InvalidArgument("fringe_scan: loop is not locked");
  FringeScanResult result;
  for (int n : plan.n_values()) {
    const double offset = n * plan.delta_phi;
    WindowRecord rec = loop.measure(offset);
    FringePoint point;
    point.n = n;
    point.phi = loop.state().phi_st + offset;
    point.n_c = rec.counts.n_c;
    point.n_d = rec.counts.n_d;
    result.windows.push_back(rec);
    if (plan.restabilize_between_points) {
      point.relock_windows =
          loop.relock(plan.relock_min_windows, plan.relock_max_windows, &result.windows);
      if (point.relock_windows < 0) {
        point.lock_lost = true;
        ++result.lock_losses;
        loop.calibrate_and_lock();
      }
    }
    result.points.push_back(point);
  }
  return result;
}

SwitchingRunResult switching_run(int cycles, int stabilize_windows, StabilizationLoop& loop) {
  if (cycles < 1) throw InvalidArgument("switching_run: cycles must be >= 1");
  if (stabilize_windows < 1) throw InvalidArgument("switching_run: stabilize_windows must be >= 1");
  if (loop.config().mode != ControlMode::cpa_combined) {
    throw InvalidArgument("switching_run: requires the absorber (combined-count) mode");
  }
  if (!loop.plant().config().herald) throw InvalidArgument("switching_run: no heralded source");
  if (!loop.state().calibrated()) throw InvalidArgument("switching_run: loop is not locked");

  SwitchingRunResult result;
  result.records.reserve(2 * static_cast<std::size_t>(cycles));
  for (int cycle = 0; cycle < cycles; ++cycle) {
    for (Regime regime : {Regime::car, Regime::ctr}) {
      SwitchingRecord record;
      record.cycle = cycle;
      record.regime = regime;
      const int used = loop.relock(stabilize_windows, stabilize_windows + 50, &result.windows);
      if (used < 0) {
        record.lock_lost = true;
        ++result.lock_losses;
        loop.calibrate_and_lock();
      }
      const double target = regime == Regime::car ? 0.0 : std::numbers::pi;
      WindowRecord rec =
          loop.measure(wrap_phase(target - loop.state().phi_st), SourceKind::heralded_pair);
      record.counts = rec.counts;
      result.windows.push_back(rec);
      result.records.push_back(record);
    }
  }
  return result;
}

}  // namespace photonlock
