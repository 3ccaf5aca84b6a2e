#include "photonlock/control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "photonlock/error.hpp"

namespace photonlock {
namespace {

constexpr int kSmoothing = 5;

void require_calibrated(const ControllerState& state) {
  if (!state.calibrated()) throw InvalidArgument("controller state is not calibrated");
}

}  // namespace

void ControllerConfig::validate() const {
  if (!(gain > 0.0)) throw InvalidArgument("gain must be > 0");
  if (dead_band && !(*dead_band >= 0.0)) throw InvalidArgument("dead_band must be >= 0");
  if (!(setpoint_fraction > 0.0 && setpoint_fraction < 1.0)) {
    throw InvalidArgument("setpoint_fraction must be in (0, 1)");
  }
  if (!(max_step > 0.0)) throw InvalidArgument("max_step must be > 0");
  if (slope_sign != 1 && slope_sign != -1) throw InvalidArgument("slope_sign must be +1 or -1");
  if (lock_loss_windows < 1) throw InvalidArgument("lock_loss_windows must be >= 1");
}

double ControllerConfig::resolved_dead_band(double calibrated_photons) const {
  if (dead_band) return *dead_band;
  if (!(calibrated_photons > 0.0)) throw InvalidArgument("dead band needs a calibrated N");
  return 1.0 / std::sqrt(calibrated_photons);
}

double stabilization_phase(const ControllerConfig& cfg) {
  const double x = 2.0 * cfg.setpoint_fraction - 1.0;
  if (cfg.mode == ControlMode::bs_midfringe) {
    const double branch = std::asin(x);
    return cfg.slope_sign > 0 ? branch : wrap_phase(std::numbers::pi - branch);
  }
  return cfg.slope_sign * std::acos(-x);
}

double observed_fraction(double n_c, double n_d, double photons, ControlMode mode) {
  if (!(photons > 0.0)) throw InvalidArgument("observed_fraction: photon number must be > 0");
  return (mode == ControlMode::bs_midfringe ? n_c : n_c + n_d) / photons;
}

double calibrate_N(std::span<const CountWindow> scan, std::span<const double> commanded_phase,
                   ControlMode mode) {
  if (scan.empty() || scan.size() != commanded_phase.size()) {
    throw InvalidArgument("calibrate_N: scan and commanded phases must be non-empty and aligned");
  }
  const auto [lo, hi] = std::minmax_element(commanded_phase.begin(), commanded_phase.end());
  if (*hi - *lo < 2.0 * std::numbers::pi - 1e-9) {
    throw InvalidArgument("calibrate_N: scan must span at least 2 pi of commanded phase");
  }
  std::vector<double> totals(scan.size());
  std::transform(scan.begin(), scan.end(), totals.begin(),
                 [](const CountWindow& w) { return static_cast<double>(w.n_c + w.n_d); });
  if (std::all_of(totals.begin(), totals.end(), [](double v) { return v == 0.0; })) {
    throw InvalidArgument("calibrate_N: scan recorded no counts");
  }

  if (mode == ControlMode::bs_midfringe) {
    double sum = 0.0;
    for (double v : totals) sum += v;
    return sum / static_cast<double>(totals.size());
  }

  const std::size_t n = totals.size();
  const std::size_t half = kSmoothing / 2;
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t from = i >= half ? i - half : 0;
    const std::size_t to = std::min(n, i + half + 1);
    double sum = 0.0;
    for (std::size_t j = from; j < to; ++j) sum += totals[j];
    best = std::max(best, sum / static_cast<double>(to - from));
  }
  return best;
}

double phase_from_counts(double n_c, double n_d, const ControllerState& state, ControlMode mode) {
  require_calibrated(state);
  const double f = observed_fraction(n_c, n_d, state.calibrated_N, mode);
  if (mode == ControlMode::bs_midfringe) {
    const double branch = std::asin(std::clamp(2.0 * f - 1.0, -1.0, 1.0));
    return state.slope_sign > 0 ? branch : wrap_phase(std::numbers::pi - branch);
  }
  return state.slope_sign * std::acos(std::clamp(1.0 - 2.0 * f, -1.0, 1.0));
}

double phase_from_counts(const CountWindow& window, const ControllerState& state, ControlMode mode) {
  if (!(window.window_length > 0.0)) throw InvalidArgument("phase_from_counts: zero-length window");
  return phase_from_counts(static_cast<double>(window.n_c), static_cast<double>(window.n_d), state,
                           mode);
}

double normalized_error(const CountWindow& window, const ControllerState& state,
                        const ControllerConfig& cfg) {
  require_calibrated(state);
  return observed_fraction(static_cast<double>(window.n_c), static_cast<double>(window.n_d),
                           state.calibrated_N, cfg.mode) -
         cfg.setpoint_fraction;
}

ControllerState feedback_step(const CountWindow& window, const ControllerState& state,
                              const ControllerConfig& cfg) {
  const double e = normalized_error(window, state, cfg);
  if (std::abs(e) <= cfg.resolved_dead_band(state.calibrated_N)) {
    ControllerState next = state;
    next.saturated_windows = 0;
    return next;
  }
  const double raw = cfg.gain * e;
  const double step = std::clamp(raw, -cfg.max_step, cfg.max_step);
  ControllerState next = state;
  next.modulator_phase = wrap_phase(state.modulator_phase - state.slope_sign * step);
  next.saturated_windows = std::abs(raw) >= cfg.max_step ? state.saturated_windows + 1 : 0;
  return next;
}

}  // namespace photonlock
