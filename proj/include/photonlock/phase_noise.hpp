#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "photonlock/rng.hpp"

namespace photonlock {

/// Parameters of the interferometer's phase-retardation noise: a stationary
/// mean-reverting component plus a slow random-walk drift.
///
/// The stationary component is a second-order Gauss-Markov process (white
/// noise through two cascaded first-order low-passes with a common corner),
/// so its spectrum falls as f^-4 above the corner and its paths are smooth on
/// the scale of one counting window.
struct PhaseNoiseSpec {
  double cutoff_frequency = 1.0;  ///< Hz; band that holds the bulk of the stationary power
  double fast_rms = 0.3;          ///< rad; stationary rms of the mean-reverting component
  double drift_rate = 3.0;        ///< rad per sqrt(hour); rms of the drift after one hour
  std::uint64_t seed = 0;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;

  /// Corner frequency of the stationary component's spectrum
  /// S(f) ~ 1 / (1 + (f / f_corner)^2)^2. Half the cutoff puts ~96% of the
  /// stationary power below the cutoff.
  double corner_frequency() const { return cutoff_frequency / 2.0; }

  /// 1 / (2 pi f_corner); the autocorrelation is (1 + |t|/T) exp(-|t|/T).
  double correlation_time() const;

  bool operator==(const PhaseNoiseSpec&) const = default;
};

/// Sampled phase retardation, zero-order held between samples.
struct NoiseTrace {
  double sample_period = 0.0;
  std::vector<double> samples;

  double duration() const { return sample_period * static_cast<double>(samples.size()); }
};

/// Streaming generator producing the same sequence as synthesize_noise().
class PhaseNoiseGenerator {
 public:
  PhaseNoiseGenerator(const PhaseNoiseSpec& spec, double sample_period);

  /// Current sample; advances the process by one sample period.
  double next();

  double sample_period() const { return sample_period_; }

 private:
  Rng rng_;
  double sample_period_;
  double f_xx_ = 0.0, f_xy_ = 0.0, f_yy_ = 0.0;  // transition matrix
  double l_xx_ = 0.0, l_yx_ = 0.0, l_yy_ = 0.0;  // innovation Cholesky factor
  double drift_step_ = 0.0;
  double x_ = 0.0;  // stationary component
  double y_ = 0.0;  // inner filter stage
  double drift_ = 0.0;
};

/// Trace of ceil(duration / sample_period) samples.
NoiseTrace synthesize_noise(const PhaseNoiseSpec& spec, double duration, double sample_period);

struct PsdBin {
  double frequency;  ///< Hz
  double density;    ///< rad^2 / Hz, one-sided
};

/// One-sided Welch estimate (Hann window, 50% overlap, global mean removed).
/// Requires at least 64 samples.
std::vector<PsdBin> estimate_psd(const NoiseTrace& trace);

/// Fraction of the integrated power at frequencies <= cutoff.
double power_fraction_below(std::span<const PsdBin> psd, double cutoff);

/// Integral of the density over frequency.
double integrated_power(std::span<const PsdBin> psd);

/// Zero-order-hold lookup; 0 <= time <= trace.duration().
double phase_at(const NoiseTrace& trace, double time);

/// `time_s,phase_rad`
void write_trace_csv(std::ostream& out, const NoiseTrace& trace);
/// `freq_hz,psd_rad2_per_hz`
void write_psd_csv(std::ostream& out, std::span<const PsdBin> psd);

}  // namespace photonlock
