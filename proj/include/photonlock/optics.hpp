#pragma once

#include <complex>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "photonlock/kernels.hpp"

namespace photonlock {

/// Detection probabilities at the two output ports and absorption in the device.
struct PortProbabilities {
  double p_c = 0.0;
  double p_d = 0.0;
  double p_abs = 0.0;
};

/// Lossless 50:50 beamsplitter: p_c = (1 + sin phi)/2, p_d = (1 - sin phi)/2.
PortProbabilities bs_probabilities(double phi);

/// Ideal coherent perfect absorber: p_c = p_d = (1 - cos phi)/4.
PortProbabilities cpa_probabilities(double phi);

/// Output four-port with amplitude transmission t and reflection r, fed with the
/// balanced single-photon state (1/sqrt2, e^{i phi}/sqrt2):
///
///   p_c = |t + r e^{i phi}|^2 / 2 + background_c
///   p_d = |r + t e^{i phi}|^2 / 2 + background_d
///
/// The backgrounds are phase-independent detection fractions that model
/// fabrication imperfections; they are drawn from the absorbed share, so
/// p_abs = 1 - p_c - p_d.
///
/// Phase conventions: t = 1/2, r = -1/2 reproduces cpa_probabilities exactly
/// (the t = r = 1/2 branch gives p_c = p_d = (1 + cos phi)/4). The unitary
/// splitter t = 1/sqrt2, r = i/sqrt2 gives the beamsplitter fringes with the
/// ports' phase origin moved by pi: device(phi) == bs_probabilities(phi + pi).
/// Half of that pi is the sin/cos origin difference, half is arg(r/t).
struct FourPortDevice {
  std::complex<double> t{0.5, 0.0};
  std::complex<double> r{-0.5, 0.0};
  double background_c = 0.0;
  double background_d = 0.0;

  static FourPortDevice ideal_cpa() { return {{0.5, 0.0}, {-0.5, 0.0}, 0.0, 0.0}; }
  static FourPortDevice unitary_beamsplitter();

  /// Throws InvalidArgument unless |t|^2 + |r|^2 <= 1, backgrounds >= 0 and
  /// p_c + p_d <= 1 for every phase.
  void validate() const;

  bool is_lossless() const;
  bool is_ideal_cpa() const;

  /// max over phi of p_c + p_d.
  double peak_detection() const;

  kernels::PortCoefficients coefficients() const;

  bool operator==(const FourPortDevice&) const = default;
};

PortProbabilities device_probabilities(const FourPortDevice& dev, double phi);

/// Structure-of-arrays result for a batch of phases.
struct PortProbabilityTable {
  std::vector<double> p_c;
  std::vector<double> p_d;
  std::vector<double> p_abs;
};

PortProbabilityTable device_probabilities(const FourPortDevice& dev, std::span<const double> phi);

/// Closed-form fringe properties of a device.
struct AnalyticFringes {
  double visibility_c;
  double visibility_d;
  double visibility_combined;
  double max_phase_c;     ///< phase of the p_c maximum, in (-pi, pi]
  double max_phase_d;     ///< phase of the p_d maximum, in (-pi, pi]
  double relative_shift;  ///< max_phase_d - max_phase_c, wrapped to (-pi, pi]
};

AnalyticFringes analytic_fringes(const FourPortDevice& dev);

struct DeviceTargets {
  double visibility_c = 1.0;
  double visibility_d = 1.0;
  double relative_shift = 0.0;  ///< rad, in (-pi, pi]

  bool operator==(const DeviceTargets&) const = default;
};

/// Closed-form device whose fringes hit the targets.
///
/// arg(r/t) = pi + shift/2 places both fringes near the absorber's cos form
/// with the requested separation. The |r|/|t| imbalance sets the larger
/// visibility; a background on the other port lowers its visibility to target.
/// Amplitudes are then scaled so the peak detection probability is 1.
/// Throws InvalidArgument for out-of-range targets and InfeasibleTarget when
/// the shift is +-pi (the summed fringe then carries no phase information).
FourPortDevice fit_imperfect_device(const DeviceTargets& targets);

/// Either the ideal lossless splitter in its native sin form, or a four-port.
struct LosslessBeamSplitter {
  bool operator==(const LosslessBeamSplitter&) const = default;
};
using OutputDevice = std::variant<LosslessBeamSplitter, FourPortDevice>;

PortProbabilities probabilities(const OutputDevice& dev, double phi);

/// `key=value` lines: t_re, t_im, r_re, r_im, background_c, background_d.
std::string device_record(const FourPortDevice& dev);
FourPortDevice parse_device_record(const std::string& text);

/// Wraps an angle into (-pi, pi].
double wrap_phase(double phi);

}  // namespace photonlock
