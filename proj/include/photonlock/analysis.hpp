#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace photonlock {

/// (N_max - N_min) / (N_max + N_min); requires n_max >= n_min >= 0 and a
/// positive sum.
double visibility(double n_max, double n_min);

enum class FringeForm { sin, cos };

struct FringeSample {
  double phi;
  double count;
};

/// Least-squares fit of count = offset + amplitude * form(phi - phase).
///
/// `fitted_phase` is the phase argument of the form: for cos it is the phase
/// of the fringe maximum, for sin the rising zero crossing. Standard errors
/// come from the residual variance (delta method for amplitude and phase).
struct FringeStats {
  double n_max = 0.0;  ///< fitted offset + amplitude
  double n_min = 0.0;  ///< max(0, fitted offset - amplitude)
  double visibility = 0.0;
  double fitted_amplitude = 0.0;  ///< >= 0
  double fitted_offset = 0.0;
  double fitted_phase = 0.0;  ///< (-pi, pi]
  double offset_se = 0.0;
  double amplitude_se = 0.0;
  double phase_se = 0.0;
  double n_max_se = 0.0;
  double n_min_se = 0.0;
  double raw_max = 0.0;
  double raw_min = 0.0;
  double raw_visibility = 0.0;
  double residual_rms = 0.0;
  std::size_t points = 0;
};

/// Requires >= 8 points spanning >= 1.5 pi.
FringeStats fit_fringe(std::span<const FringeSample> points, FringeForm form);

struct GoodnessOfFit {
  double statistic = 0.0;
  double p_value = 1.0;
  int dof = 0;
  int bins = 0;
  double mean = 0.0;
};

/// Chi-square test of the count histogram against a Poisson law with the
/// sample mean; adjacent classes are merged until each expects >= 5.
/// Requires >= 50 samples.
GoodnessOfFit poisson_gof(std::span<const std::int64_t> counts);

struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  ///< population (1/n)
  double skewness = 0.0;
};

/// Mean, variance and skewness.
Moments moments(std::span<const double> x);

/// Root mean square of x - center.
double rms_about(std::span<const double> x, double center);

/// Sample standard deviation (1/(n-1)).
double sample_sd(std::span<const double> x);

struct Histogram {
  double origin = 0.0;  ///< left edge of bin 0
  double bin_width = 1.0;
  std::vector<std::int64_t> counts;

  double center(std::size_t i) const {
    return origin + (static_cast<double>(i) + 0.5) * bin_width;
  }
};

/// Bins aligned to integer multiples of bin_width. Non-finite values are skipped.
Histogram make_histogram(std::span<const double> x, double bin_width);

/// Integer-valued histogram: one bin per count value, starting at 0.
Histogram count_histogram(std::span<const std::int64_t> x);

struct GaussianFit {
  double mean = 0.0;
  double sigma = 0.0;
  double amplitude = 0.0;
};

/// Gaussian fit to a histogram via count-weighted least squares on log counts.
GaussianFit fit_gaussian(const Histogram& hist);

}  // namespace photonlock
