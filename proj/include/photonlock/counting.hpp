#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>

#include "photonlock/optics.hpp"
#include "photonlock/rng.hpp"

namespace photonlock {

inline constexpr double kDefaultWindowLength = 0.024;  // s

enum class SourceKind { attenuated_laser, heralded_pair };

struct SourceSpec {
  SourceKind kind = SourceKind::attenuated_laser;
  /// Laser: mean photons reaching the output device per window.
  /// Heralded: mean photon pairs generated per window.
  double mean_photons_per_window = 1000.0;
  double heralding_efficiency = 1.0;        ///< heralded only
  double dark_count_mean_per_window = 0.0;  ///< per output detector
  /// Mean accidental herald/output coincidences per window (heralded only).
  double accidental_coincidence_mean = 0.0;

  void validate() const;

  bool operator==(const SourceSpec&) const = default;
};

/// Counts accumulated over one integration window.
struct CountWindow {
  std::int64_t n_c = 0;
  std::int64_t n_d = 0;
  std::int64_t n_h = 0;       ///< herald detections
  std::int64_t coinc_ch = 0;  ///< SPD-c & SPD-h
  std::int64_t coinc_dh = 0;  ///< SPD-d & SPD-h
  double window_length = kDefaultWindowLength;
  /// Heralded photons that reached neither output detector. Bookkeeping only;
  /// coinc_ch + coinc_dh + heralded_lost == n_h.
  std::int64_t heralded_lost = 0;

  bool operator==(const CountWindow&) const = default;
};

/// n_c ~ Poisson(N p_c + dark), n_d ~ Poisson(N p_d + dark).
CountWindow sample_window_laser(const SourceSpec& src, const PortProbabilities& probs, Rng& rng,
                                double window_length = kDefaultWindowLength);

/// Pair source: k ~ Poisson(mean); every pair sends its signal photon through
/// the device and is heralded with probability heralding_efficiency.
/// Coincidences count heralded photons that were detected. Dark counts reach
/// the singles only; accidental coincidences add one herald and one output
/// click each.
CountWindow sample_window_heralded(const SourceSpec& src, const PortProbabilities& probs, Rng& rng,
                                   double window_length = kDefaultWindowLength);

/// (N p_c, N p_d)
std::pair<double, double> expected_counts(const PortProbabilities& probs, double photons);

struct TimedWindow {
  std::int64_t index;
  double time;
  CountWindow counts;
};

/// `window_idx,time_s,n_c,n_d,n_h,coinc_ch,coinc_dh`
void write_windows_csv(std::ostream& out, std::span<const TimedWindow> windows);

}  // namespace photonlock
