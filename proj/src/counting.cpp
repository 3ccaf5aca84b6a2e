#include "photonlock/counting.hpp"

#include <cmath>
#include <ostream>

#include "photonlock/error.hpp"
#include "photonlock/format.hpp"

namespace photonlock {
namespace {

void check_probabilities(const PortProbabilities& p) {
  const auto ok = [](double v) { return v >= -1e-12 && v <= 1.0 + 1e-12; };
  if (!ok(p.p_c) || !ok(p.p_d) || !ok(p.p_abs)) {
    throw InvalidArgument("port probabilities must lie in [0, 1]");
  }
}

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace

void SourceSpec::validate() const {
  const auto nonneg = [](double v) { return v >= 0.0 && std::isfinite(v); };
  if (!nonneg(mean_photons_per_window)) throw InvalidArgument("mean_photons_per_window must be >= 0");
  if (!(heralding_efficiency >= 0.0 && heralding_efficiency <= 1.0)) {
    throw InvalidArgument("heralding_efficiency must be in [0, 1]");
  }
  if (!nonneg(dark_count_mean_per_window)) throw InvalidArgument("dark_count_mean must be >= 0");
  if (!nonneg(accidental_coincidence_mean)) {
    throw InvalidArgument("accidental_coincidence_mean must be >= 0");
  }
}

CountWindow sample_window_laser(const SourceSpec& src, const PortProbabilities& probs, Rng& rng,
                                double window_length) {
  if (src.kind != SourceKind::attenuated_laser) {
    throw InvalidArgument("sample_window_laser: source is not an attenuated laser");
  }
  src.validate();
  check_probabilities(probs);
  const double n = src.mean_photons_per_window;
  const double dark = src.dark_count_mean_per_window;
  CountWindow w;
  w.window_length = window_length;
  w.n_c = rng.poisson(n * clamp01(probs.p_c) + dark);
  w.n_d = rng.poisson(n * clamp01(probs.p_d) + dark);
  return w;
}

CountWindow sample_window_heralded(const SourceSpec& src, const PortProbabilities& probs, Rng& rng,
                                   double window_length) {
  if (src.kind != SourceKind::heralded_pair) {
    throw InvalidArgument("sample_window_heralded: source is not a heralded pair source");
  }
  src.validate();
  check_probabilities(probs);
  const double p_c = clamp01(probs.p_c);
  const double p_cd = clamp01(p_c + clamp01(probs.p_d));

  CountWindow w;
  w.window_length = window_length;
  const std::int64_t pairs = rng.poisson(src.mean_photons_per_window);
  for (std::int64_t i = 0; i < pairs; ++i) {
    const bool heralded = rng.bernoulli(src.heralding_efficiency);
    const double u = rng.uniform();
    const bool at_c = u < p_c;
    const bool at_d = !at_c && u < p_cd;
    w.n_c += at_c;
    w.n_d += at_d;
    if (!heralded) continue;
    ++w.n_h;
    if (at_c) {
      ++w.coinc_ch;
    } else if (at_d) {
      ++w.coinc_dh;
    } else {
      ++w.heralded_lost;
    }
  }
  const std::int64_t accidentals = rng.poisson(src.accidental_coincidence_mean);
  for (std::int64_t i = 0; i < accidentals; ++i) {
    ++w.n_h;
    if (rng.bernoulli(0.5)) {
      ++w.n_c;
      ++w.coinc_ch;
    } else {
      ++w.n_d;
      ++w.coinc_dh;
    }
  }
  w.n_c += rng.poisson(src.dark_count_mean_per_window);
  w.n_d += rng.poisson(src.dark_count_mean_per_window);
  return w;
}

std::pair<double, double> expected_counts(const PortProbabilities& probs, double photons) {
  if (!(photons >= 0.0)) throw InvalidArgument("expected_counts: photon number must be >= 0");
  return {photons * probs.p_c, photons * probs.p_d};
}

void write_windows_csv(std::ostream& out, std::span<const TimedWindow> windows) {
  out << "window_idx,time_s,n_c,n_d,n_h,coinc_ch,coinc_dh\n";
  for (const auto& w : windows) {
    out << w.index << ',' << format_double(w.time) << ',' << w.counts.n_c << ',' << w.counts.n_d
        << ',' << w.counts.n_h << ',' << w.counts.coinc_ch << ',' << w.counts.coinc_dh << '\n';
  }
}

}  // namespace photonlock
