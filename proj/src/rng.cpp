#include "photonlock/rng.hpp"

#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

#include "photonlock/error.hpp"

namespace photonlock {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

std::int64_t Rng::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) {
    throw InvalidArgument("poisson mean must be finite and non-negative");
  }
  if (mean == 0.0) return 0;
  return mean < 10.0 ? poisson_small(mean) : poisson_ptrs(mean);
}

// Product-of-uniforms inversion; expected mean + 1 draws.
std::int64_t Rng::poisson_small(double mean) {
  const double limit = std::exp(-mean);
  std::int64_t k = 0;
  double prod = uniform();
  while (prod > limit) {
    ++k;
    prod *= uniform();
  }
  return k;
}

// Transformed rejection with squeeze (Hoermann's PTRS), valid for mean >= 10.
std::int64_t Rng::poisson_ptrs(double mean) {
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);

  for (;;) {
    const double u = uniform() - 0.5;
    const double v = uniform();
    const double us = 0.5 - std::abs(u);
    const auto k = static_cast<std::int64_t>(std::floor((2.0 * a / us + b) * u + mean + 0.43));
    if (us >= 0.07 && v <= vr) return k;
    if (k < 0 || (us < 0.013 && v > us)) continue;
    const double lhs = std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b);
    const double rhs = -mean + static_cast<double>(k) * loglam -
                       boost::math::lgamma(static_cast<double>(k) + 1.0);
    if (lhs <= rhs) return k;
  }
}

}  // namespace photonlock
