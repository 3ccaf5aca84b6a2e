#include "photonlock/kernels.hpp"

namespace photonlock::kernels {
namespace {

void port_probabilities_scalar(std::span<const double> cos_phi, std::span<const double> sin_phi,
                               const PortCoefficients& k, std::span<double> p_c,
                               std::span<double> p_d, std::span<double> p_abs) {
  const std::size_t n = cos_phi.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double c = k.c0 + k.c_cos * cos_phi[i] + k.c_sin * sin_phi[i];
    const double d = k.d0 + k.d_cos * cos_phi[i] + k.d_sin * sin_phi[i];
    p_c[i] = c;
    p_d[i] = d;
    p_abs[i] = (1.0 - c) - d;
  }
}

PowerSums power_sums_scalar(std::span<const double> x, double center) {
  PowerSums s;
  s.count = x.size();
  for (double v : x) {
    const double d = v - center;
    const double d2 = d * d;
    s.s1 += d;
    s.s2 += d2;
    s.s3 += d2 * d;
    s.s4 += d2 * d2;
  }
  return s;
}

void apply_window_scalar(std::span<const double> x, double offset, std::span<const double> window,
                         std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - offset) * window[i];
}

void accumulate_power_scalar(std::span<const double> interleaved, std::span<double> acc) {
  for (std::size_t k = 0; k < acc.size(); ++k) {
    const double re = interleaved[2 * k];
    const double im = interleaved[2 * k + 1];
    acc[k] += re * re + im * im;
  }
}

}  // namespace

namespace detail {
const KernelTable scalar_table{Backend::scalar, &port_probabilities_scalar, &power_sums_scalar,
                               &apply_window_scalar, &accumulate_power_scalar};
}  // namespace detail

}  // namespace photonlock::kernels
