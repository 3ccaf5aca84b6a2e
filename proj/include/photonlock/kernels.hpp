#pragma once

// Data-parallel inner loops with a portable scalar reference and vectorized
// variants selected at runtime. Every variant must agree with the scalar
// reference to within floating-point reassociation error.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace photonlock::kernels {

enum class Backend { scalar, avx2 };

std::string_view to_string(Backend backend) noexcept;

/// Affine form of the two port probabilities in (cos phi, sin phi):
///   p_c = c0 + c_cos cos(phi) + c_sin sin(phi)
///   p_d = d0 + d_cos cos(phi) + d_sin sin(phi)
struct PortCoefficients {
  double c0 = 0.0;
  double c_cos = 0.0;
  double c_sin = 0.0;
  double d0 = 0.0;
  double d_cos = 0.0;
  double d_sin = 0.0;
};

/// Raw sums of (x - center)^k for k = 1..4.
struct PowerSums {
  std::size_t count = 0;
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;
  double s4 = 0.0;
};

struct KernelTable {
  Backend backend;
  /// Writes p_c, p_d and p_abs = 1 - p_c - p_d for every sample.
  void (*port_probabilities)(std::span<const double> cos_phi, std::span<const double> sin_phi,
                             const PortCoefficients& coeffs, std::span<double> p_c,
                             std::span<double> p_d, std::span<double> p_abs);
  PowerSums (*power_sums)(std::span<const double> x, double center);
  /// out[i] = (x[i] - offset) * window[i]
  void (*apply_window)(std::span<const double> x, double offset, std::span<const double> window,
                       std::span<double> out);
  /// acc[k] += re[k]^2 + im[k]^2 for interleaved (re, im) input.
  void (*accumulate_power)(std::span<const double> interleaved, std::span<double> acc);
};

/// True when the backend was compiled in and the CPU supports it.
bool available(Backend backend) noexcept;

std::vector<Backend> available_backends();

/// Table for a specific backend; throws InvalidArgument if unavailable.
const KernelTable& table(Backend backend);

/// Table used by the library. Picks the widest available backend on first use
/// unless PHOTONLOCK_KERNELS=scalar is set in the environment.
const KernelTable& active();

/// Overrides the runtime choice. Not synchronized with concurrent kernel calls.
void select(Backend backend);

// Convenience wrappers over active().
void port_probabilities(std::span<const double> cos_phi, std::span<const double> sin_phi,
                        const PortCoefficients& coeffs, std::span<double> p_c,
                        std::span<double> p_d, std::span<double> p_abs);
PowerSums power_sums(std::span<const double> x, double center);
void apply_window(std::span<const double> x, double offset, std::span<const double> window,
                  std::span<double> out);
void accumulate_power(std::span<const double> interleaved, std::span<double> acc);

namespace detail {
extern const KernelTable scalar_table;
#if defined(PHOTONLOCK_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
}  // namespace detail

}  // namespace photonlock::kernels
