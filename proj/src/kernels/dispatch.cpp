#include <atomic>
#include <cstdlib>
#include <string>

#include "photonlock/error.hpp"
#include "photonlock/kernels.hpp"

namespace photonlock::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(PHOTONLOCK_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const char* forced = std::getenv("PHOTONLOCK_KERNELS");
  if (forced != nullptr && std::string(forced) == "scalar") return &detail::scalar_table;
#if defined(PHOTONLOCK_HAVE_AVX2)
  if (cpu_has_avx2()) return &detail::avx2_table;
#endif
  return &detail::scalar_table;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

std::string_view to_string(Backend backend) noexcept {
  switch (backend) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
  }
  return "unknown";
}

bool available(Backend backend) noexcept {
  switch (backend) {
    case Backend::scalar: return true;
    case Backend::avx2: return cpu_has_avx2();
  }
  return false;
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out{Backend::scalar};
  if (available(Backend::avx2)) out.push_back(Backend::avx2);
  return out;
}

const KernelTable& table(Backend backend) {
  if (!available(backend)) {
    throw InvalidArgument("kernel backend '" + std::string(to_string(backend)) +
                          "' is not available on this machine");
  }
#if defined(PHOTONLOCK_HAVE_AVX2)
  if (backend == Backend::avx2) return detail::avx2_table;
#endif
  return detail::scalar_table;
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Backend backend) { current().store(&table(backend), std::memory_order_release); }

void port_probabilities(std::span<const double> cos_phi, std::span<const double> sin_phi,
                        const PortCoefficients& coeffs, std::span<double> p_c,
                        std::span<double> p_d, std::span<double> p_abs) {
  if (sin_phi.size() != cos_phi.size() || p_c.size() != cos_phi.size() ||
      p_d.size() != cos_phi.size() || p_abs.size() != cos_phi.size()) {
    throw InvalidArgument("port_probabilities: span sizes differ");
  }
  active().port_probabilities(cos_phi, sin_phi, coeffs, p_c, p_d, p_abs);
}

PowerSums power_sums(std::span<const double> x, double center) {
  return active().power_sums(x, center);
}

void apply_window(std::span<const double> x, double offset, std::span<const double> window,
                  std::span<double> out) {
  if (window.size() != x.size() || out.size() != x.size()) {
    throw InvalidArgument("apply_window: span sizes differ");
  }
  active().apply_window(x, offset, window, out);
}

void accumulate_power(std::span<const double> interleaved, std::span<double> acc) {
  if (interleaved.size() != 2 * acc.size()) {
    throw InvalidArgument("accumulate_power: expected two input values per accumulator");
  }
  active().accumulate_power(interleaved, acc);
}

}  // namespace photonlock::kernels
