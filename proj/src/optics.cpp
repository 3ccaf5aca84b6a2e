#include "photonlock/optics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "photonlock/error.hpp"
#include "photonlock/format.hpp"

namespace photonlock {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kExact = 1e-12;

}  // namespace

double wrap_phase(double phi) {
  double w = std::remainder(phi, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

PortProbabilities bs_probabilities(double phi) {
  const double s = std::sin(wrap_phase(phi));
  return {0.5 * (1.0 + s), 0.5 * (1.0 - s), 0.0};
}

PortProbabilities cpa_probabilities(double phi) {
  const double c = std::cos(wrap_phase(phi));
  const double port = 0.25 * (1.0 - c);
  return {port, port, 0.5 * (1.0 + c)};
}

FourPortDevice FourPortDevice::unitary_beamsplitter() {
  return {{std::numbers::sqrt2 / 2.0, 0.0}, {0.0, std::numbers::sqrt2 / 2.0}, 0.0, 0.0};
}

double FourPortDevice::peak_detection() const {
  const double z_re = (std::conj(t) * r).real();
  return std::norm(t) + std::norm(r) + 2.0 * std::abs(z_re) + background_c + background_d;
}

void FourPortDevice::validate() const {
  for (double v : {t.real(), t.imag(), r.real(), r.imag(), background_c, background_d}) {
    if (!std::isfinite(v)) throw InvalidArgument("device parameters must be finite");
  }
  if (background_c < 0.0 || background_d < 0.0) {
    throw InvalidArgument("device backgrounds must be >= 0");
  }
  if (std::norm(t) + std::norm(r) > 1.0 + kExact) {
    throw InvalidArgument("device violates passivity: |t|^2 + |r|^2 > 1");
  }
  if (peak_detection() > 1.0 + kExact) {
    throw InvalidArgument("device violates passivity: p_c + p_d exceeds 1 at some phase");
  }
}

bool FourPortDevice::is_lossless() const {
  return std::abs(std::norm(t) + std::norm(r) - 1.0) <= kExact && background_c == 0.0 &&
         background_d == 0.0;
}

bool FourPortDevice::is_ideal_cpa() const {
  const bool matched = std::abs(t - r) <= kExact || std::abs(t + r) <= kExact;
  return matched && std::abs(std::abs(t) - 0.5) <= kExact && background_c == 0.0 &&
         background_d == 0.0;
}

kernels::PortCoefficients FourPortDevice::coefficients() const {
  // With z = conj(t) r:  p_c = S/2 + Re(z e^{i phi}) + b_c,  p_d = S/2 + Re(conj(z) e^{i phi}) + b_d.
  const std::complex<double> z = std::conj(t) * r;
  const double half_s = 0.5 * (std::norm(t) + std::norm(r));
  return {half_s + background_c, z.real(), -z.imag(), half_s + background_d, z.real(), z.imag()};
}

PortProbabilities device_probabilities(const FourPortDevice& dev, double phi) {
  dev.validate();
  const auto k = dev.coefficients();
  const double w = wrap_phase(phi);
  const double c = std::cos(w), s = std::sin(w);
  const double p_c = k.c0 + k.c_cos * c + k.c_sin * s;
  const double p_d = k.d0 + k.d_cos * c + k.d_sin * s;
  return {p_c, p_d, (1.0 - p_c) - p_d};
}

PortProbabilityTable device_probabilities(const FourPortDevice& dev, std::span<const double> phi) {
  dev.validate();
  const std::size_t n = phi.size();
  std::vector<double> c(n), s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = wrap_phase(phi[i]);
    c[i] = std::cos(w);
    s[i] = std::sin(w);
  }
  PortProbabilityTable out{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  kernels::port_probabilities(c, s, dev.coefficients(), out.p_c, out.p_d, out.p_abs);
  return out;
}

AnalyticFringes analytic_fringes(const FourPortDevice& dev) {
  dev.validate();
  const std::complex<double> z = std::conj(dev.t) * dev.r;
  const double half_s = 0.5 * (std::norm(dev.t) + std::norm(dev.r));
  const double mag = std::abs(z);
  const double arg = std::arg(z);
  AnalyticFringes f{};
  f.visibility_c = mag / (half_s + dev.background_c);
  f.visibility_d = mag / (half_s + dev.background_d);
  f.visibility_combined =
      2.0 * std::abs(z.real()) / (2.0 * half_s + dev.background_c + dev.background_d);
  f.max_phase_c = wrap_phase(-arg);
  f.max_phase_d = wrap_phase(arg);
  f.relative_shift = wrap_phase(2.0 * arg);
  return f;
}

FourPortDevice fit_imperfect_device(const DeviceTargets& targets) {
  const auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!in_unit(targets.visibility_c)) throw InvalidArgument("visibility_c must be in (0, 1]");
  if (!in_unit(targets.visibility_d)) throw InvalidArgument("visibility_d must be in (0, 1]");
  if (!(targets.relative_shift > -kPi && targets.relative_shift <= kPi)) {
    throw InvalidArgument("relative_shift must be in (-pi, pi]");
  }
  const double half_shift_cos = std::cos(0.5 * targets.relative_shift);
  if (std::abs(half_shift_cos) < 1e-9) {
    throw InfeasibleTarget(
        "relative_shift of pi puts the two port fringes in anti-phase: the summed counts are "
        "phase independent and no coherent absorption contrast exists");
  }

  const double v_hi = std::max(targets.visibility_c, targets.visibility_d);
  // 2 rho / (1 + rho^2) = v_hi, smaller root.
  const double rho = (1.0 - std::sqrt(std::max(0.0, 1.0 - v_hi * v_hi))) / v_hi;
  const double half_s = 0.5 * (1.0 + rho * rho);
  const double bg_c = std::max(0.0, rho / targets.visibility_c - half_s);
  const double bg_d = std::max(0.0, rho / targets.visibility_d - half_s);
  const double peak = 2.0 * half_s + 2.0 * rho * std::abs(half_shift_cos) + bg_c + bg_d;
  const double scale = 1.0 / std::sqrt(peak);

  FourPortDevice dev;
  dev.t = {scale, 0.0};
  dev.r = std::polar(scale * rho, kPi + 0.5 * targets.relative_shift);
  dev.background_c = bg_c * scale * scale;
  dev.background_d = bg_d * scale * scale;
  // polar() leaves ~1e-17 imaginary residue at the ideal point; snap it.
  if (std::abs(dev.r.imag()) < 1e-15) dev.r.imag(0.0);
  return dev;
}

PortProbabilities probabilities(const OutputDevice& dev, double phi) {
  if (std::holds_alternative<LosslessBeamSplitter>(dev)) return bs_probabilities(phi);
  return device_probabilities(std::get<FourPortDevice>(dev), phi);
}

std::string device_record(const FourPortDevice& dev) {
  std::ostringstream out;
  out << "t_re=" << format_double(dev.t.real()) << '\n'
      << "t_im=" << format_double(dev.t.imag()) << '\n'
      << "r_re=" << format_double(dev.r.real()) << '\n'
      << "r_im=" << format_double(dev.r.imag()) << '\n'
      << "background_c=" << format_double(dev.background_c) << '\n'
      << "background_d=" << format_double(dev.background_d) << '\n';
  return out.str();
}

FourPortDevice parse_device_record(const std::string& text) {
  std::map<std::string, double> values;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("device record line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    try {
      std::size_t used = 0;
      const std::string value = line.substr(eq + 1);
      values[key] = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw InvalidArgument("device record line " + std::to_string(line_no) + ": bad number");
    }
  }
  static const char* const kKeys[] = {"t_re", "t_im", "r_re", "r_im", "background_c", "background_d"};
  for (const auto& [key, _] : values) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw InvalidArgument("device record: unknown key '" + key + "'");
    }
  }
  for (const char* key : kKeys) {
    if (!values.contains(key)) throw InvalidArgument(std::string("device record: missing ") + key);
  }
  FourPortDevice dev{{values["t_re"], values["t_im"]},
                     {values["r_re"], values["r_im"]},
                     values["background_c"],
                     values["background_d"]};
  dev.validate();
  return dev;
}

}  // namespace photonlock
