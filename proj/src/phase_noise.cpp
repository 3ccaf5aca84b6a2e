#include "photonlock/phase_noise.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>

#include "photonlock/error.hpp"
#include "photonlock/format.hpp"
#include "photonlock/kernels.hpp"

namespace photonlock {
namespace {

constexpr std::size_t kMaxSegment = 4096;
constexpr std::size_t kMinPsdSamples = 64;

// FFTW's planner is not re-entrant.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n),
        in_(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
        out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.get(), out_.get(), FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::span<double> input() { return {in_.get(), n_}; }
  /// Interleaved (re, im) bins 0..n/2.
  std::span<const double> execute() {
    fftw_execute(plan_);
    return {reinterpret_cast<const double*>(out_.get()), 2 * (n_ / 2 + 1)};
  }

 private:
  std::size_t n_;
  std::unique_ptr<double, FftwFree> in_;
  std::unique_ptr<fftw_complex, FftwFree> out_;
  fftw_plan plan_;
};

}  // namespace

void PhaseNoiseSpec::validate() const {
  if (!(cutoff_frequency > 0.0) || !std::isfinite(cutoff_frequency)) {
    throw InvalidArgument("cutoff_frequency must be > 0");
  }
  if (!(fast_rms >= 0.0) || !std::isfinite(fast_rms)) {
    throw InvalidArgument("fast_rms must be >= 0");
  }
  if (!(drift_rate >= 0.0) || !std::isfinite(drift_rate)) {
    throw InvalidArgument("drift_rate must be >= 0");
  }
}

double PhaseNoiseSpec::correlation_time() const {
  return 1.0 / (2.0 * std::numbers::pi * corner_frequency());
}

PhaseNoiseGenerator::PhaseNoiseGenerator(const PhaseNoiseSpec& spec, double sample_period)
    : rng_(spec.seed), sample_period_(sample_period) {
  spec.validate();
  if (!(sample_period > 0.0)) throw InvalidArgument("sample_period must be > 0");
  if (sample_period > 1.0 / (10.0 * spec.cutoff_frequency) * (1.0 + 1e-12)) {
    throw InvalidArgument("sample_period must be <= 1/(10 cutoff_frequency)");
  }
  // The stationary component is the second stage x of two cascaded
  // first-order low-passes driven by white noise (inner stage y):
  //   dy = -lambda y dt + sqrt(2 lambda) s_y dW,   dx = lambda (y - x) dt.
  // Its stationary covariance is fast_rms^2 [[1, 1], [1, 2]] for (x, y), and
  // the exact one-step transition is F = e^{-lambda h} [[1, lambda h], [0, 1]]
  // with innovation covariance Q = S - F S F^T.
  const double lambda = 1.0 / spec.correlation_time();
  const double lh = lambda * sample_period;
  const double e = std::exp(-lh);
  f_xx_ = e;
  f_xy_ = e * lh;
  f_yy_ = e;
  const double v = spec.fast_rms * spec.fast_rms;
  const double s_xx = v, s_xy = v, s_yy = 2.0 * v;
  // F S F^T
  const double fs_xx = f_xx_ * f_xx_ * s_xx + 2.0 * f_xx_ * f_xy_ * s_xy + f_xy_ * f_xy_ * s_yy;
  const double fs_xy = f_xx_ * f_yy_ * s_xy + f_xy_ * f_yy_ * s_yy;
  const double fs_yy = f_yy_ * f_yy_ * s_yy;
  const double q_xx = std::max(0.0, s_xx - fs_xx);
  const double q_xy = s_xy - fs_xy;
  const double q_yy = std::max(0.0, s_yy - fs_yy);
  l_xx_ = std::sqrt(q_xx);
  l_yx_ = l_xx_ > 0.0 ? q_xy / l_xx_ : 0.0;
  l_yy_ = std::sqrt(std::max(0.0, q_yy - l_yx_ * l_yx_));
  drift_step_ = spec.drift_rate * std::sqrt(sample_period / 3600.0);
  // Start in the stationary distribution (Cholesky factor fast_rms [[1, 0], [1, 1]]).
  const double z1 = rng_.normal(), z2 = rng_.normal();
  x_ = spec.fast_rms * z1;
  y_ = spec.fast_rms * (z1 + z2);
}

double PhaseNoiseGenerator::next() {
  const double value = x_ + drift_;
  const double z1 = rng_.normal(), z2 = rng_.normal();
  const double x = f_xx_ * x_ + f_xy_ * y_ + l_xx_ * z1;
  const double y = f_yy_ * y_ + l_yx_ * z1 + l_yy_ * z2;
  x_ = x;
  y_ = y;
  drift_ += drift_step_ * rng_.normal();
  return value;
}

NoiseTrace synthesize_noise(const PhaseNoiseSpec& spec, double duration, double sample_period) {
  if (!(duration > 0.0)) throw InvalidArgument("duration must be > 0");
  if (!(sample_period > 0.0)) throw InvalidArgument("sample_period must be > 0");
  if (duration < sample_period) throw InvalidArgument("duration must be >= sample_period");
  PhaseNoiseGenerator gen(spec, sample_period);
  // Guard against 3600/0.024 = 150000.00000000003 rounding up.
  const auto n = static_cast<std::size_t>(std::ceil(duration / sample_period - 1e-9));
  NoiseTrace trace{sample_period, {}};
  trace.samples.resize(n);
  for (auto& s : trace.samples) s = gen.next();
  return trace;
}

std::vector<PsdBin> estimate_psd(const NoiseTrace& trace) {
  const std::size_t n = trace.samples.size();
  if (n < kMinPsdSamples) throw InvalidArgument("estimate_psd: trace needs at least 64 samples");
  if (!(trace.sample_period > 0.0)) throw InvalidArgument("estimate_psd: bad sample period");

  const std::size_t len = std::min(kMaxSegment, std::bit_floor(n));
  const std::size_t step = len / 2;
  const std::size_t segments = (n - len) / step + 1;
  const double fs = 1.0 / trace.sample_period;

  const auto sums = kernels::power_sums(trace.samples, 0.0);
  const double mean = sums.s1 / static_cast<double>(n);

  std::vector<double> window(len);
  double window_power = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                      static_cast<double>(len)));
    window_power += window[i] * window[i];
  }

  RealFft fft(len);
  std::vector<double> acc(len / 2 + 1, 0.0);
  const std::span<const double> samples(trace.samples);
  for (std::size_t s = 0; s < segments; ++s) {
    kernels::apply_window(samples.subspan(s * step, len), mean, window, fft.input());
    kernels::accumulate_power(fft.execute(), acc);
  }

  const double scale = 1.0 / (fs * window_power * static_cast<double>(segments));
  std::vector<PsdBin> psd(acc.size());
  for (std::size_t k = 0; k < acc.size(); ++k) {
    const bool edge = k == 0 || (len % 2 == 0 && k == len / 2);
    psd[k].frequency = static_cast<double>(k) * fs / static_cast<double>(len);
    psd[k].density = acc[k] * scale * (edge ? 1.0 : 2.0);
  }
  return psd;
}

double integrated_power(std::span<const PsdBin> psd) {
  if (psd.size() < 2) return 0.0;
  const double df = psd[1].frequency - psd[0].frequency;
  double total = 0.0;
  for (const auto& b : psd) total += b.density;
  return total * df;
}

double power_fraction_below(std::span<const PsdBin> psd, double cutoff) {
  double below = 0.0, total = 0.0;
  for (const auto& b : psd) {
    total += b.density;
    if (b.frequency <= cutoff) below += b.density;
  }
  return total > 0.0 ? below / total : 0.0;
}

double phase_at(const NoiseTrace& trace, double time) {
  if (trace.samples.empty()) throw InvalidArgument("phase_at: empty trace");
  if (!(time >= 0.0) || time > trace.duration()) {
    throw InvalidArgument("phase_at: time outside [0, duration]");
  }
  const auto idx = static_cast<std::size_t>(std::floor(time / trace.sample_period));
  return trace.samples[std::min(idx, trace.samples.size() - 1)];
}

void write_trace_csv(std::ostream& out, const NoiseTrace& trace) {
  out << "time_s,phase_rad\n";
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    out << format_double(static_cast<double>(i) * trace.sample_period) << ','
        << format_double(trace.samples[i]) << '\n';
  }
}

void write_psd_csv(std::ostream& out, std::span<const PsdBin> psd) {
  out << "freq_hz,psd_rad2_per_hz\n";
  for (const auto& b : psd) out << format_double(b.frequency) << ',' << format_double(b.density) << '\n';
}

}  // namespace photonlock
