#include "photonlock/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <boost/math/distributions/poisson.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "photonlock/error.hpp"
#include "photonlock/kernels.hpp"

namespace photonlock {
namespace {

constexpr std::size_t kMinFringePoints = 8;
constexpr double kMinFringeSpan = 1.5 * std::numbers::pi;
constexpr std::size_t kMinGofSamples = 50;
constexpr double kMinExpected = 5.0;

}  // namespace

double visibility(double n_max, double n_min) {
  if (!(n_min >= 0.0) || !(n_max >= n_min)) {
    throw InvalidArgument("visibility: requires n_max >= n_min >= 0");
  }
  if (n_max + n_min <= 0.0) throw InvalidArgument("visibility: n_max and n_min are both zero");
  return (n_max - n_min) / (n_max + n_min);
}

FringeStats fit_fringe(std::span<const FringeSample> points, FringeForm form) {
  const std::size_t n = points.size();
  if (n < kMinFringePoints) throw InvalidArgument("fit_fringe: need at least 8 points");
  for (const auto& p : points) {
    if (!std::isfinite(p.phi) || !std::isfinite(p.count)) {
      throw InvalidArgument("fit_fringe: non-finite sample");
    }
  }
  const auto [lo, hi] = std::minmax_element(
      points.begin(), points.end(), [](const auto& a, const auto& b) { return a.phi < b.phi; });
  if (hi->phi - lo->phi < kMinFringeSpan - 1e-9) {
    throw InvalidArgument("fit_fringe: points must span at least 1.5 pi");
  }

  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = std::cos(points[i].phi);
    design(i, 2) = std::sin(points[i].phi);
    y(i) = points[i].count;
  }
  const Eigen::Matrix3d normal = design.transpose() * design;
  const Eigen::LDLT<Eigen::Matrix3d> ldlt(normal);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-12) {
    throw InvalidArgument("fit_fringe: degenerate phase sampling");
  }
  const Eigen::Vector3d coef = ldlt.solve(design.transpose() * y);
  const Eigen::VectorXd resid = y - design * coef;
  const double rss = resid.squaredNorm();
  const Eigen::Matrix3d cov =
      ldlt.solve(Eigen::Matrix3d::Identity()) * (rss / static_cast<double>(n - 3));

  const double off = coef(0), a = coef(1), b = coef(2);
  const double amp = std::hypot(a, b);

  FringeStats s;
  s.points = n;
  s.fitted_offset = off;
  s.fitted_amplitude = amp;
  s.fitted_phase = form == FringeForm::cos ? std::atan2(b, a) : std::atan2(-a, b);
  s.residual_rms = std::sqrt(rss / static_cast<double>(n));
  s.n_max = off + amp;
  s.n_min = std::max(0.0, off - amp);

  const auto se = [&](const Eigen::Vector3d& g) { return std::sqrt(std::max(0.0, g.dot(cov * g))); };
  s.offset_se = std::sqrt(std::max(0.0, cov(0, 0)));
  if (amp > 0.0) {
    s.amplitude_se = se({0.0, a / amp, b / amp});
    s.phase_se = se({0.0, -b / (amp * amp), a / (amp * amp)});
    s.n_max_se = se({1.0, a / amp, b / amp});
    s.n_min_se = se({1.0, -a / amp, -b / amp});
  } else {
    s.n_max_se = s.n_min_se = s.offset_se;
  }
  s.visibility = s.n_max > 0.0 ? visibility(std::max(s.n_max, s.n_min), s.n_min) : 0.0;

  const auto [cmin, cmax] = std::minmax_element(
      points.begin(), points.end(), [](const auto& p, const auto& q) { return p.count < q.count; });
  s.raw_max = cmax->count;
  s.raw_min = std::max(0.0, cmin->count);
  s.raw_visibility = s.raw_max + s.raw_min > 0.0 ? visibility(s.raw_max, s.raw_min) : 0.0;
  return s;
}

GoodnessOfFit poisson_gof(std::span<const std::int64_t> counts) {
  const std::size_t n = counts.size();
  if (n < kMinGofSamples) throw InvalidArgument("poisson_gof: need at least 50 samples");
  std::map<std::int64_t, std::int64_t> observed;
  double sum = 0.0;
  for (auto c : counts) {
    if (c < 0) throw InvalidArgument("poisson_gof: counts must be >= 0");
    ++observed[c];
    sum += static_cast<double>(c);
  }
  GoodnessOfFit out;
  out.mean = sum / static_cast<double>(n);
  if (out.mean == 0.0) {
    out.bins = 1;
    return out;  // Poisson(0) is a point mass at 0 and fits exactly.
  }

  const boost::math::poisson_distribution<double> law(out.mean);
  const double total = static_cast<double>(n);
  struct Bin {
    double expected = 0.0;
    double observed = 0.0;
  };
  std::vector<Bin> bins;
  Bin cur;
  for (std::int64_t k = 0;; ++k) {
    cur.expected += total * boost::math::pdf(law, static_cast<double>(k));
    const auto it = observed.find(k);
    if (it != observed.end()) cur.observed += static_cast<double>(it->second);
    const double tail = total * boost::math::cdf(boost::math::complement(law, static_cast<double>(k)));
    if (tail < kMinExpected) {
      cur.expected += tail;
      for (auto jt = observed.upper_bound(k); jt != observed.end(); ++jt) {
        cur.observed += static_cast<double>(jt->second);
      }
      bins.push_back(cur);
      break;
    }
    if (cur.expected >= kMinExpected) {
      bins.push_back(cur);
      cur = Bin{};
    }
  }
  if (bins.size() > 1 && bins.back().expected < kMinExpected) {
    bins[bins.size() - 2].expected += bins.back().expected;
    bins[bins.size() - 2].observed += bins.back().observed;
    bins.pop_back();
  }

  out.bins = static_cast<int>(bins.size());
  for (const auto& b : bins) out.statistic += (b.observed - b.expected) * (b.observed - b.expected) / b.expected;
  out.dof = out.bins - 2;  // one constraint for the total, one for the fitted mean
  if (out.dof < 1) {
    out.p_value = 1.0;
    return out;
  }
  out.p_value = boost::math::gamma_q(0.5 * out.dof, 0.5 * out.statistic);
  return out;
}

Moments moments(std::span<const double> x) {
  Moments m;
  m.count = x.size();
  if (x.empty()) return m;
  const double n = static_cast<double>(x.size());
  m.mean = kernels::power_sums(x, 0.0).s1 / n;
  const auto c = kernels::power_sums(x, m.mean);
  // Correct for the residual first moment left by rounding in the mean.
  const double d = c.s1 / n;
  m.variance = c.s2 / n - d * d;
  const double m3 = c.s3 / n - 3.0 * d * c.s2 / n + 2.0 * d * d * d;
  m.skewness = m.variance > 0.0 ? m3 / std::pow(m.variance, 1.5) : 0.0;
  return m;
}

double rms_about(std::span<const double> x, double center) {
  if (x.empty()) throw InvalidArgument("rms_about: empty input");
  const auto s = kernels::power_sums(x, center);
  return std::sqrt(s.s2 / static_cast<double>(s.count));
}

double sample_sd(std::span<const double> x) {
  if (x.size() < 2) throw InvalidArgument("sample_sd: need at least two values");
  const auto m = moments(x);
  const double n = static_cast<double>(x.size());
  return std::sqrt(m.variance * n / (n - 1.0));
}

Histogram make_histogram(std::span<const double> x, double bin_width) {
  if (!(bin_width > 0.0)) throw InvalidArgument("make_histogram: bin width must be > 0");
  Histogram h;
  h.bin_width = bin_width;
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (double v : x) {
    if (!std::isfinite(v)) continue;
    lo = any ? std::min(lo, v) : v;
    hi = any ? std::max(hi, v) : v;
    any = true;
  }
  if (!any) return h;
  const double first = std::floor(lo / bin_width);
  const double last = std::floor(hi / bin_width);
  h.origin = first * bin_width;
  h.counts.assign(static_cast<std::size_t>(last - first) + 1, 0);
  for (double v : x) {
    if (!std::isfinite(v)) continue;
    const auto idx = static_cast<std::size_t>(std::floor(v / bin_width) - first);
    ++h.counts[std::min(idx, h.counts.size() - 1)];
  }
  return h;
}

Histogram count_histogram(std::span<const std::int64_t> x) {
  Histogram h;
  h.origin = -0.5;
  h.bin_width = 1.0;
  std::int64_t hi = 0;
  for (auto v : x) {
    if (v < 0) throw InvalidArgument("count_histogram: counts must be >= 0");
    hi = std::max(hi, v);
  }
  h.counts.assign(static_cast<std::size_t>(hi) + 1, 0);
  for (auto v : x) ++h.counts[static_cast<std::size_t>(v)];
  return h;
}

GaussianFit fit_gaussian(const Histogram& hist) {
  // Weighted least squares of ln y = c0 + c1 x + c2 x^2 with weights y^2.
  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  double peak = 0.0, weighted_center = 0.0, total = 0.0;
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    const double y = static_cast<double>(hist.counts[i]);
    weighted_center += y * hist.center(i);
    total += y;
    peak = std::max(peak, y);
  }
  if (total <= 0.0) throw InvalidArgument("fit_gaussian: empty histogram");
  // Centre the abscissa for conditioning.
  const double x0 = weighted_center / total;
  std::size_t used = 0;
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    const double y = static_cast<double>(hist.counts[i]);
    if (y <= 0.0) continue;
    const double x = (hist.center(i) - x0) / hist.bin_width;
    const Eigen::Vector3d row(1.0, x, x * x);
    const double w = y * y;
    normal += w * row * row.transpose();
    rhs += w * std::log(y) * row;
    ++used;
  }
  if (used < 3) throw InvalidArgument("fit_gaussian: need at least three populated bins");
  const Eigen::Vector3d c = normal.ldlt().solve(rhs);
  if (!(c(2) < 0.0)) throw InvalidArgument("fit_gaussian: histogram is not peaked");
  GaussianFit g;
  g.sigma = std::sqrt(-1.0 / (2.0 * c(2))) * hist.bin_width;
  g.mean = x0 + (-c(1) / (2.0 * c(2))) * hist.bin_width;
  g.amplitude = std::exp(c(0) - c(1) * c(1) / (4.0 * c(2)));
  return g;
}

}  // namespace photonlock
