#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "photonlock/counting.hpp"
#include "photonlock/error.hpp"
#include "photonlock/optics.hpp"
#include "photonlock/rng.hpp"

using namespace photonlock;

namespace {

struct Summary {
  double mean;
  double variance;  // unbiased
  std::size_t n;
};

Summary summarize(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return {m, s / static_cast<double>(x.size() - 1), x.size()};
}

/// Poisson index-of-dispersion statistic standardized with its chi-square
/// (n - 1 dof) null: approximately N(0, 1) for Poisson samples.
double dispersion_z(const Summary& s) {
  const double dof = static_cast<double>(s.n - 1);
  const double d = s.variance * dof / s.mean;
  return (d - dof) / std::sqrt(2.0 * dof);
}

SourceSpec laser(double n, double dark = 0.0) {
  SourceSpec s;
  s.mean_photons_per_window = n;
  s.dark_count_mean_per_window = dark;
  return s;
}

SourceSpec pairs(double mean, double eta, double acc = 0.0, double dark = 0.0) {
  SourceSpec s;
  s.kind = SourceKind::heralded_pair;
  s.mean_photons_per_window = mean;
  s.heralding_efficiency = eta;
  s.accidental_coincidence_mean = acc;
  s.dark_count_mean_per_window = dark;
  return s;
}

}  // namespace

class LaserMoments : public ::testing::TestWithParam<std::tuple<double, double>> {};

TEST_P(LaserMoments, PoissonMeanVarianceAndDispersion) {
  const auto [photons, phi] = GetParam();
  Rng rng(static_cast<std::uint64_t>(photons * 7 + phi * 1000 + 17));
  const auto probs = bs_probabilities(phi);
  const int windows = 100000;
  std::vector<double> c(windows), d(windows);
  for (int i = 0; i < windows; ++i) {
    const auto w = sample_window_laser(laser(photons), probs, rng);
    c[i] = static_cast<double>(w.n_c);
    d[i] = static_cast<double>(w.n_d);
  }
  for (const auto& [counts, p] : {std::pair{&c, probs.p_c}, std::pair{&d, probs.p_d}}) {
    const auto s = summarize(*counts);
    const double mu = photons * p;
    EXPECT_NEAR(s.mean, mu, 5.0 * std::sqrt(mu / windows) + 1e-12);
    if (mu > 0.0) EXPECT_LT(std::abs(dispersion_z(s)), 4.5) << "mean " << mu;
  }
}

INSTANTIATE_TEST_SUITE_P(Rates, LaserMoments,
                         ::testing::Combine(::testing::Values(1.0, 20.0, 1000.0, 10000.0),
                                            ::testing::Values(0.0, 0.9, -1.2)));

TEST(LaserCounts, ZeroCountProbabilityMatchesPoisson) {
  Rng rng(3);
  const int windows = 100000;
  int zeros = 0;
  for (int i = 0; i < windows; ++i) zeros += sample_window_laser(laser(2.0), bs_probabilities(0.0), rng).n_c == 0;
  const double p0 = std::exp(-1.0);
  EXPECT_NEAR(static_cast<double>(zeros) / windows, p0, 5.0 * std::sqrt(p0 * (1 - p0) / windows));
}

TEST(LaserCounts, PortsAreIndependent) {
  Rng rng(4);
  const int windows = 100000;
  double sc = 0, sd = 0, scd = 0;
  for (int i = 0; i < windows; ++i) {
    const auto w = sample_window_laser(laser(100.0), bs_probabilities(0.3), rng);
    sc += w.n_c;
    sd += w.n_d;
    scd += static_cast<double>(w.n_c) * w.n_d;
  }
  const double mc = sc / windows, md = sd / windows;
  const double corr = (scd / windows - mc * md) / std::sqrt(mc * md);
  EXPECT_NEAR(corr, 0.0, 5.0 / std::sqrt(windows));
}

TEST(LaserCounts, DarkCountsAddToBothPorts) {
  Rng rng(5);
  const int windows = 50000;
  double c = 0, d = 0;
  for (int i = 0; i < windows; ++i) {
    const auto w = sample_window_laser(laser(10.0, 2.0), cpa_probabilities(0.0), rng);
    c += w.n_c;
    d += w.n_d;
  }
  EXPECT_NEAR(c / windows, 2.0, 5.0 * std::sqrt(2.0 / windows));
  EXPECT_NEAR(d / windows, 2.0, 5.0 * std::sqrt(2.0 / windows));
}

TEST(LaserCounts, ZeroPhotonsZeroCounts) {
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const auto w = sample_window_laser(laser(0.0), bs_probabilities(1.0), rng);
    EXPECT_EQ(w.n_c + w.n_d, 0);
  }
}

TEST(HeraldedCounts, BookkeepingHoldsEveryWindow) {
  Rng rng(7);
  for (int i = 0; i < 20000; ++i) {
    const double phi = -3.0 + 6.0 * rng.uniform();
    const auto w = sample_window_heralded(pairs(6.0, 0.6, 0.4, 0.3), cpa_probabilities(phi), rng);
    ASSERT_EQ(w.coinc_ch + w.coinc_dh + w.heralded_lost, w.n_h);
    ASSERT_LE(w.coinc_ch, w.n_c);
    ASSERT_LE(w.coinc_dh, w.n_d);
  }
}

TEST(HeraldedCounts, CoincidenceMeanIsThinnedPoisson) {
  // Coincidences per window ~ Poisson(pairs * eta * (p_c + p_d) + accidentals).
  Rng rng(8);
  const auto probs = cpa_probabilities(2.0);
  const double mean = 12.0, eta = 0.5, acc = 0.7;
  const int windows = 100000;
  std::vector<double> coinc(windows), herald(windows);
  for (int i = 0; i < windows; ++i) {
    const auto w = sample_window_heralded(pairs(mean, eta, acc), probs, rng);
    coinc[i] = static_cast<double>(w.coinc_ch + w.coinc_dh);
    herald[i] = static_cast<double>(w.n_h);
  }
  const double mu = mean * eta * (probs.p_c + probs.p_d) + acc;
  const auto s = summarize(coinc);
  EXPECT_NEAR(s.mean, mu, 5.0 * std::sqrt(mu / windows));
  EXPECT_LT(std::abs(dispersion_z(s)), 4.5);
  const auto h = summarize(herald);
  EXPECT_NEAR(h.mean, mean * eta + acc, 5.0 * std::sqrt((mean * eta + acc) / windows));
}

TEST(HeraldedCounts, IdealAbsorptionLeavesOnlyAccidentals) {
  Rng rng(9);
  const int windows = 50000;
  double coinc = 0, singles = 0;
  for (int i = 0; i < windows; ++i) {
    const auto w = sample_window_heralded(pairs(20.0, 0.8, 1.0, 0.5), cpa_probabilities(0.0), rng);
    coinc += static_cast<double>(w.coinc_ch + w.coinc_dh);
    singles += static_cast<double>(w.n_c + w.n_d);
  }
  EXPECT_NEAR(coinc / windows, 1.0, 5.0 * std::sqrt(1.0 / windows));
  // Singles: accidental clicks plus dark counts on both detectors.
  EXPECT_NEAR(singles / windows, 2.0, 5.0 * std::sqrt(2.0 / windows));
}

TEST(HeraldedCounts, UnheraldedPhotonsReachSingles) {
  Rng rng(10);
  const int windows = 50000;
  double singles = 0, coinc = 0;
  for (int i = 0; i < windows; ++i) {
    const auto w = sample_window_heralded(pairs(10.0, 0.25), bs_probabilities(0.0), rng);
    singles += static_cast<double>(w.n_c + w.n_d);
    coinc += static_cast<double>(w.coinc_ch + w.coinc_dh);
  }
  EXPECT_NEAR(singles / windows, 10.0, 5.0 * std::sqrt(10.0 / windows));
  EXPECT_NEAR(coinc / windows, 2.5, 5.0 * std::sqrt(2.5 / windows));
}

TEST(Counting, SourceKindMismatchAndValidation) {
  Rng rng(11);
  EXPECT_THROW(sample_window_laser(pairs(1.0, 1.0), bs_probabilities(0.0), rng), InvalidArgument);
  EXPECT_THROW(sample_window_heralded(laser(1.0), bs_probabilities(0.0), rng), InvalidArgument);
  EXPECT_THROW(sample_window_laser(laser(-1.0), bs_probabilities(0.0), rng), InvalidArgument);
  EXPECT_THROW(sample_window_heralded(pairs(1.0, 1.5), bs_probabilities(0.0), rng), InvalidArgument);
  EXPECT_THROW(sample_window_laser(laser(1.0), PortProbabilities{1.2, 0.0, -0.2}, rng), InvalidArgument);
}

TEST(Counting, ExpectedCounts) {
  const auto [c, d] = expected_counts(bs_probabilities(std::asin(0.5)), 1000.0);
  EXPECT_NEAR(c, 750.0, 1e-9);
  EXPECT_NEAR(d, 250.0, 1e-9);
  EXPECT_THROW(expected_counts(bs_probabilities(0.0), -1.0), InvalidArgument);
}

TEST(Counting, WindowsCsv) {
  std::ostringstream out;
  CountWindow w;
  w.n_c = 5;
  w.n_d = 6;
  w.n_h = 2;
  w.coinc_ch = 1;
  w.coinc_dh = 1;
  const std::vector<TimedWindow> rows{{0, 0.0, w}, {1, 0.024, w}};
  write_windows_csv(out, rows);
  EXPECT_EQ(out.str(),
            "window_idx,time_s,n_c,n_d,n_h,coinc_ch,coinc_dh\n"
            "0,0,5,6,2,1,1\n"
            "1,0.024,5,6,2,1,1\n");
}

TEST(Counting, SameSeedSameWindows) {
  Rng a(12), b(12);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(sample_window_laser(laser(500.0), bs_probabilities(0.1 * i), a),
              sample_window_laser(laser(500.0), bs_probabilities(0.1 * i), b));
    ASSERT_EQ(sample_window_heralded(pairs(8.0, 0.5, 1.0), cpa_probabilities(0.1 * i), a),
              sample_window_heralded(pairs(8.0, 0.5, 1.0), cpa_probabilities(0.1 * i), b));
  }
}
