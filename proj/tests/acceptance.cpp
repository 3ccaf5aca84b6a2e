// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "photonlock/analysis.hpp"
#include "photonlock/config.hpp"
#include "photonlock/control.hpp"
#include "photonlock/counting.hpp"
#include "photonlock/experiments.hpp"
#include "photonlock/optics.hpp"
#include "photonlock/rng.hpp"

namespace fs = std::filesystem;
using namespace photonlock;

namespace {

constexpr double kPi = std::numbers::pi;
const fs::path kConfigs = fs::path(PHOTONLOCK_SOURCE_DIR) / "configs";

// Tolerances, one block per criterion.
namespace tol {
// 1. Stabilization rms.
constexpr double kMaxSigma = 0.10;             // rad
constexpr double kMinUnstabilizedRms = 0.5;    // rad
constexpr double kCriterionDuration = 3600.0;  // s simulated
constexpr double kMaxRuntimeStab = 30.0;       // s wall clock
// 2. Histogram shape.
constexpr double kMaxAbsSkew = 0.3;
constexpr double kGaussianRmsRelTol = 0.15;
// 3. Splitter fringes.
constexpr double kMaxAntiphaseError = 0.05;  // rad
constexpr double kMinVisibility = 0.98;
constexpr double kMeanLevelSe = 3.0;
// 4. Ideal absorber fringes.
constexpr double kMaxInphaseError = 0.05;  // rad
constexpr double kMaxLevelSe = 3.0;
constexpr double kMinAbsorption = 0.98;
// 5. Imperfect absorber.
constexpr double kVisCLo = 0.86, kVisCHi = 0.92;
constexpr double kVisDLo = 0.83, kVisDHi = 0.89;
constexpr double kShiftTol = 0.1;  // rad about pi/3
constexpr double kCombinedTarget = 0.73, kCombinedTol = 0.05;
constexpr double kCombinedVsAnalytic = 0.03;  // simulated vs exact combined visibility
// 6. Switching.
constexpr double kCtrMeanLo = 7.5, kCtrMeanHi = 8.5;
constexpr double kCtrSdLo = 2.3, kCtrSdHi = 3.3;
constexpr double kCarMeanLo = 0.7, kCarMeanHi = 1.3;
constexpr double kSwitchVisLo = 0.73, kSwitchVisHi = 0.83;
constexpr double kMinGofP = 0.01;
constexpr double kMaxRuntimeSwitching = 60.0;  // s wall clock
// 7. Statistical core.
constexpr int kBatchWindows = 100000;
constexpr double kMomentZ = 5.0;  // standard errors
constexpr double kDispersionZ = 4.5;
constexpr double kMinSamplerGofP = 0.01;
constexpr int kConservationEvaluations = 1000000;
constexpr double kConservationTol = 1e-12;
// 8. Round trip.
constexpr double kRoundTripTol = 1e-9;
}  // namespace tol

struct Verdict {
  bool pass = true;
  std::string detail;
  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

std::string f(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool in(double v, double lo, double hi) { return v >= lo && v <= hi; }

// --- 1 and 2 ---------------------------------------------------------------

struct StabRuns {
  ExperimentResult hour;
  double hour_runtime = 0.0;
  ExperimentResult shipped;
};

StabRuns stab_runs() {
  StabRuns r;
  RunConfig cfg = parse_config(kConfigs / "stab_7h.cfg");
  r.shipped = run_experiment(cfg);
  cfg.stab_duration = tol::kCriterionDuration;
  cfg.unstabilized_duration = tol::kCriterionDuration;
  const auto t0 = std::chrono::steady_clock::now();
  r.hour = run_experiment(cfg);
  r.hour_runtime = seconds_since(t0);
  return r;
}

Verdict criterion1(const StabRuns& r) {
  Verdict v;
  const double unstab = r.hour.metric("sigma_unstabilized_rad");
  v.check(unstab >= tol::kMinUnstabilizedRms, "unstabilized rms " + f(unstab) + " >= 0.5");
  const double sigma = r.hour.metric("sigma_rad");
  v.check(sigma <= tol::kMaxSigma, "1 h sigma " + f(sigma) + " <= 0.10");
  v.check(r.hour.metric("lock_loss_count") == 0.0,
          "lock losses " + f(r.hour.metric("lock_loss_count")));
  v.check(r.hour_runtime <= tol::kMaxRuntimeStab, "runtime " + f(r.hour_runtime) + " s <= 30");
  const double long_sigma = r.shipped.metric("sigma_rad");
  v.check(long_sigma <= tol::kMaxSigma, "7 h sigma " + f(long_sigma) + " <= 0.10");
  return v;
}

Verdict criterion2(const StabRuns& r) {
  Verdict v;
  for (const auto* run : {&r.hour, &r.shipped}) {
    const std::string tag = run == &r.hour ? "1 h " : "7 h ";
    const double skew = run->metric("skewness");
    v.check(std::abs(skew) <= tol::kMaxAbsSkew, tag + "|skew| " + f(std::abs(skew)) + " <= 0.3");
    const double g = run->metric("gaussian_fit_sigma_rad");
    for (const char* ref : {"sigma_rad", "sample_sd_rad"}) {
      const double s = run->metric(ref);
      const double rel = std::abs(g - s) / s;
      v.check(rel <= tol::kGaussianRmsRelTol,
              tag + "gauss sigma " + f(g) + " vs " + ref + " " + f(s) + " (rel " + f(rel) + ")");
    }
  }
  return v;
}

// --- 3 and 4 ---------------------------------------------------------------

Verdict criterion3() {
  Verdict v;
  const RunConfig cfg = parse_config(kConfigs / "fringe_bs.cfg");
  const auto r = run_experiment(cfg);
  const double n = cfg.mean_photons;
  v.check(n == 1e4 && std::abs(cfg.scan.delta_phi - 0.1 * kPi) < 1e-12, "N = 1e4, step 0.1 pi");
  const double anti = r.metric("antiphase_error_rad");
  v.check(anti <= tol::kMaxAntiphaseError, "antiphase error " + f(anti) + " <= 0.05");
  for (const char* port : {"c", "d"}) {
    const std::string p(port);
    const double vis = r.metric("visibility_" + p);
    v.check(vis >= tol::kMinVisibility, "V_" + p + " " + f(vis) + " >= 0.98");
    const double off = r.metric("offset_" + p), se = r.metric("offset_" + p + "_se");
    v.check(std::abs(off - n / 2) <= tol::kMeanLevelSe * se,
            "mean_" + p + " " + f(off) + " within 3 SE (" + f(se) + ") of N/2");
  }
  return v;
}

Verdict criterion4() {
  Verdict v;
  const RunConfig cfg = parse_config(kConfigs / "fringe_cpa_ideal.cfg");
  const auto r = run_experiment(cfg);
  const double n = cfg.mean_photons;
  v.check(r.device && r.device->is_ideal_cpa(), "ideal device");
  const double inphase = r.metric("inphase_error_rad");
  v.check(inphase <= tol::kMaxInphaseError, "in-phase error " + f(inphase) + " <= 0.05");
  const double top = r.metric("combined_max"), se = r.metric("combined_max_se");
  v.check(std::abs(top - n) <= tol::kMaxLevelSe * se,
          "total at fitted max " + f(top) + " within 3 SE (" + f(se) + ") of N");
  const double absorption = r.metric("absorption_at_min");
  v.check(absorption >= tol::kMinAbsorption, "absorption at fitted min " + f(absorption) + " >= 0.98");
  return v;
}

// --- 5 ---------------------------------------------------------------------

/// Combined visibility of a device by dense evaluation of its output law.
double combined_visibility_by_grid(const FourPortDevice& dev) {
  double hi = -1.0, lo = 2.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double phi = -kPi + 2 * kPi * i / n;
    // Field amplitudes at the two outputs, written out directly.
    const std::complex<double> e = std::polar(1.0, phi);
    const std::complex<double> c = (dev.t + dev.r * e) / std::sqrt(2.0);
    const std::complex<double> d = (dev.r + dev.t * e) / std::sqrt(2.0);
    const double total = std::norm(c) + std::norm(d) + dev.background_c + dev.background_d;
    hi = std::max(hi, total);
    lo = std::min(lo, total);
  }
  return (hi - lo) / (hi + lo);
}

Verdict criterion5() {
  Verdict v;
  const RunConfig cfg = parse_config(kConfigs / "fringe_cpa.cfg");
  const auto r = run_experiment(cfg);
  v.check(cfg.device_targets && cfg.device_targets->visibility_c == 0.89 &&
              cfg.device_targets->visibility_d == 0.86 &&
              std::abs(cfg.device_targets->relative_shift - kPi / 3) < 1e-12,
          "targets (0.89, 0.86, pi/3)");
  const double vc = r.metric("visibility_c"), vd = r.metric("visibility_d");
  v.check(in(vc, tol::kVisCLo, tol::kVisCHi), "V_c " + f(vc) + " in [0.86, 0.92]");
  v.check(in(vd, tol::kVisDLo, tol::kVisDHi), "V_d " + f(vd) + " in [0.83, 0.89]");
  const double shift = r.metric("relative_shift_rad");
  v.check(std::abs(std::abs(shift) - kPi / 3) <= tol::kShiftTol, "shift " + f(shift) + " = pi/3 +- 0.1");
  const double comb = r.metric("visibility_combined");
  v.check(std::abs(comb - tol::kCombinedTarget) <= tol::kCombinedTol,
          "V_comb " + f(comb) + " = 0.73 +- 0.05");
  if (!r.device) {
    v.check(false, "device missing from result");
    return v;
  }
  const double exact = combined_visibility_by_grid(*r.device);
  v.check(std::abs(comb - exact) <= tol::kCombinedVsAnalytic,
          "vs analytic " + f(exact) + " within 0.03");
  return v;
}

// --- 6 ---------------------------------------------------------------------

Verdict criterion6() {
  Verdict v;
  const RunConfig cfg = parse_config(kConfigs / "switching_300.cfg");
  v.check(cfg.switching_cycles == 300 && cfg.ctr_mean == 8.0 && cfg.car_mean == 1.0,
          "300 cycles, rates 8/1");
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_experiment(cfg);
  const double runtime = seconds_since(t0);
  const double ctr = r.metric("ctr_mean"), ctr_sd = r.metric("ctr_sd");
  const double car = r.metric("car_mean"), vis = r.metric("switching_visibility");
  v.check(in(ctr, tol::kCtrMeanLo, tol::kCtrMeanHi), "CTR mean " + f(ctr) + " in [7.5, 8.5]");
  v.check(in(ctr_sd, tol::kCtrSdLo, tol::kCtrSdHi), "CTR sd " + f(ctr_sd) + " in [2.3, 3.3]");
  v.check(in(car, tol::kCarMeanLo, tol::kCarMeanHi), "CAR mean " + f(car) + " in [0.7, 1.3]");
  v.check(in(vis, tol::kSwitchVisLo, tol::kSwitchVisHi), "visibility " + f(vis) + " in [0.73, 0.83]");
  // Goodness of fit recomputed from the raw per-cycle records.
  std::vector<std::int64_t> ctr_counts, car_counts;
  for (const auto& rec : r.switching) {
    (rec.regime == Regime::ctr ? ctr_counts : car_counts).push_back(rec.coincidences());
  }
  v.check(ctr_counts.size() == 300 && car_counts.size() == 300, "300 + 300 records");
  const double p_ctr = poisson_gof(ctr_counts).p_value, p_car = poisson_gof(car_counts).p_value;
  v.check(p_ctr > tol::kMinGofP, "CTR gof p " + f(p_ctr) + " > 0.01");
  v.check(p_car > tol::kMinGofP, "CAR gof p " + f(p_car) + " > 0.01");
  v.check(runtime <= tol::kMaxRuntimeSwitching, "runtime " + f(runtime) + " s <= 60");
  return v;
}

// --- 7 ---------------------------------------------------------------------

/// Moment and chi-square checks of one batch of Poisson(mean) counts.
void check_batch(Verdict& v, const std::string& tag, const std::vector<std::int64_t>& x, double mean) {
  const double n = static_cast<double>(x.size());
  double s1 = 0.0;
  for (auto k : x) s1 += static_cast<double>(k);
  const double m = s1 / n;
  double s2 = 0.0;
  for (auto k : x) s2 += (static_cast<double>(k) - m) * (static_cast<double>(k) - m);
  const double var = s2 / (n - 1.0);
  const bool mean_ok = std::abs(m - mean) <= tol::kMomentZ * std::sqrt(mean / n);
  // Index of dispersion against its chi-square(n - 1) null.
  const double z = (var * (n - 1.0) / m - (n - 1.0)) / std::sqrt(2.0 * (n - 1.0));
  const double p = poisson_gof(x).p_value;
  const bool ok = mean_ok && std::abs(z) <= tol::kDispersionZ && p > tol::kMinSamplerGofP;
  if (!ok) {
    v.check(false, tag + " mean " + f(m) + "/" + f(mean) + " z " + f(z) + " p " + f(p));
  }
}

FourPortDevice random_device(Rng& rng) {
  FourPortDevice d;
  const double split = rng.uniform();
  d.t = std::polar(std::sqrt(split), 2.0 * kPi * rng.uniform());
  d.r = std::polar(std::sqrt(1.0 - split), 2.0 * kPi * rng.uniform());
  const double scale = std::sqrt((0.3 + 0.7 * rng.uniform()) / d.peak_detection());
  d.t *= scale;
  d.r *= scale;
  const double room = std::max(0.0, 1.0 - d.peak_detection());
  d.background_c = 0.5 * room * rng.uniform();
  d.background_d = 0.5 * room * rng.uniform();
  return d;
}

Verdict criterion7() {
  Verdict v;
  int batches = 0;
  Rng rng(2024);
  for (double photons : {1.0, 8.0, 100.0, 1000.0, 10000.0}) {
    for (double phi : {0.0, 0.7, -2.0}) {
      SourceSpec laser;
      laser.mean_photons_per_window = photons;
      const auto probs = bs_probabilities(phi);
      std::vector<std::int64_t> c(tol::kBatchWindows), d(tol::kBatchWindows);
      for (int i = 0; i < tol::kBatchWindows; ++i) {
        const auto w = sample_window_laser(laser, probs, rng);
        c[i] = w.n_c;
        d[i] = w.n_d;
      }
      const std::string tag = "laser N=" + f(photons) + " phi=" + f(phi);
      if (probs.p_c * photons > 0.05) check_batch(v, tag + " c", c, photons * probs.p_c), ++batches;
      if (probs.p_d * photons > 0.05) check_batch(v, tag + " d", d, photons * probs.p_d), ++batches;
    }
  }
  const auto cpa = FourPortDevice::ideal_cpa();
  for (double phi : {kPi, 2.0, 0.5}) {
    SourceSpec pairs;
    pairs.kind = SourceKind::heralded_pair;
    pairs.mean_photons_per_window = 14.0;
    pairs.heralding_efficiency = 0.5;
    pairs.accidental_coincidence_mean = 1.0;
    const auto probs = device_probabilities(cpa, phi);
    std::vector<std::int64_t> coinc(tol::kBatchWindows);
    bool conserved = true;
    for (int i = 0; i < tol::kBatchWindows; ++i) {
      const auto w = sample_window_heralded(pairs, probs, rng);
      coinc[i] = w.coinc_ch + w.coinc_dh;
      conserved &= w.coinc_ch + w.coinc_dh + w.heralded_lost == w.n_h;
    }
    const double mean = 14.0 * 0.5 * (probs.p_c + probs.p_d) + 1.0;
    check_batch(v, "heralded phi=" + f(phi), coinc, mean);
    ++batches;
    if (!conserved) v.check(false, "heralded bookkeeping at phi=" + f(phi));
  }
  v.check(v.pass, std::to_string(batches) + " batches of " + std::to_string(tol::kBatchWindows) +
                      " windows (mean, dispersion, chi-square)");

  double worst = 0.0;
  Rng drng(77);
  std::vector<double> phases(1000);
  for (int block = 0; block < tol::kConservationEvaluations / 1000; ++block) {
    const auto dev = random_device(drng);
    for (auto& p : phases) p = -20.0 + 40.0 * drng.uniform();
    const auto table = device_probabilities(dev, phases);
    for (std::size_t i = 0; i < phases.size(); ++i) {
      const auto s = device_probabilities(dev, phases[i]);
      worst = std::max({worst, std::abs(s.p_c + s.p_d + s.p_abs - 1.0),
                        std::abs(table.p_c[i] + table.p_d[i] + table.p_abs[i] - 1.0)});
    }
  }
  v.check(worst <= tol::kConservationTol,
          "conservation over " + std::to_string(tol::kConservationEvaluations) + " (device, phi) max err " +
              f(worst));
  return v;
}

// --- 8 ---------------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = "'" + std::string(PHOTONLOCK_CLI) + "' " + args + " >/dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return out;
}

Verdict criterion8() {
  Verdict v;
  double worst = 0.0;
  for (ControlMode mode : {ControlMode::bs_midfringe, ControlMode::cpa_combined}) {
    for (int slope : {+1, -1}) {
      ControllerConfig cfg;
      cfg.mode = mode;
      cfg.slope_sign = slope;
      ControllerState s;
      s.calibrated_N = 1e4;
      s.slope_sign = slope;
      s.phi_st = stabilization_phase(cfg);
      for (int k = -999; k <= 999; ++k) {
        // Interior of the monotonic branch around phi_st (half-width pi/2).
        const double phi = s.phi_st + (kPi / 2) * k / 1000.0;
        const auto probs = mode == ControlMode::bs_midfringe ? bs_probabilities(phi) : cpa_probabilities(phi);
        const auto [c, d] = expected_counts(probs, s.calibrated_N);
        const double back = phase_from_counts(c, d, s, mode);
        worst = std::max(worst, std::abs(wrap_phase(back - phi)));
      }
    }
  }
  v.check(worst <= tol::kRoundTripTol, "retrieval round trip max err " + f(worst));

  const fs::path scratch = fs::temp_directory_path() / "photonlock_acceptance";
  fs::remove_all(scratch);
  int configs = 0;
  bool identical = true;
  for (const auto& e : fs::directory_iterator(kConfigs)) {
    if (e.path().extension() != ".cfg") continue;
    ++configs;
    const std::string stem = e.path().stem().string();
    const fs::path a = scratch / "a" / stem, b = scratch / "b" / stem;
    const int sa = run_cli("run -q '" + e.path().string() + "' '" + a.string() + "'");
    const int sb = run_cli("run -q '" + e.path().string() + "' '" + b.string() + "'");
    const auto ta = tree(a);
    if (sa != 0 || sb != 0 || ta.empty() || ta != tree(b)) {
      identical = false;
      v.check(false, stem + " differs or failed (exit " + std::to_string(sa) + "/" + std::to_string(sb) + ")");
    }
  }
  fs::remove_all(scratch);
  v.check(identical && configs >= 4, std::to_string(configs) + " shipped configs byte-identical across runs");
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Verdict()> run;
  };
  StabRuns stab;
  bool stab_ok = true;
  std::string stab_error;
  try {
    stab = stab_runs();
  } catch (const std::exception& e) {
    stab_ok = false;
    stab_error = e.what();
  }
  const auto needs_stab = [&](Verdict (*fn)(const StabRuns&)) {
    return [&, fn] {
      if (!stab_ok) {
        Verdict v;
        v.check(false, "long run failed: " + stab_error);
        return v;
      }
      return fn(stab);
    };
  };
  const std::vector<Criterion> criteria{
      {"1 stabilization rms", needs_stab(criterion1)},
      {"2 stabilized histogram shape", needs_stab(criterion2)},
      {"3 splitter fringes", criterion3},
      {"4 ideal absorber fringes", criterion4},
      {"5 imperfect absorber", criterion5},
      {"6 switching", criterion6},
      {"7 statistical core", criterion7},
      {"8 round trip and determinism", criterion8},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << c.name << ": " << v.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
