#include "photonlock/experiments.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "photonlock/error.hpp"
#include "photonlock/format.hpp"
#include "photonlock/plant.hpp"

namespace photonlock {
namespace {

using Json = nlohmann::ordered_json;

PlantConfig plant_config(const RunConfig& cfg) {
  PlantConfig pc;
  pc.noise = cfg.noise;
  pc.noise.seed = cfg.noise_seed();
  pc.device = cfg.resolved_device();
  pc.laser.kind = SourceKind::attenuated_laser;
  pc.laser.mean_photons_per_window = cfg.mean_photons;
  pc.laser.dark_count_mean_per_window = cfg.dark_counts;
  pc.window_length = cfg.window_length;
  pc.initial_phase = cfg.initial_phase;
  pc.counting_seed = cfg.counting_seed();
  return pc;
}

void append_windows(std::vector<TimedWindow>& out, const std::vector<WindowRecord>& records) {
  for (const auto& r : records) out.push_back({r.index, r.time, r.counts});
}

std::vector<double> finite_values(const std::vector<double>& v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (double x : v) {
    if (std::isfinite(x)) out.push_back(x);
  }
  return out;
}

void run_long_term(const RunConfig& cfg, ExperimentResult& res) {
  Plant plant(plant_config(cfg));
  StabilizationLoop loop(plant, cfg.controller, cfg.loop);
  loop.calibrate_and_lock();
  append_windows(res.series, loop.acquisition_log());
  const std::size_t acquisition_windows = loop.acquisition_log().size();

  const StabilizedRun stab = run_stabilized(loop, cfg.stab_duration, cfg.record_decimation, true);
  const double phi_st = loop.state().phi_st;
  append_windows(res.series, stab.recorded);
  for (const auto& r : stab.recorded) res.phase_series.push_back({r.time, r.retrieved_phase, true});

  const std::vector<double> stabilized = finite_values(stab.retrieved_phase);
  const Moments m = moments(stabilized);
  const Histogram hist = make_histogram(stabilized, kPhaseHistogramBin);
  const GaussianFit gauss = fit_gaussian(hist);
  res.histograms.push_back({"stabilized_phase", hist});

  auto& mt = res.metrics;
  mt["sigma_rad"] = stab.sigma;
  mt["sample_sd_rad"] = std::sqrt(m.variance);
  mt["mean_offset_rad"] = m.mean - phi_st;
  mt["skewness"] = m.skewness;
  mt["gaussian_fit_sigma_rad"] = gauss.sigma;
  mt["gaussian_fit_mean_rad"] = gauss.mean;
  mt["lock_loss_count"] = static_cast<double>(stab.lock_losses);
  mt["windows_stabilized"] = static_cast<double>(stab.windows);
  mt["stabilized_duration_s"] = static_cast<double>(stab.windows) * cfg.window_length;
  mt["phi_st_rad"] = phi_st;
  mt["calibrated_photons"] = loop.state().calibrated_N;
  mt["acquisition_windows"] = static_cast<double>(acquisition_windows);

  if (cfg.unstabilized_duration > 0.0) {
    const StabilizedRun free =
        run_stabilized(loop, cfg.unstabilized_duration, cfg.record_decimation, false);
    append_windows(res.series, free.recorded);
    for (const auto& r : free.recorded) res.phase_series.push_back({r.time, r.retrieved_phase, false});
    const std::vector<double> unstabilized = finite_values(free.retrieved_phase);
    res.histograms.push_back({"unstabilized_phase", make_histogram(unstabilized, kPhaseHistogramBin)});
    mt["sigma_unstabilized_rad"] = free.sigma;
    mt["windows_unstabilized"] = static_cast<double>(free.windows);
  }

  if (cfg.psd_duration > 0.0) {
    PhaseNoiseSpec spec = cfg.noise;
    spec.seed = cfg.psd_seed();
    const NoiseTrace trace = synthesize_noise(spec, cfg.psd_duration, cfg.window_length);
    res.psd = estimate_psd(trace);
    mt["psd_fraction_below_cutoff"] = power_fraction_below(res.psd, cfg.noise.cutoff_frequency);
    mt["psd_integrated_power_rad2"] = integrated_power(res.psd);
  }
}

struct PortFits {
  FringeStats c, d, combined;
};

PortFits fit_ports(const std::vector<FringePoint>& points, FringeForm form) {
  std::vector<FringeSample> c, d, sum;
  for (const auto& p : points) {
    c.push_back({p.phi, static_cast<double>(p.n_c)});
    d.push_back({p.phi, static_cast<double>(p.n_d)});
    sum.push_back({p.phi, static_cast<double>(p.n_c + p.n_d)});
  }
  return {fit_fringe(c, form), fit_fringe(d, form), fit_fringe(sum, form)};
}

void put_port_metrics(std::map<std::string, double>& mt, const std::string& port, const FringeStats& s) {
  mt["visibility_" + port] = s.visibility;
  mt["raw_visibility_" + port] = s.raw_visibility;
  mt["fitted_phase_" + port] = s.fitted_phase;
  mt["fitted_phase_" + port + "_se"] = s.phase_se;
  mt["offset_" + port] = s.fitted_offset;
  mt["offset_" + port + "_se"] = s.offset_se;
  mt["amplitude_" + port] = s.fitted_amplitude;
  mt["amplitude_" + port + "_se"] = s.amplitude_se;
  mt["n_max_" + port] = s.n_max;
  mt["n_min_" + port] = s.n_min;
  mt["raw_max_" + port] = s.raw_max;
  mt["raw_min_" + port] = s.raw_min;
}

void run_fringe(const RunConfig& cfg, ExperimentResult& res) {
  Plant plant(plant_config(cfg));
  StabilizationLoop loop(plant, cfg.controller, cfg.loop);
  loop.calibrate_and_lock();
  append_windows(res.series, loop.acquisition_log());
  const FringeScanResult scan = fringe_scan(cfg.scan, loop);
  append_windows(res.series, scan.windows);
  res.fringe = scan.points;

  const bool splitter = cfg.experiment == ExperimentKind::fringe_bs;
  const PortFits fits = fit_ports(scan.points, splitter ? FringeForm::sin : FringeForm::cos);
  auto& mt = res.metrics;
  put_port_metrics(mt, "c", fits.c);
  put_port_metrics(mt, "d", fits.d);
  const double shift = wrap_phase(fits.d.fitted_phase - fits.c.fitted_phase);
  mt["relative_shift_rad"] = shift;
  mt["source_photons"] = cfg.mean_photons;
  mt["calibrated_photons"] = loop.state().calibrated_N;
  mt["lock_loss_count"] = static_cast<double>(scan.lock_losses);
  mt["scan_points"] = static_cast<double>(scan.points.size());

  if (splitter) {
    mt["antiphase_error_rad"] = std::abs(wrap_phase(shift - std::numbers::pi));
    mt["expected_mean_level"] = cfg.mean_photons / 2.0;
    double total = 0.0;
    for (const auto& p : scan.points) total += static_cast<double>(p.n_c + p.n_d);
    mt["mean_total_counts"] = total / static_cast<double>(scan.points.size());
    return;
  }

  mt["inphase_error_rad"] = std::abs(shift);
  mt["visibility_combined"] = fits.combined.visibility;
  mt["raw_visibility_combined"] = fits.combined.raw_visibility;
  mt["combined_max"] = fits.combined.n_max;
  mt["combined_max_se"] = fits.combined.n_max_se;
  mt["combined_min"] = fits.combined.n_min;
  mt["combined_min_se"] = fits.combined.n_min_se;
  mt["absorption_at_min"] = 1.0 - fits.combined.n_min / cfg.mean_photons;

  const FourPortDevice dev = std::get<FourPortDevice>(cfg.resolved_device());
  res.device = dev;
  const AnalyticFringes an = analytic_fringes(dev);
  mt["visibility_c_analytic"] = an.visibility_c;
  mt["visibility_d_analytic"] = an.visibility_d;
  mt["visibility_combined_analytic"] = an.visibility_combined;
  mt["relative_shift_analytic_rad"] = an.relative_shift;
  mt["peak_detection"] = dev.peak_detection();
}

void run_switching(const RunConfig& cfg, ExperimentResult& res) {
  const FourPortDevice dev = std::get<FourPortDevice>(cfg.resolved_device());
  res.device = dev;
  const HeraldCalibration cal = calibrate_herald(dev, cfg.ctr_mean, cfg.car_mean, cfg.herald_efficiency);

  PlantConfig pc = plant_config(cfg);
  SourceSpec herald;
  herald.kind = SourceKind::heralded_pair;
  herald.mean_photons_per_window = cal.pairs_per_window;
  herald.heralding_efficiency = cfg.herald_efficiency;
  herald.dark_count_mean_per_window = cfg.dark_counts;
  herald.accidental_coincidence_mean = cal.accidental_mean;
  pc.herald = herald;

  Plant plant(pc);
  StabilizationLoop loop(plant, cfg.controller, cfg.loop);
  loop.calibrate_and_lock();
  append_windows(res.series, loop.acquisition_log());
  const SwitchingRunResult run = switching_run(cfg.switching_cycles, cfg.stabilize_windows, loop);
  append_windows(res.series, run.windows);
  res.switching = run.records;

  std::vector<std::int64_t> car, ctr;
  for (const auto& r : run.records) (r.regime == Regime::car ? car : ctr).push_back(r.coincidences());
  const auto as_double = [](const std::vector<std::int64_t>& v) {
    return std::vector<double>(v.begin(), v.end());
  };
  const std::vector<double> car_d = as_double(car), ctr_d = as_double(ctr);
  const double car_mean = moments(car_d).mean, ctr_mean = moments(ctr_d).mean;

  auto& mt = res.metrics;
  mt["car_mean"] = car_mean;
  mt["ctr_mean"] = ctr_mean;
  mt["car_sd"] = car_d.size() > 1 ? sample_sd(car_d) : 0.0;
  mt["ctr_sd"] = ctr_d.size() > 1 ? sample_sd(ctr_d) : 0.0;
  mt["switching_visibility"] = ctr_mean + car_mean > 0.0 ? (ctr_mean - car_mean) / (ctr_mean + car_mean) : 0.0;
  mt["cycles"] = static_cast<double>(cfg.switching_cycles);
  mt["lock_loss_count"] = static_cast<double>(run.lock_losses);
  mt["calibrated_photons"] = loop.state().calibrated_N;
  mt["herald_pairs_per_window"] = cal.pairs_per_window;
  mt["herald_accidental_mean"] = cal.accidental_mean;
  mt["transmission_car"] = device_probabilities(dev, 0.0).p_c + device_probabilities(dev, 0.0).p_d;
  mt["transmission_ctr"] =
      device_probabilities(dev, std::numbers::pi).p_c + device_probabilities(dev, std::numbers::pi).p_d;
  if (car.size() >= 50) {
    const GoodnessOfFit g_car = poisson_gof(car), g_ctr = poisson_gof(ctr);
    mt["car_gof_statistic"] = g_car.statistic;
    mt["car_gof_p"] = g_car.p_value;
    mt["car_gof_dof"] = g_car.dof;
    mt["ctr_gof_statistic"] = g_ctr.statistic;
    mt["ctr_gof_p"] = g_ctr.p_value;
    mt["ctr_gof_dof"] = g_ctr.dof;
  }
  res.histograms.push_back({"car_coincidences", count_histogram(car)});
  res.histograms.push_back({"ctr_coincidences", count_histogram(ctr)});
}

template <typename E>
[[noreturn]] void rethrow_as(const std::string& prefix, const E& e) {
  throw E(prefix + e.what());
}

Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

double ExperimentResult::metric(const std::string& name) const {
  const auto it = metrics.find(name);
  if (it == metrics.end()) throw InvalidArgument("no metric named '" + name + "'");
  return it->second;
}

HeraldCalibration calibrate_herald(const FourPortDevice& device, double ctr_mean, double car_mean,
                                   double heralding_efficiency) {
  if (!(ctr_mean > car_mean) || !(car_mean >= 0.0)) {
    throw InvalidArgument("calibrate_herald: requires ctr_mean > car_mean >= 0");
  }
  if (!(heralding_efficiency > 0.0 && heralding_efficiency <= 1.0)) {
    throw InvalidArgument("calibrate_herald: heralding efficiency must be in (0, 1]");
  }
  const auto t_car = device_probabilities(device, 0.0);
  const auto t_ctr = device_probabilities(device, std::numbers::pi);
  const double low = t_car.p_c + t_car.p_d, high = t_ctr.p_c + t_ctr.p_d;
  if (!(high > low)) throw InfeasibleTarget("calibrate_herald: device has no transmission contrast");
  // Detected heralded photons per window scale with T(phi); accidentals add a
  // phase-independent floor.
  const double detected_per_transmission = (ctr_mean - car_mean) / (high - low);
  const double accidental = car_mean - detected_per_transmission * low;
  if (accidental < -1e-12) {
    throw InfeasibleTarget("calibrate_herald: requested CTR/CAR contrast exceeds the device's");
  }
  return {detected_per_transmission / heralding_efficiency, std::max(0.0, accidental)};
}

ExperimentResult run_experiment(ExperimentKind kind, const RunConfig& config) {
  RunConfig cfg = config;
  cfg.experiment = kind;
  ExperimentResult res;
  res.kind = kind;
  res.seed = cfg.seed;
  const std::string prefix = std::string(to_string(kind)) + ": ";
  try {
    cfg.validate();
    res.config = cfg;
    switch (kind) {
      case ExperimentKind::long_term_stab: run_long_term(cfg, res); break;
      case ExperimentKind::fringe_bs:
      case ExperimentKind::fringe_cpa: run_fringe(cfg, res); break;
      case ExperimentKind::switching: run_switching(cfg, res); break;
    }
  } catch (const ConfigError& e) {
    throw ConfigError(e.key(), prefix + e.message(), e.line());
  } catch (const LockLost& e) {
    rethrow_as(prefix, e);
  } catch (const InfeasibleTarget& e) {
    rethrow_as(prefix, e);
  } catch (const InvalidArgument& e) {
    rethrow_as(prefix, e);
  } catch (const IoError& e) {
    rethrow_as(prefix, e);
  } catch (const Error& e) {
    rethrow_as(prefix, e);
  }
  return res;
}

std::string result_document(const ExperimentResult& r) {
  Json doc;
  doc["schema_version"] = kResultSchemaVersion;
  doc["kind"] = to_string(r.kind);
  doc["seed"] = r.seed;
  Json config = Json::object();
  {
    std::istringstream lines(serialize_config(r.config));
    std::string line;
    while (std::getline(lines, line)) {
      const auto eq = line.find(" = ");
      config[line.substr(0, eq)] = line.substr(eq + 3);
    }
  }
  doc["config"] = config;
  Json metrics = Json::object();
  for (const auto& [k, v] : r.metrics) metrics[k] = json_number(v);
  doc["metrics"] = metrics;
  if (r.device) {
    doc["device"] = {{"t_re", r.device->t.real()},
                     {"t_im", r.device->t.imag()},
                     {"r_re", r.device->r.real()},
                     {"r_im", r.device->r.imag()},
                     {"background_c", r.device->background_c},
                     {"background_d", r.device->background_d}};
  }
  if (!r.fringe.empty()) {
    Json rows = Json::array();
    for (const auto& p : r.fringe) {
      rows.push_back({{"n", p.n}, {"phi_rad", p.phi}, {"n_c", p.n_c}, {"n_d", p.n_d}, {"lock_lost", p.lock_lost}});
    }
    doc["fringe"] = rows;
  }
  Json hists = Json::object();
  for (const auto& h : r.histograms) {
    Json bins = Json::array();
    for (std::size_t i = 0; i < h.histogram.counts.size(); ++i) {
      bins.push_back(Json::array({h.histogram.center(i), h.histogram.counts[i]}));
    }
    hists[h.name] = {{"bin_width", h.histogram.bin_width}, {"bins", bins}};
  }
  doc["histograms"] = hists;
  Json files = Json::array({"result.json", "resolved.cfg", "windows.csv"});
  if (!r.phase_series.empty()) files.push_back("phase.csv");
  if (!r.psd.empty()) files.push_back("psd.csv");
  if (!r.fringe.empty()) files.push_back("fringe.csv");
  if (!r.switching.empty()) files.push_back("switching.csv");
  doc["files"] = files;
  return doc.dump(2) + "\n";
}

std::vector<std::string> write_outputs(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'" +
                  (ec ? ": " + ec.message() : std::string()));
  }
  std::vector<std::string> written;
  const auto emit = [&](const std::string& name, const std::string& content) {
    write_file(dir / name, content);
    written.push_back(name);
  };
  emit("result.json", result_document(r));
  emit("resolved.cfg", serialize_config(r.config));
  {
    std::ostringstream out;
    write_windows_csv(out, r.series);
    emit("windows.csv", out.str());
  }
  if (!r.phase_series.empty()) {
    std::ostringstream out;
    out << "time_s,phase_rad,stabilized\n";
    for (const auto& s : r.phase_series) {
      out << format_double(s.time) << ',' << format_double(s.retrieved_phase) << ',' << (s.stabilized ? 1 : 0)
          << '\n';
    }
    emit("phase.csv", out.str());
  }
  if (!r.psd.empty()) {
    std::ostringstream out;
    write_psd_csv(out, r.psd);
    emit("psd.csv", out.str());
  }
  if (!r.fringe.empty()) {
    std::ostringstream out;
    out << "n,phi_rad,n_c,n_d,lock_lost,relock_windows\n";
    for (const auto& p : r.fringe) {
      out << p.n << ',' << format_double(p.phi) << ',' << p.n_c << ',' << p.n_d << ',' << (p.lock_lost ? 1 : 0)
          << ',' << p.relock_windows << '\n';
    }
    emit("fringe.csv", out.str());
  }
  if (!r.switching.empty()) {
    std::ostringstream out;
    out << "cycle,regime,coinc_ch,coinc_dh,n_h,n_c,n_d,lock_lost\n";
    for (const auto& s : r.switching) {
      out << s.cycle << ',' << to_string(s.regime) << ',' << s.counts.coinc_ch << ',' << s.counts.coinc_dh << ','
          << s.counts.n_h << ',' << s.counts.n_c << ',' << s.counts.n_d << ',' << (s.lock_lost ? 1 : 0) << '\n';
    }
    emit("switching.csv", out.str());
  }
  return written;
}

}  // namespace photonlock
