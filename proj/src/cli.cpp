#include "photonlock/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "photonlock/error.hpp"
#include "photonlock/experiments.hpp"
#include "photonlock/format.hpp"

namespace photonlock {
namespace {

/// Headline metrics printed after a successful run.
std::vector<std::string> summary_keys(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::long_term_stab:
      return {"sigma_rad", "sigma_unstabilized_rad", "skewness", "gaussian_fit_sigma_rad", "lock_loss_count"};
    case ExperimentKind::fringe_bs:
      return {"visibility_c", "visibility_d", "antiphase_error_rad"};
    case ExperimentKind::fringe_cpa:
      return {"visibility_c", "visibility_d", "visibility_combined", "relative_shift_rad", "absorption_at_min"};
    case ExperimentKind::switching:
      return {"ctr_mean", "ctr_sd", "car_mean", "car_sd", "switching_visibility", "ctr_gof_p", "car_gof_p"};
  }
  return {};
}

template <typename Fn>
int guarded(std::ostream& err, const std::string& context, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << context << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "error: " << context << ": " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << context << ": " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

std::filesystem::path default_output_dir(const std::filesystem::path& config_path, const RunConfig& config) {
  if (!config.output_dir.empty()) return config.output_dir;
  const char* env = std::getenv(kOutRootEnv);
  const std::filesystem::path root = env && *env ? env : "out";
  return root / config_path.stem();
}

int cmd_run(const std::filesystem::path& config_path, const std::filesystem::path& output_dir,
            const RunOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, config_path.string(), [&] {
    RunConfig config = parse_config(config_path);
    if (options.seed) {
      config.seed = *options.seed;
      config.validate();
    }
    const std::filesystem::path dir = output_dir.empty() ? default_output_dir(config_path, config) : output_dir;
    const ExperimentResult result = run_experiment(config);
    const auto files = write_outputs(result, dir);
    if (!options.quiet) {
      out << to_string(result.kind) << ": wrote " << files.size() << " files to " << dir.string() << '\n';
      for (const auto& key : summary_keys(result.kind)) {
        const auto it = result.metrics.find(key);
        if (it != result.metrics.end()) out << "  " << key << " = " << format_double(it->second) << '\n';
      }
    }
    return static_cast<int>(kExitOk);
  });
}

int cmd_validate(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, config_path.string(), [&] {
    const RunConfig config = parse_config(config_path);
    out << config_path.string() << ": ok (" << to_string(config.experiment) << ")\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_batch(const std::vector<std::filesystem::path>& configs, const std::filesystem::path& out_root,
              int jobs, const RunOptions& options, std::ostream& out, std::ostream& err) {
  if (configs.empty()) {
    err << "error: batch: no config files given\n";
    return kExitConfig;
  }
  if (jobs < 1) {
    err << "error: batch: --jobs must be >= 1\n";
    return kExitConfig;
  }
  std::set<std::string> stems;
  for (const auto& c : configs) {
    if (!stems.insert(c.stem().string()).second) {
      err << "error: batch: two configs share the name '" << c.stem().string()
          << "'; their output directories would collide\n";
      return kExitConfig;
    }
  }
  const std::filesystem::path root = out_root.empty() ? default_output_dir("x", RunConfig{}).parent_path() : out_root;

  struct Job {
    std::ostringstream out, err;
    int status = kExitOk;
  };
  std::vector<Job> results(configs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      results[i].status = cmd_run(configs[i], root / configs[i].stem(), options, results[i].out, results[i].err);
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(jobs), configs.size());
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  int status = kExitOk;
  for (auto& r : results) {
    out << r.out.str();
    err << r.err.str();
    status = std::max(status, r.status);
  }
  return status;
}

}  // namespace photonlock
