#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "photonlock/config.hpp"

namespace photonlock {

/// Process exit statuses of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,   ///< unreadable, malformed or invalid configuration
  kExitRuntime = 2,  ///< the experiment itself failed (e.g. lock could not be acquired)
  kExitIo = 3,       ///< outputs could not be written
};

/// Environment variable naming the default output root.
inline constexpr const char* kOutRootEnv = "PHOTONLOCK_OUT_ROOT";

struct RunOptions {
  std::optional<std::uint64_t> seed;  ///< overrides the config's seed
  bool quiet = false;                 ///< suppress the success summary
};

/// Output directory when none is given on the command line: the config's
/// output.dir, else <root>/<config file stem> with root taken from
/// PHOTONLOCK_OUT_ROOT or "out".
std::filesystem::path default_output_dir(const std::filesystem::path& config_path, const RunConfig& config);

/// Parses the config, runs the experiment and writes its outputs. An empty
/// `output_dir` selects default_output_dir(). Diagnostics go to `err`.
int cmd_run(const std::filesystem::path& config_path, const std::filesystem::path& output_dir,
            const RunOptions& options, std::ostream& out, std::ostream& err);

/// Exit 0 when the config is valid, else kExitConfig with the first violated
/// rule on `err`. Writes nothing to disk.
int cmd_validate(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);

/// Runs several configs on up to `jobs` worker threads, each into
/// <out_root>/<config stem>. Output is reported in argument order. Returns the
/// largest exit status of the individual runs.
int cmd_batch(const std::vector<std::filesystem::path>& configs, const std::filesystem::path& out_root,
              int jobs, const RunOptions& options, std::ostream& out, std::ostream& err);

}  // namespace photonlock
