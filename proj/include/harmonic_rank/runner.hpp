#pragma once

#include "harmonic_rank/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace hrank {

using Json = nlohmann::ordered_json;

/// Version string baked in at configure time.
std::string toolkit_version();

struct RunConfig {
  std::string command;
  std::string model = "h2";
  std::uint64_t seed = 1;
  std::optional<double> tol;
  std::string out_dir;
  std::optional<unsigned> threads;
  /// Upper bound for every horizon and grid end.
  double r_max = 64.0;

  // density
  double tmax = 20.0;
  double step = 0.05;
  std::size_t seeds = 1;
  // rank / anosov
  double eps_rank = 1e-6;
  double rho_tol = 1e-3;
  double horizon = 10.0;
  std::size_t fit_samples = 8;
  // hyperbolicity
  std::vector<double> scales{4, 8, 16, 32};
  std::size_t quadruples = 10000;
  std::size_t triangles = 0;
  std::size_t side_samples = 9;
  std::size_t mc = 100000;
  double delta_in = 1.0;
  double volume_r = 10.0;
  // identities
  std::size_t identity_samples = 20;
  double identity_range = 4.0;
  // equivalence
  std::vector<std::string> gallery;
};

const std::vector<std::string>& default_gallery();

/// Reads a JSON config: top-level "command", "model" (or "model_file", a
/// text file holding the spec), "seed", "tol", "out", "threads", "r_max" and
/// per-command tables "density", "rank", "anosov", "hyperbolicity",
/// "identities", "equivalence". Throws Error(ConfigError).
RunConfig load_config(const std::string& path);
/// Applies the same keys from an in-memory object on top of `base`.
RunConfig apply_config(const Json& j, RunConfig base = {});

/// Throws Error(ConfigError) on a violated invariant.
void validate(const RunConfig& cfg);

/// Summary record: every field is {"value", "source"} or {"skipped"}.
class Summary {
 public:
  Summary(const std::string& command, const std::string& model);

  void set(const std::string& field, Json value, const std::string& source);
  void skip(const std::string& field, const std::string& reason);
  bool has(const std::string& field) const;
  const Json& json() const { return j_; }
  Json& json() { return j_; }

  static const std::vector<std::string>& fields();

 private:
  Json j_;
};

struct CommandResult {
  Json summary;
  int exit_code = 0;
  std::vector<std::string> files;
};

enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitNumerics = 3, kExitMismatch = 4 };

CommandResult cmd_density(const RunConfig& cfg);
CommandResult cmd_rank(const RunConfig& cfg);
CommandResult cmd_anosov(const RunConfig& cfg);
CommandResult cmd_hyperbolicity(const RunConfig& cfg);
CommandResult cmd_identities(const RunConfig& cfg);
CommandResult cmd_equivalence(const RunConfig& cfg);
CommandResult cmd_report(const RunConfig& cfg);

/// Dispatches on cfg.command; errors propagate as Error.
CommandResult run_command(const RunConfig& cfg);

/// Maps an exception from run_command to an exit status.
int exit_code_for(const std::exception& e);

/// Copy without wall-clock entries, for determinism comparisons.
Json strip_wall_clock(const Json& j);

/// Writes columnar text: "# key: value" metadata lines, a "# columns:" line,
/// then tab-separated rows.
void write_columns(const std::string& path, const std::vector<std::pair<std::string, std::string>>& meta,
                   const std::vector<std::string>& names, const std::vector<std::vector<double>>& columns);

}  // namespace hrank
