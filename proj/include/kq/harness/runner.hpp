#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "kq/harness/config.hpp"

namespace kq::harness {

inline constexpr const char* kToolVersion = "0.3.0";

struct RunOptions {
  std::vector<std::string> experiments;  // empty: the config's list
  bool no_cache = false;
  std::ostream* log = nullptr;
};

struct RunReport {
  std::vector<std::filesystem::path> tables;
  std::filesystem::path summary_path;
  nlohmann::json summary;
  std::vector<std::string> failures;

  bool passed() const { return failures.empty(); }
  /// 0 when every enabled check passed, 1 otherwise.
  int exit_code() const { return passed() ? 0 : 1; }
};

/// Runs the experiments and writes <output_dir>/<experiment>.csv and summary.json.
/// Throws ConfigError / CapabilityError before any computation for invalid input.
RunReport run(const ExperimentConfig& config, const RunOptions& options = {});

/// Command-line entry point; returns the process exit status (0 pass, 1 check failure, 2 usage or config error).
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace kq::harness
