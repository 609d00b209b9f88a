#pragma once

#include <string>

namespace mtqs {

inline constexpr const char* kVersion = "0.1.0";

struct RunOptions {
  std::string config_path;
  std::string output_dir = ".";
  int threads = 1;
  long seed = 0;  // reserved; no stochastic components in this release
};

/// Executes the workflow named by the config's "command" key. Reports and
/// data files land in output_dir; a run_meta.json sidecar carries the
/// non-deterministic metadata. Throws ValidationError when a verification
/// bound is exceeded (exit code 2 at the CLI), other exceptions map to
/// exit code 1.
void run_workflow(const RunOptions& opts);

}  // namespace mtqs
