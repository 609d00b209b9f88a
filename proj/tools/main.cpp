// Command-line front end; links the shared C API only.

#include <CLI11.hpp>
#include <cstdio>

#include "mtqs/mtqs.h"

int main(int argc, char** argv) {
  CLI::App app{std::string("mtqs ") + mtqs_version() +
               " — multi-time open-quantum-system workflows"};

  std::string config;
  std::string output = ".";
  int threads = 1;
  long seed = 0;

  app.add_option("--config", config,
                 "JSON workflow configuration (its \"command\" key selects "
                 "one of: fit-bath, simulate, multitime, verify-lemma1, "
                 "verify-lemma2, verify-theorem, spectrum, wick-check)")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--output", output, "directory for reports and data files");
  app.add_option("--threads", threads, "worker threads for batch evaluation")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", seed,
                 "reserved; no stochastic components in this release")
      ->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);

  const int status = mtqs_run(config.c_str(), output.c_str(), threads, seed);
  if (status == MTQS_OK) {
    std::printf("ok: outputs written to %s\n", output.c_str());
  } else if (status == MTQS_VALIDATION_FAILED) {
    std::fprintf(stderr, "validation failed: %s\n", mtqs_last_error());
  } else {
    std::fprintf(stderr, "error: %s\n", mtqs_last_error());
  }
  return status;
}
