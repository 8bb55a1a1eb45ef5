#pragma once

#include <string>

#include "mkvlab/config.hpp"
#include "mkvlab/table.hpp"

namespace mkv {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // I/O and anything unexpected
  kExitConfig = 2,
  kExitBlowUp = 3,
  kExitFinding = 4,
};

struct RunResult {
  int code = kExitOk;
  std::string message;  // error text, empty on success
  Summary summary;
  std::string report;   // human-readable lines for stdout
};

/// Runs cfg.experiment and writes its CSVs and summary.txt under cfg.out.
/// Never throws; errors map to exit codes.
RunResult run_experiment(const RunConfig& cfg);

/// W_p between two sample files of equal size; prints cost and distance.
RunResult run_wasserstein(const std::string& file_a, const std::string& file_b, double p,
                          const std::string& out_dir = {});

/// Number of whitespace-separated columns on the first data line.
int sample_file_dim(const std::string& path);

}  // namespace mkv
