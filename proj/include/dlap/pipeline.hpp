// Command pipelines behind the command-line driver. Each command writes its
// artifacts into the output directory and returns a named pass/fail result.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dlap/config.hpp"
#include "dlap/conjugate.hpp"

namespace dlap {

struct SuiteResult {
  std::string name;
  bool pass = true;
  std::string detail;
};

struct PipelineOptions {
  std::string out_dir;
  std::uint64_t seed = kDefaultSeed;
  int threads = 1;
  bool dump_matrices = false;
};

std::string model_id(const DissipativeModel& m);

// Gaussian packet exp(-(x - x0)^2 / (2 w^2) + i k0 x) times the lowest
// transverse mode, in symmetrized coordinates, unit norm.
Vec gaussian_packet(const DissipativeModel& m, double x0, double width, double k0);

SuiteResult cmd_build(const RunConfig& cfg, const PipelineOptions& opts);
SuiteResult cmd_mourre(const RunConfig& cfg, const PipelineOptions& opts);
SuiteResult cmd_lap(const RunConfig& cfg, const PipelineOptions& opts);
SuiteResult cmd_quadratic(const RunConfig& cfg, const PipelineOptions& opts);
SuiteResult cmd_smoothing(const RunConfig& cfg, const PipelineOptions& opts);
SuiteResult cmd_evolve(const RunConfig& cfg, const PipelineOptions& opts);

// Runs every suite; the summary lists one line per suite.
std::vector<SuiteResult> cmd_check_all(const RunConfig& cfg, const PipelineOptions& opts);

}  // namespace dlap
