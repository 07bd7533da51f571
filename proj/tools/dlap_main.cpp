// Command-line driver. Exit codes: 0 success, 1 numerical-suite failure,
// 2 configuration or usage error.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "dlap/pipeline.hpp"

namespace {

bool is_usage_error(dlap::ErrorKind k) {
  using dlap::ErrorKind;
  return k == ErrorKind::Config || k == ErrorKind::Io || k == ErrorKind::InvalidArgument ||
         k == ErrorKind::ParameterOutOfRange || k == ErrorKind::NoOriginNode ||
         k == ErrorKind::NegativeAbsorption || k == ErrorKind::BadNesting;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for dissipative Schrodinger operators"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool dump = false;
  app.add_option("--config", config_path, "Run configuration file")->required();
  app.add_option("--out", out_dir, "Output directory (overrides run.out)");
  app.add_option("--seed", seed, "Random seed (overrides run.seed)");
  app.add_option("--threads", threads, "Worker threads (overrides run.threads)")
      ->check(CLI::PositiveNumber);

  auto* build = app.add_subcommand("build", "Build the model and write a spectrum summary");
  build->add_flag("--dump", dump, "Also write H0, Theta and A as triplet files");
  app.add_subcommand("mourre", "Mourre certificates, one CSV row per interval J");
  app.add_subcommand("lap", "Weighted resolvent sweep with plateau and Hölder statistics");
  app.add_subcommand("smoothing", "Kato smoothing constant, time integrals and Davies statistic");
  app.add_subcommand("evolve", "Cayley evolution of a Gaussian packet");
  app.add_subcommand("check-all", "Run every suite; nonzero exit if any fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const dlap::RunConfig cfg = dlap::RunConfig::load(config_path);
    dlap::PipelineOptions opts;
    opts.out_dir = out_dir.empty() ? cfg.out_dir : out_dir;
    opts.seed = seed.value_or(cfg.seed);
    opts.threads = threads.value_or(cfg.threads);
    opts.dump_matrices = dump;

    const std::string cmd = app.get_subcommands().front()->get_name();
    std::vector<dlap::SuiteResult> results;
    if (cmd == "build") results.push_back(dlap::cmd_build(cfg, opts));
    else if (cmd == "mourre") results.push_back(dlap::cmd_mourre(cfg, opts));
    else if (cmd == "lap") results.push_back(dlap::cmd_lap(cfg, opts));
    else if (cmd == "smoothing") results.push_back(dlap::cmd_smoothing(cfg, opts));
    else if (cmd == "evolve") results.push_back(dlap::cmd_evolve(cfg, opts));
    else results = dlap::cmd_check_all(cfg, opts);

    int code = 0;
    for (const auto& r : results) {
      std::cout << r.name << ": " << (r.pass ? "PASS" : "FAIL") << " (" << r.detail << ")\n";
      if (!r.pass) {
        std::cerr << "suite failed: " << r.name << '\n';
        code = 1;
      }
    }
    return code;
  } catch (const dlap::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_usage_error(e.kind()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
