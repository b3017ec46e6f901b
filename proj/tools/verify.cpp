// Command-line driver: runs one named verification suite against a declarative
// config and writes machine-readable reports.
//
//   verify <suite> --config <path> [--out <dir>] [--seed <u64>]
//
// Exit code 0: every check passed. 1: at least one check failed (or the run
// itself errored). 2: invalid configuration or usage.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "icl/config.hpp"
#include "icl/errors.hpp"
#include "icl/suites.hpp"

int main(int argc, char** argv) {
  CLI::App app{"verification suites for in-context linear regression predictors"};
  app.get_formatter()->column_width(30);

  std::string suite_arg;
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed_override = 0;
  bool seed_given = false;

  app.add_option("suite", suite_arg,
                 "one of: risk-equivalence, minima, gap, flow, bayes, moments, all")
      ->required();
  app.add_option("--config", config_path, "path to the key-value config file")->required();
  app.add_option("--out", out_dir, "output directory for reports (default: .)");
  app.add_option("--seed", seed_override, "override the config seed")
      ->each([&](const std::string&) { seed_given = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto suite = icl::parse_suite(suite_arg);
    if (!suite) {
      std::fprintf(stderr, "unknown suite '%s'\n", suite_arg.c_str());
      return 2;
    }
    icl::ExperimentConfig cfg = icl::load_config(config_path);
    cfg.suite = *suite;
    if (seed_given) cfg.seed = seed_override;

    const icl::SuiteReport report = icl::run_suite(cfg, out_dir);
    for (const icl::CheckRecord& r : report.records) {
      std::printf("[%s] %s%s%s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                  r.note.empty() ? "" : " -- ", r.note.c_str());
    }
    std::printf("%s: %s\n", report.suite.c_str(), report.overall_pass() ? "pass" : "fail");
    return report.overall_pass() ? 0 : 1;
  } catch (const icl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
