#pragma once

#include <optional>
#include <string>
#include <vector>

#include "icl/config.hpp"

namespace icl {

/// One named verification check. `bound` is the acceptance threshold the
/// value was compared against, when there is one.
struct CheckRecord {
  std::string name;
  std::optional<double> closed_form;
  std::optional<double> estimate;
  std::optional<double> std_err;
  std::optional<double> bound;
  bool pass = true;
  std::string note;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckRecord> records;

  bool overall_pass() const;
};

/// Execute the configured suite deterministically and, when out_dir is
/// non-empty, write <suite>.report.json, <suite>.records.csv and (for flow)
/// trajectory.csv into it.
SuiteReport run_suite(const ExperimentConfig& cfg, const std::string& out_dir);

std::string report_to_json(const SuiteReport& report);
std::string records_to_csv(const SuiteReport& report);

}  // namespace icl
