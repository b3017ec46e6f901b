#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "icl/task.hpp"

namespace icl {

enum class Suite {
  kRiskEquivalence,
  kMinima,
  kGap,
  kFlow,
  kBayes,
  kMoments,
  kAll,
};

const char* suite_name(Suite s);
std::optional<Suite> parse_suite(const std::string& name);

/// Declarative description of one verification run. Parsed from a flat
/// key-value text file (one `key = value` or `key: value` pair per line,
/// '#' starts a comment). Keys:
///
///   suite       risk-equivalence | minima | gap | flow | bayes | moments | all
///   d, M        positive integers (defaults 2, 4)
///   H, Psi      covariance rule: identity | diag:v1,v2,... | random-psd:rank,seed
///   beta_star   zeros | const:c | list:v1,v2,...
///   sigma2      nonnegative float (default 1)
///   n_samples   Monte-Carlo budget (default 100000)
///   shards      Monte-Carlo shard count (default 16)
///   seed        required, no wall-clock fallback
///   reps        random parameter draws per family in risk-equivalence (default 3)
///   restarts    multi-start count for the gap suite (default 8)
///   dt, T       flow integration step and horizon (default 0 = auto)
///   flow_init   zero | optimum | random:seed (default zero)
///   record_every  flow recording stride (default 50)
///
/// Unknown keys are rejected; malformed values name the offending key.
struct ExperimentConfig {
  Suite suite = Suite::kAll;
  bool suite_set = false;
  int d = 2;
  int m = 4;
  std::string h_rule = "identity";
  std::string psi_rule = "identity";
  std::string beta_star_rule = "zeros";
  double sigma2 = 1.0;
  std::int64_t n_samples = 100000;
  int shards = 16;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int reps = 3;
  int restarts = 8;
  double dt = 0.0;  // 0 = stiffness-aware default
  double t_end = 0.0;  // 0 = long enough for the beta rate bound to pass 1e-12
  std::string flow_init = "zero";
  int record_every = 50;

  TaskSpec make_task_spec() const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

/// Covariance construction mini-grammar shared by the H and Psi keys.
PsdMatrix build_covariance(const std::string& rule, int d, const char* key);

/// Prior-mean construction rule.
Eigen::VectorXd build_beta_star(const std::string& rule, int d, const char* key);

}  // namespace icl
