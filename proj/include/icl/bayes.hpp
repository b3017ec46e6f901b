#pragma once

#include <Eigen/Core>

#include "icl/task.hpp"

namespace icl {

/// Closed-form rate of the Bayes / optimal one-step-GD risk: phi holds the
/// nonincreasing eigenvalues of Psi^{1/2} H Psi^{1/2}, phi_bar the effective
/// regularization (tr + sigma2)/M, and rate = sum_i min(phi_bar, phi_i).
struct BayesRate {
  Eigen::VectorXd phi;
  double phi_bar = 0.0;
  double rate = 0.0;
};

/// Posterior-mean prediction under the Gaussian prior:
/// x^T beta* + x^T Psi^{1/2} (Psi^{1/2} X^T X Psi^{1/2} + sigma2 I)^{-1}
///   Psi^{1/2} X^T (y - X beta*).
/// With sigma2 = 0 the inverse is the Moore-Penrose pseudo-inverse.
double bayes_predict(const TaskSpec& spec, const Prompt& p);

BayesRate bayes_rate(const TaskSpec& spec);

}  // namespace icl
