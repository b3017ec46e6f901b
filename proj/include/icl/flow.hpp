#pragma once

#include <Eigen/Core>
#include <vector>

#include "icl/errors.hpp"
#include "icl/task.hpp"

namespace icl {

struct FlowState {
  double t = 0.0;
  Eigen::VectorXd beta;
  Eigen::MatrixXd gamma;
};

struct FlowDerivative {
  Eigen::VectorXd d_beta;
  Eigen::MatrixXd d_gamma;
};

/// Convergence diagnostics attached to every recorded state.
struct FlowSample {
  double t = 0.0;
  double excess_risk = 0.0;
  double beta_img_dist = 0.0;     // |P_Im(H)(beta - beta*)|
  double gamma_img_dist = 0.0;    // |P_Z(Gamma - Gamma*)|_F
  double beta_null_drift = 0.0;   // |P_Null(H)(beta - beta(0))|
  double gamma_null_drift = 0.0;  // |P_Zperp(Gamma - Gamma(0))|_F
  double rate_bound = 0.0;        // exponential bound on beta_img_dist^2
  FlowState state;
};

struct FlowTrajectory {
  std::vector<FlowSample> samples;

  const FlowSample& front() const { return samples.front(); }
  const FlowSample& back() const { return samples.back(); }
};

/// Thrown when integration produces a non-finite state (step too large);
/// carries the last finite state reached.
class FlowDiverged : public Error {
 public:
  FlowDiverged(std::string msg, FlowState last)
      : Error(std::move(msg)), last_finite(std::move(last)) {}
  FlowState last_finite;
};

/// Right-hand side of the training flow in the form whose rates are certified:
/// the negative half-gradient of the excess risk.
///   d beta  = -H_Gamma (beta - beta*)
///   d Gamma = -(H Gamma H^{1/2} Omega H^{1/2} - H Psi H)
///             - ((M+1)/M) H Gamma H dd^T H - (1/M) (d^T H d) H Gamma H
///             + H dd^T H,          with d = beta - beta*.
FlowDerivative flow_rhs(const TaskSpec& spec, const FlowState& s);

/// Stiffness-aware default step, user-overridable.
double default_flow_dt(const TaskSpec& spec, const FlowState& init);

/// Classical fixed-step fourth-order integration from init to time T,
/// recording every record_every steps (plus the initial and final states).
FlowTrajectory integrate_flow(const TaskSpec& spec, const FlowState& init, double dt, double t_end,
                              int record_every);

/// exp(-2 lambda_min_pos(H) t / (M+1)) * |P_Im(H)(beta0 - beta*)|^2.
double beta_rate_bound(const TaskSpec& spec, double t, const Eigen::VectorXd& beta0);

/// Column header and one row per sample, matching the trajectory CSV schema.
extern const char* const kTrajectoryCsvHeader;
std::string trajectory_csv_row(const FlowSample& s);

}  // namespace icl
