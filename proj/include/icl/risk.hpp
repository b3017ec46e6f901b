#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>

#include "icl/linalg.hpp"
#include "icl/predictors.hpp"
#include "icl/task.hpp"

namespace icl {

/// Monte-Carlo estimate with an optional closed-form companion value.
struct RiskReport {
  double estimate = 0.0;
  double std_err = 0.0;
  std::int64_t n_samples = 0;
  std::optional<double> closed_form;
};

using Predictor = std::function<double(const Prompt&)>;

/// Omega = ((M+1)/M) H^{1/2} Psi H^{1/2} + ((tr(H Psi) + sigma2)/M) I.
/// Strictly positive definite whenever tr(H Psi) + sigma2 > 0; otherwise
/// throws DomainError ("Omega singular").
PsdMatrix omega(const TaskSpec& spec);

/// Risk-minimizing matrix stepsize Gamma* = Psi H^{1/2} Omega^{-1} H^{-1/2}.
Eigen::MatrixXd optimal_gamma(const TaskSpec& spec);

/// Minimal ICL risk over the GD-beta class (equals the LTB minimum):
/// sigma2 + tr(S (I - S Omega^{-1})) with S = H^{1/2} Psi H^{1/2}.
double min_risk_gd_beta(const TaskSpec& spec);

/// Effective curvature of the initialization direction:
/// H_Gamma = (I - Gamma H)^T H (I - Gamma H) + (tr(H Gamma^T H Gamma)/M) H
///           + (1/M) H Gamma^T H Gamma H.
PsdMatrix h_gamma(const TaskSpec& spec, const Eigen::MatrixXd& gamma);

/// Exact excess risk of a GD-beta model over the class minimum.
double excess_risk_gd_beta(const TaskSpec& spec, const GdBetaParams& p);

/// Exact ICL risk of a reduced LSA model (includes the sigma2 floor).
double risk_lsa_closed(const TaskSpec& spec, const LsaParamsReduced& p);

/// Exact ICL risk of a reduced LTB model (includes the sigma2 floor).
double risk_ltb_closed(const TaskSpec& spec, const LtbParamsReduced& p);

/// Mean squared prediction error over n fresh prompts. The sample budget is
/// split into `shards` equal pieces, each driven by substream (seed, shard),
/// and merged in shard order: the result depends only on (seed, shards).
RiskReport monte_carlo_risk(const TaskSpec& spec, const Predictor& f, std::int64_t n,
                            std::uint64_t seed, int shards = 16);

/// Paired comparison under common random prompts: estimate of
/// E[(f_a - y)^2 - (f_b - y)^2] with its standard error.
RiskReport monte_carlo_risk_diff(const TaskSpec& spec, const Predictor& f_a, const Predictor& f_b,
                                 std::int64_t n, std::uint64_t seed, int shards = 16);

/// Lower bound on inf LSA risk minus inf LTB risk:
/// max{ 2/(3(M+1)), (tr(H Psi)+sigma2)^2 / ((M+1)^2 tr((H Psi)^2)) } |beta*|_H^2.
/// When tr((H Psi)^2) = 0 only the first branch applies.
double gap_lower_bound(const TaskSpec& spec);

struct LsaMinimizeResult {
  LsaParamsReduced params;
  double risk = 0.0;
};

/// Multi-start minimization of risk_lsa_closed by plain gradient descent with
/// central-difference gradients (step 1e-6 (1+|theta|)) and Armijo
/// backtracking (c = 1e-4, shrink 0.5), stopping at gradient norm <= 1e-8 or
/// 1e4 iterations. Restart 0 starts from the one-step-GD plug-in
/// (u_last = 1, U11 = Gamma*^T); the rest start from random parameters on
/// substream (seed, restart). Returns the best local minimum found.
LsaMinimizeResult minimize_lsa_risk(const TaskSpec& spec, int restarts, std::uint64_t seed);

/// Scale-aware default tolerance for the optimality checkers.
double default_optimality_tol(const TaskSpec& spec);

/// True iff beta lies in beta* + Null(H) and Gamma in Gamma* + Null(H (x) H),
/// both within tol.
bool check_gd_beta_optimality(const TaskSpec& spec, const GdBetaParams& p, double tol);

/// Optimality conditions for a reduced LTB model. Returns nullopt when
/// rank(H^{1/2} Psi^{1/2}) < 2, where the characterization does not apply.
std::optional<bool> check_ltb_optimality(const TaskSpec& spec, const LtbParamsReduced& p,
                                         double tol);

/// E[X^T X A X^T X] = M tr(H A) H + M(M+1) H A H for symmetric A and M iid
/// rows ~ N(0, H). Throws DomainError when A is not symmetric within 1e-10.
Eigen::MatrixXd fourth_moment_closed(const PsdMatrix& h, const Eigen::MatrixXd& a, int m);

}  // namespace icl
