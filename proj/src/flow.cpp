#include "icl/flow.hpp"

#include <cmath>
#include <cstdio>

#include "icl/risk.hpp"

namespace icl {

namespace {

// Plain-matrix cache for the integrator: the RHS is evaluated four times per
// step and must not re-factorize anything.
struct FlowContext {
  explicit FlowContext(const TaskSpec& spec)
      : h(spec.h().matrix()),
        hpsih(h * spec.psi().matrix() * h),
        beta_star(spec.beta_star()),
        m(static_cast<double>(spec.m())) {
    const Eigen::MatrixXd& hs = spec.sqrt_h().matrix();
    h_omega_h = hs * omega(spec).matrix() * hs;  // H^{1/2} Omega H^{1/2}
  }

  FlowDerivative rhs(const FlowState& s) const {
    const Eigen::VectorXd delta = s.beta - beta_star;
    const Eigen::MatrixXd gh = s.gamma * h;
    const Eigen::MatrixXd hgh = h * gh;                                   // H Gamma H
    const Eigen::MatrixXd hgthg = h * s.gamma.transpose() * h * s.gamma;  // H Gamma^T H Gamma
    const Eigen::VectorXd hd = h * delta;

    FlowDerivative out;
    // H_Gamma delta without forming a PsdMatrix.
    const Eigen::VectorXd one_step_delta = delta - gh * delta;
    out.d_beta = -(h * one_step_delta - hgh.transpose() * one_step_delta +
                   hgthg.trace() / m * hd + hgthg * hd / m);

    const Eigen::MatrixXd hddh = hd * hd.transpose();
    out.d_gamma = -(h * s.gamma * h_omega_h - hpsih) - (m + 1.0) / m * (h * s.gamma) * hddh -
                  delta.dot(hd) / m * hgh + hddh;
    return out;
  }

  Eigen::MatrixXd h;
  Eigen::MatrixXd hpsih;
  Eigen::MatrixXd h_omega_h;
  Eigen::VectorXd beta_star;
  double m;
};

FlowSample make_sample(const TaskSpec& spec, const Eigen::MatrixXd& gamma_star,
                       const FlowState& init, const FlowState& s) {
  FlowSample out;
  out.t = s.t;
  out.state = s;
  out.excess_risk = excess_risk_gd_beta(spec, GdBetaParams{s.beta, s.gamma});
  out.beta_img_dist = project_image_vec(spec.h(), s.beta - spec.beta_star()).norm();
  out.gamma_img_dist = project_image_op(spec.h(), s.gamma - gamma_star).norm();
  out.beta_null_drift = project_null_vec(spec.h(), s.beta - init.beta).norm();
  out.gamma_null_drift = project_null_op(spec.h(), s.gamma - init.gamma).norm();
  out.rate_bound = beta_rate_bound(spec, s.t, init.beta);
  return out;
}

// Quadratic diagnostics overflow well before the state itself turns inf, so
// treat astronomically large states as divergence too.
bool usable(const FlowState& s) {
  return s.beta.allFinite() && s.gamma.allFinite() && s.beta.norm() < 1e70 &&
         s.gamma.norm() < 1e70;
}

FlowState rk4_step(const FlowContext& ctx, const FlowState& s, double dt) {
  const FlowDerivative k1 = ctx.rhs(s);
  FlowState probe{s.t, s.beta + dt / 2 * k1.d_beta, s.gamma + dt / 2 * k1.d_gamma};
  const FlowDerivative k2 = ctx.rhs(probe);
  probe = FlowState{s.t, s.beta + dt / 2 * k2.d_beta, s.gamma + dt / 2 * k2.d_gamma};
  const FlowDerivative k3 = ctx.rhs(probe);
  probe = FlowState{s.t, s.beta + dt * k3.d_beta, s.gamma + dt * k3.d_gamma};
  const FlowDerivative k4 = ctx.rhs(probe);

  FlowState next;
  next.t = s.t + dt;
  next.beta = s.beta + dt / 6.0 * (k1.d_beta + 2 * k2.d_beta + 2 * k3.d_beta + k4.d_beta);
  next.gamma = s.gamma + dt / 6.0 * (k1.d_gamma + 2 * k2.d_gamma + 2 * k3.d_gamma + k4.d_gamma);
  return next;
}

}  // namespace

FlowDerivative flow_rhs(const TaskSpec& spec, const FlowState& s) {
  const int d = spec.d();
  if (s.beta.size() != d || s.gamma.rows() != d || s.gamma.cols() != d) {
    throw DimensionError("flow_rhs: state shapes do not match the spec");
  }
  return FlowContext(spec).rhs(s);
}

double default_flow_dt(const TaskSpec& spec, const FlowState& init) {
  const double lmax_h = spec.h().max_eigenvalue();
  const double lmax_om = omega(spec).max_eigenvalue();
  const double offset = (init.beta - spec.beta_star()).squaredNorm();
  return std::min(0.05, 0.5 / (lmax_om * lmax_h + lmax_h * lmax_h * offset + 1.0));
}

FlowTrajectory integrate_flow(const TaskSpec& spec, const FlowState& init, double dt, double t_end,
                              int record_every) {
  if (!(dt > 0.0)) throw DomainError("integrate_flow: dt must be positive");
  if (!(t_end > dt)) throw DomainError("integrate_flow: T must exceed dt");
  if (record_every < 1) throw DomainError("integrate_flow: record_every must be >= 1");
  if (init.beta.size() != spec.d() || init.gamma.rows() != spec.d() ||
      init.gamma.cols() != spec.d()) {
    throw DimensionError("integrate_flow: initial state shapes do not match the spec");
  }
  if (!usable(init)) throw DomainError("integrate_flow: initial state is not finite");

  const FlowContext ctx(spec);
  const Eigen::MatrixXd gamma_star = optimal_gamma(spec);
  FlowState state = init;
  state.t = 0.0;

  FlowTrajectory traj;
  traj.samples.push_back(make_sample(spec, gamma_star, init, state));

  const auto full_steps = static_cast<long>(t_end / dt);
  const double remainder = t_end - static_cast<double>(full_steps) * dt;
  long step = 0;
  while (step < full_steps || (step == full_steps && remainder > 1e-12)) {
    const bool partial = step >= full_steps;
    FlowState next = rk4_step(ctx, state, partial ? remainder : dt);
    next.t = partial ? t_end : dt * static_cast<double>(step + 1);
    if (!usable(next)) {
      throw FlowDiverged("integrate_flow: non-finite state (dt too large for this spec)", state);
    }
    state = std::move(next);
    ++step;
    const bool is_last = partial || (step == full_steps && remainder <= 1e-12);
    if (step % record_every == 0 || is_last) {
      traj.samples.push_back(make_sample(spec, gamma_star, init, state));
    }
    if (is_last) break;
  }
  return traj;
}

double beta_rate_bound(const TaskSpec& spec, double t, const Eigen::VectorXd& beta0) {
  if (t < 0.0) throw DomainError("beta_rate_bound: t must be nonnegative");
  const double lambda = spec.h().min_positive_eigenvalue();  // throws when H = 0
  const double dist2 = project_image_vec(spec.h(), beta0 - spec.beta_star()).squaredNorm();
  return std::exp(-2.0 * lambda * t / (static_cast<double>(spec.m()) + 1.0)) * dist2;
}

const char* const kTrajectoryCsvHeader =
    "t,excess_risk,beta_img_dist,gamma_img_dist,beta_null_drift,gamma_null_drift,rate_bound";

std::string trajectory_csv_row(const FlowSample& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.17e,%.17e,%.17e,%.17e,%.17e,%.17e,%.17e", s.t, s.excess_risk,
                s.beta_img_dist, s.gamma_img_dist, s.beta_null_drift, s.gamma_null_drift,
                s.rate_bound);
  return buf;
}

}  // namespace icl
