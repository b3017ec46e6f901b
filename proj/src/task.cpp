#include "icl/task.hpp"

#include <cmath>
#include <utility>

#include "icl/errors.hpp"

namespace icl {

TaskSpec::TaskSpec(int d, int m, PsdMatrix h, PsdMatrix psi, Eigen::VectorXd beta_star,
                   double sigma2)
    : d_(d),
      m_(m),
      h_(std::move(h)),
      psi_(std::move(psi)),
      beta_star_(std::move(beta_star)),
      sigma2_(sigma2),
      sqrt_h_(h_.principal_sqrt()),
      sqrt_psi_(psi_.principal_sqrt()),
      tr_h_psi_((h_.matrix() * psi_.matrix()).trace()) {
  if (d_ < 1) throw DimensionError("TaskSpec: d must be >= 1");
  if (m_ < 1) throw DimensionError("TaskSpec: M must be >= 1");
  if (h_.dim() != d_ || psi_.dim() != d_ || beta_star_.size() != d_) {
    throw DimensionError("TaskSpec: H, Psi and beta_star must all have dimension d");
  }
  if (sigma2_ < 0.0 || !std::isfinite(sigma2_)) {
    throw DomainError("TaskSpec: sigma2 must be finite and nonnegative");
  }
}

TaskSpec TaskSpec::with_beta_star(const Eigen::VectorXd& beta_star) const {
  return TaskSpec(d_, m_, h_, psi_, beta_star, sigma2_);
}

Prompt sample_prompt(const TaskSpec& spec, RngStream& rng) {
  const int d = spec.d();
  const int m = spec.m();
  const double sigma = std::sqrt(spec.sigma2());

  Prompt p;
  p.beta_latent = spec.beta_star() + spec.sqrt_psi().matrix() * rng.gaussian_vector(d);
  // Row i of X is H^{1/2} z_i, hence X = Z * sqrt(H) for Z with iid N(0,1) rows.
  p.X = rng.gaussian_matrix(m, d) * spec.sqrt_h().matrix();
  p.x = spec.sqrt_h().matrix() * rng.gaussian_vector(d);
  p.y = p.X * p.beta_latent;
  for (int i = 0; i < m; ++i) p.y[i] += sigma * rng.gaussian();
  p.y_query = p.x.dot(p.beta_latent) + sigma * rng.gaussian();
  return p;
}

TokenMatrix build_token_matrix(const Prompt& p) {
  const int d = static_cast<int>(p.x.size());
  const int m = static_cast<int>(p.y.size());
  if (p.X.rows() != m || p.X.cols() != d) {
    throw DimensionError("build_token_matrix: prompt shapes are inconsistent");
  }
  TokenMatrix t;
  t.E = Eigen::MatrixXd::Zero(d + 1, m + 1);
  t.E.topLeftCorner(d, m) = p.X.transpose();
  t.E.block(0, m, d, 1) = p.x;
  t.E.block(d, 0, 1, m) = p.y.transpose();
  return t;
}

Eigen::MatrixXd TokenMatrix::context_features() const {
  return E.topLeftCorner(d(), m()).transpose();
}

Eigen::VectorXd TokenMatrix::context_labels() const {
  return E.block(d(), 0, 1, m()).transpose();
}

Eigen::VectorXd TokenMatrix::query_feature() const { return E.block(0, m(), d(), 1); }

Eigen::MatrixXd mask_matrix(int m) {
  if (m < 1) throw DimensionError("mask_matrix: M must be >= 1");
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(m + 1, m + 1);
  mask.topLeftCorner(m, m).setIdentity();
  return mask;
}

}  // namespace icl
