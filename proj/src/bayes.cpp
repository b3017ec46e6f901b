#include "icl/bayes.hpp"

#include <Eigen/Cholesky>
#include <algorithm>

#include "icl/errors.hpp"

namespace icl {

double bayes_predict(const TaskSpec& spec, const Prompt& p) {
  const int d = spec.d();
  if (p.x.size() != d || p.X.cols() != d || p.X.rows() != p.y.size()) {
    throw DimensionError("bayes_predict: prompt shapes do not match the spec");
  }
  const Eigen::MatrixXd& ps = spec.sqrt_psi().matrix();
  const Eigen::MatrixXd xp = p.X * ps;  // rows are Psi^{1/2}-whitened features
  const Eigen::MatrixXd gram = xp.transpose() * xp;
  const Eigen::VectorXd rhs = xp.transpose() * (p.y - p.X * spec.beta_star());

  Eigen::VectorXd theta(d);
  if (spec.sigma2() > 0.0) {
    Eigen::MatrixXd reg = gram;
    reg.diagonal().array() += spec.sigma2();
    theta = Eigen::LLT<Eigen::MatrixXd>(reg).solve(rhs);
  } else {
    theta = PsdMatrix(0.5 * (gram + gram.transpose())).pseudo_inverse().matrix() * rhs;
  }
  return p.x.dot(spec.beta_star()) + p.x.dot(ps * theta);
}

BayesRate bayes_rate(const TaskSpec& spec) {
  const Eigen::MatrixXd& ps = spec.sqrt_psi().matrix();
  const PsdMatrix lambda(ps * spec.h().matrix() * ps);

  BayesRate out;
  out.phi = lambda.decomposition().eigenvalues;
  out.phi_bar = (out.phi.sum() + spec.sigma2()) / static_cast<double>(spec.m());
  out.rate = 0.0;
  for (Eigen::Index i = 0; i < out.phi.size(); ++i) {
    out.rate += std::min(out.phi_bar, out.phi[i]);
  }
  return out;
}

}  // namespace icl
