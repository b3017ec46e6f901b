#pragma once

#include <Eigen/Core>

#include "icl/linalg.hpp"
#include "icl/rng.hpp"

namespace icl {

/// Distributional parameters of one linear-regression ICL task family:
/// features x ~ N(0, H), task parameter beta ~ N(beta_star, Psi), labels
/// y = <beta, x> + N(0, sigma2), with M context examples per prompt.
class TaskSpec {
 public:
  TaskSpec(int d, int m, PsdMatrix h, PsdMatrix psi, Eigen::VectorXd beta_star, double sigma2);

  int d() const { return d_; }
  int m() const { return m_; }
  const PsdMatrix& h() const { return h_; }
  const PsdMatrix& psi() const { return psi_; }
  const Eigen::VectorXd& beta_star() const { return beta_star_; }
  double sigma2() const { return sigma2_; }

  const PsdMatrix& sqrt_h() const { return sqrt_h_; }
  const PsdMatrix& sqrt_psi() const { return sqrt_psi_; }
  double tr_h_psi() const { return tr_h_psi_; }

  /// True when tr(H Psi) + sigma2 > 0, i.e. Omega is invertible.
  bool omega_invertible() const { return tr_h_psi_ + sigma2_ > 0.0; }

  /// Same task family with a different prior mean.
  TaskSpec with_beta_star(const Eigen::VectorXd& beta_star) const;

 private:
  int d_;
  int m_;
  PsdMatrix h_;
  PsdMatrix psi_;
  Eigen::VectorXd beta_star_;
  double sigma2_;
  PsdMatrix sqrt_h_;
  PsdMatrix sqrt_psi_;
  double tr_h_psi_;
};

/// One sampled in-context episode. beta_latent is the realized task parameter,
/// kept for diagnostics only; it never feeds the predictors.
struct Prompt {
  Eigen::MatrixXd X;       // M x d context features
  Eigen::VectorXd y;       // M context labels
  Eigen::VectorXd x;       // query feature
  double y_query = 0.0;    // query label (excluded from the token matrix)
  Eigen::VectorXd beta_latent;
};

/// (d+1) x (M+1) token embedding: [[X^T, x], [y^T, 0]].
struct TokenMatrix {
  Eigen::MatrixXd E;

  int d() const { return static_cast<int>(E.rows()) - 1; }
  int m() const { return static_cast<int>(E.cols()) - 1; }

  Eigen::MatrixXd context_features() const;  // M x d, recovers X
  Eigen::VectorXd context_labels() const;    // recovers y
  Eigen::VectorXd query_feature() const;     // recovers x
};

/// Draw a fresh prompt. Consumes the stream in a fixed documented order
/// (theta, X rows, x, label noises), so identical streams replay identically.
Prompt sample_prompt(const TaskSpec& spec, RngStream& rng);

TokenMatrix build_token_matrix(const Prompt& p);

/// Attention mask diag(1,...,1,0) of size (M+1) x (M+1).
Eigen::MatrixXd mask_matrix(int m);

}  // namespace icl
