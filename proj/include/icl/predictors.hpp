#pragma once

#include <Eigen/Core>

#include "icl/task.hpp"

namespace icl {

/// One-step gradient descent with learnable initialization: prediction
/// <beta - Gamma * (1/M) X^T (X beta - y), x>. The matrix stepsize need not
/// be symmetric.
struct GdBetaParams {
  Eigen::VectorXd beta;   // initialization
  Eigen::MatrixXd gamma;  // matrix stepsize
};

/// Effective parameters of a linear self-attention layer: the blocks of
/// W_K^T W_Q (first d columns: U11 over u12^T) and of W_P^T W_V (last row:
/// u21^T, u_last) that actually reach the prediction.
struct LsaParamsReduced {
  Eigen::MatrixXd U11;
  Eigen::VectorXd u12;
  Eigen::VectorXd u21;
  double u_last = 0.0;
};

/// Effective parameters of a linear transformer block: the attention blocks
/// as in LsaParamsReduced plus the readout row gamma of W_2^T W_1 applied to
/// the query feature through the residual path.
struct LtbParamsReduced {
  Eigen::MatrixXd V11;
  Eigen::VectorXd v12;
  Eigen::VectorXd v21;
  double v_last = 0.0;
  Eigen::VectorXd gamma;
};

/// Full weight matrices of a linear transformer block.
/// Shape constraints: W_K, W_Q are d_k x (d+1) with d_k >= d; W_P, W_V are
/// d_v x (d+1) with d_v >= d+1; W_1, W_2 are d_f x (d+1) with d_f >= 1.
struct LtbWeights {
  Eigen::MatrixXd Wk, Wq;
  Eigen::MatrixXd Wp, Wv;
  Eigen::MatrixXd W1, W2;

  int d() const { return static_cast<int>(Wk.cols()) - 1; }
  void validate() const;
};

double predict_gd_beta(const GdBetaParams& p, const TokenMatrix& token);
double predict_lsa(const LsaParamsReduced& p, const TokenMatrix& token);
double predict_ltb_reduced(const LtbParamsReduced& p, const TokenMatrix& token);
double predict_ltb_full(const LtbWeights& w, const TokenMatrix& token);

/// Realize a GD-beta model as explicit LTB weights with d_k = d, d_v = d+1,
/// d_f = d+1. One factor of every product is a (padded) identity, the other
/// carries the target product; entries that cannot reach the prediction are
/// zero. The key-query block stores the transposed stepsize, matching how the
/// attention product applies it to the query feature.
LtbWeights embed_gd_beta_in_ltb(const GdBetaParams& p);

/// Extract the effective parameters from full weights: gamma and (v21, v_last)
/// from the last rows of W_2^T W_1 and W_2^T W_1 W_P^T W_V, (V11, v12) from
/// the first d columns of W_K^T W_Q.
LtbParamsReduced reduce_ltb_weights(const LtbWeights& w);

}  // namespace icl
