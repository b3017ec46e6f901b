#include "icl/predictors.hpp"

#include "icl/errors.hpp"

namespace icl {

namespace {

void require_dims(int expected_d, const TokenMatrix& token, const char* where) {
  if (token.d() != expected_d) {
    throw DimensionError(std::string(where) + ": parameter dimension does not match token matrix");
  }
}

// Shared attention read-out:
//   [w21^T (X^T X / M) B + w21^T (X^T y / M) w12^T
//    + w_last (y^T X / M) B + w_last (y^T y / M) w12^T] x
double attention_term(const Eigen::MatrixXd& b, const Eigen::VectorXd& w12,
                      const Eigen::VectorXd& w21, double w_last, const TokenMatrix& token) {
  const double m = static_cast<double>(token.m());
  const Eigen::MatrixXd x_feat = token.context_features();
  const Eigen::VectorXd y = token.context_labels();
  const Eigen::VectorXd x = token.query_feature();

  const Eigen::VectorXd bx = b * x;
  const Eigen::VectorXd xty = x_feat.transpose() * y / m;
  const Eigen::VectorXd xtxbx = x_feat.transpose() * (x_feat * bx) / m;
  const double yy = y.squaredNorm() / m;
  const double w12x = w12.dot(x);

  return w21.dot(xtxbx) + w21.dot(xty) * w12x + w_last * y.dot(x_feat * bx) / m +
         w_last * yy * w12x;
}

}  // namespace

double predict_gd_beta(const GdBetaParams& p, const TokenMatrix& token) {
  const int d = static_cast<int>(p.beta.size());
  if (p.gamma.rows() != d || p.gamma.cols() != d) {
    throw DimensionError("predict_gd_beta: beta and gamma shapes disagree");
  }
  require_dims(d, token, "predict_gd_beta");
  const Eigen::MatrixXd x_feat = token.context_features();
  const Eigen::VectorXd y = token.context_labels();
  const Eigen::VectorXd x = token.query_feature();
  const double m = static_cast<double>(token.m());

  const Eigen::VectorXd residual_grad = x_feat.transpose() * (x_feat * p.beta - y) / m;
  return (p.beta - p.gamma * residual_grad).dot(x);
}

double predict_lsa(const LsaParamsReduced& p, const TokenMatrix& token) {
  const int d = static_cast<int>(p.u12.size());
  if (p.U11.rows() != d || p.U11.cols() != d || p.u21.size() != d) {
    throw DimensionError("predict_lsa: parameter shapes disagree");
  }
  require_dims(d, token, "predict_lsa");
  return attention_term(p.U11, p.u12, p.u21, p.u_last, token);
}

double predict_ltb_reduced(const LtbParamsReduced& p, const TokenMatrix& token) {
  const int d = static_cast<int>(p.v12.size());
  if (p.V11.rows() != d || p.V11.cols() != d || p.v21.size() != d || p.gamma.size() != d) {
    throw DimensionError("predict_ltb_reduced: parameter shapes disagree");
  }
  require_dims(d, token, "predict_ltb_reduced");
  return p.gamma.dot(token.query_feature()) +
         attention_term(p.V11, p.v12, p.v21, p.v_last, token);
}

void LtbWeights::validate() const {
  const int cols = static_cast<int>(Wk.cols());
  if (cols < 2) throw DimensionError("LtbWeights: embedding size d+1 must be >= 2");
  const int d_feat = cols - 1;
  if (Wq.cols() != cols || Wp.cols() != cols || Wv.cols() != cols || W1.cols() != cols ||
      W2.cols() != cols) {
    throw DimensionError("LtbWeights: all weight matrices must have d+1 columns");
  }
  if (Wk.rows() != Wq.rows() || Wk.rows() < d_feat) {
    throw DimensionError("LtbWeights: key/query rows must match and satisfy d_k >= d");
  }
  if (Wp.rows() != Wv.rows() || Wp.rows() < d_feat + 1) {
    throw DimensionError("LtbWeights: projection/value rows must match and satisfy d_v >= d+1");
  }
  if (W1.rows() != W2.rows() || W1.rows() < 1) {
    throw DimensionError("LtbWeights: MLP rows must match and satisfy d_f >= 1");
  }
}

double predict_ltb_full(const LtbWeights& w, const TokenMatrix& token) {
  w.validate();
  require_dims(w.d(), token, "predict_ltb_full");
  const double m = static_cast<double>(token.m());
  const Eigen::MatrixXd& e = token.E;

  const Eigen::MatrixXd scores = e.transpose() * (w.Wk.transpose() * (w.Wq * e)) / m;
  const Eigen::MatrixXd attended =
      e + w.Wp.transpose() * (w.Wv * e) * mask_matrix(token.m()) * scores;
  const Eigen::MatrixXd out = w.W2.transpose() * (w.W1 * attended);
  return out(out.rows() - 1, out.cols() - 1);
}

LtbWeights embed_gd_beta_in_ltb(const GdBetaParams& p) {
  const int d = static_cast<int>(p.beta.size());
  if (p.gamma.rows() != d || p.gamma.cols() != d) {
    throw DimensionError("embed_gd_beta_in_ltb: beta and gamma shapes disagree");
  }
  LtbWeights w;

  // W_2^T W_1 = [[0, 0], [beta^T, 1]] realized as W_1 = I, W_2 = target^T.
  Eigen::MatrixXd readout = Eigen::MatrixXd::Zero(d + 1, d + 1);
  readout.block(d, 0, 1, d) = p.beta.transpose();
  readout(d, d) = 1.0;
  w.W1 = Eigen::MatrixXd::Identity(d + 1, d + 1);
  w.W2 = readout.transpose();

  // W_P^T W_V = [[-I, 0], [0, 1]] realized as W_P = I, W_V = target.
  Eigen::MatrixXd value = Eigen::MatrixXd::Identity(d + 1, d + 1);
  value.topLeftCorner(d, d) *= -1.0;
  w.Wp = Eigen::MatrixXd::Identity(d + 1, d + 1);
  w.Wv = value;

  // W_K^T W_Q = [[gamma^T, 0], [0, 0]] with d_k = d: W_K = [I | 0],
  // W_Q = [gamma^T | 0]. The transpose makes the attention product apply the
  // stepsize gamma itself to the query feature.
  w.Wk = Eigen::MatrixXd::Zero(d, d + 1);
  w.Wk.topLeftCorner(d, d).setIdentity();
  w.Wq = Eigen::MatrixXd::Zero(d, d + 1);
  w.Wq.topLeftCorner(d, d) = p.gamma.transpose();

  return w;
}

LtbParamsReduced reduce_ltb_weights(const LtbWeights& w) {
  w.validate();
  const int d = w.d();
  const Eigen::MatrixXd readout = w.W2.transpose() * w.W1;
  const Eigen::MatrixXd out_value = readout * (w.Wp.transpose() * w.Wv);
  const Eigen::MatrixXd key_query = w.Wk.transpose() * w.Wq;

  LtbParamsReduced p;
  p.gamma = readout.block(d, 0, 1, d).transpose();
  p.v21 = out_value.block(d, 0, 1, d).transpose();
  p.v_last = out_value(d, d);
  p.V11 = key_query.topLeftCorner(d, d);
  p.v12 = key_query.block(d, 0, 1, d).transpose();
  return p;
}

}  // namespace icl
