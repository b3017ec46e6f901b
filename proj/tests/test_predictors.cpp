#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "icl/predictors.hpp"
#include "test_util.hpp"

using namespace icl;
using testutil::random_spec;
using testutil::vec;

namespace {

TokenMatrix random_token(int d, int m, RngStream& rng) {
  Prompt p;
  p.X = rng.gaussian_matrix(m, d);
  p.y = rng.gaussian_vector(m);
  p.x = rng.gaussian_vector(d);
  return build_token_matrix(p);
}

// Straight-line evaluation of the full block from its definition, with no
// shared code: explicit mask, explicit products, explicit bottom-right read.
double dense_ltb_reference(const LtbWeights& w, const TokenMatrix& t) {
  const int d = t.d();
  const int m = t.m();
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(m + 1, m + 1);
  for (int i = 0; i < m; ++i) mask(i, i) = 1.0;
  const Eigen::MatrixXd scores =
      t.E.transpose() * w.Wk.transpose() * w.Wq * t.E / static_cast<double>(m);
  const Eigen::MatrixXd inner = t.E + w.Wp.transpose() * w.Wv * t.E * mask * scores;
  const Eigen::MatrixXd out = w.W2.transpose() * w.W1 * inner;
  return out(d, m);
}

LtbWeights random_weights(int d, int dk, int dv, int df, RngStream& rng) {
  LtbWeights w;
  w.Wk = rng.gaussian_matrix(dk, d + 1);
  w.Wq = rng.gaussian_matrix(dk, d + 1);
  w.Wp = rng.gaussian_matrix(dv, d + 1);
  w.Wv = rng.gaussian_matrix(dv, d + 1);
  w.W1 = rng.gaussian_matrix(df, d + 1);
  w.W2 = rng.gaussian_matrix(df, d + 1);
  return w;
}

}  // namespace

TEST_CASE("gd-beta prediction closed cases") {
  RngStream rng(21);
  const TokenMatrix t = random_token(3, 4, rng);

  GdBetaParams no_step{vec({0.3, -1.0, 2.0}), Eigen::MatrixXd::Zero(3, 3)};
  CHECK(predict_gd_beta(no_step, t) == doctest::Approx(no_step.beta.dot(t.query_feature())));

  GdBetaParams pure_step{Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3)};
  const double want =
      t.query_feature().dot(t.context_features().transpose() * t.context_labels()) / 4.0;
  CHECK(predict_gd_beta(pure_step, t) == doctest::Approx(want));

  // d=1, M=1: X=[[2]], y=[3], x=1, beta=1, gamma=1 -> 1 - 1*2*(2-3) = 3
  Prompt p;
  p.X = Eigen::MatrixXd(1, 1);
  p.X << 2.0;
  p.y = vec({3.0});
  p.x = vec({1.0});
  GdBetaParams scalar{vec({1.0}), Eigen::MatrixXd::Ones(1, 1)};
  CHECK(predict_gd_beta(scalar, build_token_matrix(p)) == doctest::Approx(3.0));
}

TEST_CASE("gd-beta prediction is linear in the query feature") {
  RngStream rng(22);
  const int d = 3, m = 5;
  GdBetaParams params{rng.gaussian_vector(d), rng.gaussian_matrix(d, d)};
  Prompt p;
  p.X = rng.gaussian_matrix(m, d);
  p.y = rng.gaussian_vector(m);
  const Eigen::VectorXd x1 = rng.gaussian_vector(d);
  const Eigen::VectorXd x2 = rng.gaussian_vector(d);
  p.x = x1;
  const double f1 = predict_gd_beta(params, build_token_matrix(p));
  p.x = x2;
  const double f2 = predict_gd_beta(params, build_token_matrix(p));
  p.x = x1 + x2;
  CHECK(predict_gd_beta(params, build_token_matrix(p)) == doctest::Approx(f1 + f2));
}

TEST_CASE("lsa prediction closed cases") {
  RngStream rng(23);
  const TokenMatrix t = random_token(2, 3, rng);

  LsaParamsReduced zero;
  zero.U11 = Eigen::MatrixXd::Zero(2, 2);
  zero.u12 = Eigen::VectorXd::Zero(2);
  zero.u21 = Eigen::VectorXd::Zero(2);
  zero.u_last = 0.0;
  CHECK(predict_lsa(zero, t) == 0.0);

  // u21 = 0, u12 = 0, u_last = 1, U11 = G gives (1/M) y^T X G x.
  LsaParamsReduced gd0 = zero;
  gd0.u_last = 1.0;
  gd0.U11 = rng.gaussian_matrix(2, 2);
  const double want = t.context_labels().dot(t.context_features() * gd0.U11 * t.query_feature()) /
                      static_cast<double>(t.m());
  CHECK(predict_lsa(gd0, t) == doctest::Approx(want));
}

TEST_CASE("lsa prediction matches the full masked-attention product") {
  // Build W_P^T W_V and W_K^T W_Q with the reduced blocks in the read
  // positions and junk everywhere else; the junk must not change the output.
  RngStream rng(24);
  const int d = 2, m = 3;
  for (int trial = 0; trial < 10; ++trial) {
    LsaParamsReduced p;
    p.U11 = rng.gaussian_matrix(d, d);
    p.u12 = rng.gaussian_vector(d);
    p.u21 = rng.gaussian_vector(d);
    p.u_last = rng.gaussian();

    Eigen::MatrixXd out_value = rng.gaussian_matrix(d + 1, d + 1);  // junk block
    out_value.row(d).head(d) = p.u21.transpose();
    out_value(d, d) = p.u_last;
    Eigen::MatrixXd key_query = rng.gaussian_matrix(d + 1, d + 1);  // junk block
    key_query.topLeftCorner(d, d) = p.U11;
    key_query.row(d).head(d) = p.u12.transpose();

    const TokenMatrix t = random_token(d, m, rng);
    const Eigen::MatrixXd attn = t.E + out_value * t.E * mask_matrix(m) *
                                           (t.E.transpose() * key_query * t.E) /
                                           static_cast<double>(m);
    CHECK(predict_lsa(p, t) == doctest::Approx(attn(d, m)).epsilon(1e-10));
  }
}

TEST_CASE("reduced ltb prediction closed cases") {
  RngStream rng(25);
  const TokenMatrix t = random_token(3, 4, rng);

  LtbParamsReduced mlp_only;
  mlp_only.V11 = Eigen::MatrixXd::Zero(3, 3);
  mlp_only.v12 = Eigen::VectorXd::Zero(3);
  mlp_only.v21 = Eigen::VectorXd::Zero(3);
  mlp_only.v_last = 0.0;
  mlp_only.gamma = rng.gaussian_vector(3);
  CHECK(predict_ltb_reduced(mlp_only, t) ==
        doctest::Approx(mlp_only.gamma.dot(t.query_feature())));

  LtbParamsReduced no_readout;
  no_readout.V11 = rng.gaussian_matrix(3, 3);
  no_readout.v12 = rng.gaussian_vector(3);
  no_readout.v21 = rng.gaussian_vector(3);
  no_readout.v_last = rng.gaussian();
  no_readout.gamma = Eigen::VectorXd::Zero(3);
  LsaParamsReduced same{no_readout.V11, no_readout.v12, no_readout.v21, no_readout.v_last};
  CHECK(predict_ltb_reduced(no_readout, t) == doctest::Approx(predict_lsa(same, t)));
}

TEST_CASE("full ltb agrees with an independent dense evaluation") {
  RngStream rng(26);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 2, m = 2;
    const LtbWeights w = random_weights(d, d + 1, d + 2, 3, rng);
    const TokenMatrix t = random_token(d, m, rng);
    CHECK(predict_ltb_full(w, t) == doctest::Approx(dense_ltb_reference(w, t)).epsilon(1e-12));
  }
}

TEST_CASE("full ltb with zero attention passes the zero slot through") {
  const int d = 2, m = 3;
  LtbWeights w;
  w.Wk = Eigen::MatrixXd::Zero(d, d + 1);
  w.Wq = Eigen::MatrixXd::Zero(d, d + 1);
  w.Wp = Eigen::MatrixXd::Zero(d + 1, d + 1);
  w.Wv = Eigen::MatrixXd::Zero(d + 1, d + 1);
  w.W1 = Eigen::MatrixXd::Identity(d + 1, d + 1);
  w.W2 = Eigen::MatrixXd::Identity(d + 1, d + 1);
  RngStream rng(27);
  CHECK(predict_ltb_full(w, random_token(d, m, rng)) == 0.0);
}

TEST_CASE("ltb weight shape constraints") {
  RngStream rng(28);
  LtbWeights w = random_weights(2, 2, 3, 2, rng);
  CHECK_NOTHROW(w.validate());
  LtbWeights bad_dk = w;
  bad_dk.Wk = rng.gaussian_matrix(1, 3);  // d_k < d
  bad_dk.Wq = rng.gaussian_matrix(1, 3);
  CHECK_THROWS_AS(bad_dk.validate(), DimensionError);
  LtbWeights bad_dv = w;
  bad_dv.Wp = rng.gaussian_matrix(2, 3);  // d_v < d+1
  bad_dv.Wv = rng.gaussian_matrix(2, 3);
  CHECK_THROWS_AS(bad_dv.validate(), DimensionError);
  LtbWeights bad_cols = w;
  bad_cols.Wq = rng.gaussian_matrix(2, 4);
  CHECK_THROWS_AS(bad_cols.validate(), DimensionError);
}

TEST_CASE("gd-beta embeds exactly into the full block") {
  RngStream rng(29);
  const TokenMatrix t0 = random_token(3, 4, rng);

  GdBetaParams zero{Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Zero(3, 3)};
  CHECK(predict_ltb_full(embed_gd_beta_in_ltb(zero), t0) == doctest::Approx(0.0));

  GdBetaParams init_only{vec({1.0, 2.0, -0.5}), Eigen::MatrixXd::Zero(3, 3)};
  CHECK(predict_ltb_full(embed_gd_beta_in_ltb(init_only), t0) ==
        doctest::Approx(init_only.beta.dot(t0.query_feature())));

  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + static_cast<int>(rng.next_u64() % 4);
    const int m = 1 + static_cast<int>(rng.next_u64() % 6);
    GdBetaParams p{rng.gaussian_vector(d), rng.gaussian_matrix(d, d)};
    const TokenMatrix t = random_token(d, m, rng);
    const double direct = predict_gd_beta(p, t);
    const double embedded = predict_ltb_full(embed_gd_beta_in_ltb(p), t);
    CHECK(std::abs(direct - embedded) <= 1e-10 * (1.0 + std::abs(direct)));
  }
}

TEST_CASE("reduction inverts the embedding") {
  RngStream rng(30);
  GdBetaParams p{rng.gaussian_vector(3), rng.gaussian_matrix(3, 3)};
  const LtbParamsReduced r = reduce_ltb_weights(embed_gd_beta_in_ltb(p));
  CHECK((r.gamma - p.beta).norm() < 1e-14);
  CHECK(r.v_last == doctest::Approx(1.0));
  CHECK((r.v21 + p.beta).norm() < 1e-14);  // v21 = -beta from the -I_d value block
  CHECK((r.V11 - p.gamma.transpose()).norm() < 1e-14);
  CHECK(r.v12.norm() < 1e-14);
}

TEST_CASE("zero weights reduce to zero parameters") {
  LtbWeights w;
  w.Wk = Eigen::MatrixXd::Zero(2, 3);
  w.Wq = Eigen::MatrixXd::Zero(2, 3);
  w.Wp = Eigen::MatrixXd::Zero(3, 3);
  w.Wv = Eigen::MatrixXd::Zero(3, 3);
  w.W1 = Eigen::MatrixXd::Zero(1, 3);
  w.W2 = Eigen::MatrixXd::Zero(1, 3);
  const LtbParamsReduced r = reduce_ltb_weights(w);
  CHECK(r.V11.norm() == 0.0);
  CHECK(r.v12.norm() == 0.0);
  CHECK(r.v21.norm() == 0.0);
  CHECK(r.v_last == 0.0);
  CHECK(r.gamma.norm() == 0.0);
}

TEST_CASE("reduction fidelity: full and reduced predictions agree") {
  RngStream rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + static_cast<int>(rng.next_u64() % 3);
    const int m = 1 + static_cast<int>(rng.next_u64() % 5);
    const int dk = d + static_cast<int>(rng.next_u64() % 3);
    const int dv = d + 1 + static_cast<int>(rng.next_u64() % 3);
    const int df = 1 + static_cast<int>(rng.next_u64() % 4);
    const LtbWeights w = random_weights(d, dk, dv, df, rng);
    const TokenMatrix t = random_token(d, m, rng);
    const double full = predict_ltb_full(w, t);
    const double reduced = predict_ltb_reduced(reduce_ltb_weights(w), t);
    CHECK(std::abs(full - reduced) <= 1e-10 * (1.0 + std::abs(full)));
  }
}
