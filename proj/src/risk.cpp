#include "icl/risk.hpp"

#include <cmath>
#include <limits>

#include "icl/errors.hpp"
#include "icl/rng.hpp"

namespace icl {

namespace {

void require_omega(const TaskSpec& spec) {
  if (!spec.omega_invertible()) {
    throw DomainError("Omega singular: tr(H Psi) + sigma2 must be positive");
  }
}

// S = H^{1/2} Psi H^{1/2}, shared by several closed forms.
Eigen::MatrixXd s_matrix(const TaskSpec& spec) {
  const Eigen::MatrixXd& hs = spec.sqrt_h().matrix();
  return hs * spec.psi().matrix() * hs;
}

}  // namespace

PsdMatrix omega(const TaskSpec& spec) {
  require_omega(spec);
  const double m = static_cast<double>(spec.m());
  const int d = spec.d();
  Eigen::MatrixXd value = (m + 1.0) / m * s_matrix(spec) +
                          (spec.tr_h_psi() + spec.sigma2()) / m * Eigen::MatrixXd::Identity(d, d);
  return PsdMatrix(value);
}

Eigen::MatrixXd optimal_gamma(const TaskSpec& spec) {
  const PsdMatrix om = omega(spec);
  return spec.psi().matrix() * spec.sqrt_h().matrix() * om.pseudo_inverse().matrix() *
         spec.sqrt_h().pseudo_inverse().matrix();
}

double min_risk_gd_beta(const TaskSpec& spec) {
  const PsdMatrix om = omega(spec);
  const Eigen::MatrixXd s = s_matrix(spec);
  const int d = spec.d();
  return spec.sigma2() +
         (s * (Eigen::MatrixXd::Identity(d, d) - s * om.pseudo_inverse().matrix())).trace();
}

PsdMatrix h_gamma(const TaskSpec& spec, const Eigen::MatrixXd& gamma) {
  const int d = spec.d();
  if (gamma.rows() != d || gamma.cols() != d) {
    throw DimensionError("h_gamma: Gamma must be d x d");
  }
  const Eigen::MatrixXd& h = spec.h().matrix();
  const double m = static_cast<double>(spec.m());
  const Eigen::MatrixXd one_step = Eigen::MatrixXd::Identity(d, d) - gamma * h;
  const Eigen::MatrixXd hgh = h * gamma.transpose() * h * gamma;  // H Gamma^T H Gamma
  Eigen::MatrixXd value = one_step.transpose() * h * one_step + hgh.trace() / m * h + hgh * h / m;
  return PsdMatrix(0.5 * (value + value.transpose().eval()));
}

double excess_risk_gd_beta(const TaskSpec& spec, const GdBetaParams& p) {
  const int d = spec.d();
  if (p.beta.size() != d || p.gamma.rows() != d || p.gamma.cols() != d) {
    throw DimensionError("excess_risk_gd_beta: parameter shapes do not match the spec");
  }
  const PsdMatrix om = omega(spec);
  const Eigen::MatrixXd& hs = spec.sqrt_h().matrix();
  const Eigen::VectorXd db = p.beta - spec.beta_star();
  const double beta_part = db.dot(h_gamma(spec, p.gamma).matrix() * db);

  const Eigen::MatrixXd k = hs * p.gamma * hs;
  const Eigen::MatrixXd dev = k - s_matrix(spec) * om.pseudo_inverse().matrix();
  const double gamma_part = (dev * om.matrix() * dev.transpose()).trace();
  return beta_part + gamma_part;
}

namespace {

// Exact quartic risk expansion shared by the LSA and LTB closed forms, in the
// (b, A) variables. `mean` is the effective prior mean: beta* for LSA and
// beta* - gamma for LTB, which is the only place the two families differ.
double closed_risk_core(const TaskSpec& spec, const Eigen::VectorXd& b, const Eigen::MatrixXd& a,
                        const Eigen::VectorXd& w12, double w_last, const Eigen::VectorXd& mean) {
  const Eigen::MatrixXd& h = spec.h().matrix();
  const Eigen::MatrixXd& psi = spec.psi().matrix();
  const double m = static_cast<double>(spec.m());
  const double s2 = spec.sigma2();
  const double t = spec.tr_h_psi();

  const Eigen::MatrixXd hpsih = h * psi * h;
  const Eigen::MatrixXd lambda_omega = (m + 1.0) / m * hpsih + (t + s2) / m * h;
  const double tr_hpsihpsi = (hpsih * psi).trace();

  const Eigen::VectorXd hw12 = h * w12;
  const double w12hw12 = w12.dot(hw12);
  const Eigen::MatrixXd ah = a * h;
  const Eigen::VectorXd bhah = (b.transpose() * h * ah).transpose();  // = (b^T H A H)^T

  const double term1 = b.dot(lambda_omega * b) * w12hw12 +
                       w_last * w_last * (a.transpose() * lambda_omega * ah).trace() +
                       2.0 * w_last * (b.transpose() * lambda_omega * ah * w12).value() -
                       2.0 * w_last * (h * ah * psi).trace() - 2.0 * w12.dot(hpsih * b);

  const double term2 = (b.dot(h * b) * (a.transpose() * h * ah).trace() +
                        4.0 * w_last * (b.transpose() * hpsih * ah * w12).value() +
                        4.0 * w_last * w_last * tr_hpsihpsi * w12hw12) /
                       m;

  const Eigen::VectorXd hahatb = h * (ah * (a.transpose() * (h * b)));  // H A H A^T H b
  const double term3 = (m + 1.0) / m * b.dot(hahatb) - 2.0 * bhah.dot(mean) +
                       2.0 * w_last * (t + s2) * bhah.dot(w12);

  const double quartic = 2.0 * tr_hpsihpsi + (m + 2.0) / m * t * t + (2.0 + 4.0 / m) * s2 * t +
                         (m + 2.0) / m * s2 * s2;
  const double term4 = mean.dot(h * mean) + t - 2.0 * (t + s2) * w_last * mean.dot(hw12) +
                       w_last * w_last * quartic * w12hw12;

  return s2 + term1 + term2 + term3 + term4;
}

}  // namespace

double risk_lsa_closed(const TaskSpec& spec, const LsaParamsReduced& p) {
  const int d = spec.d();
  if (p.u12.size() != d || p.u21.size() != d || p.U11.rows() != d || p.U11.cols() != d) {
    throw DimensionError("risk_lsa_closed: parameter shapes do not match the spec");
  }
  const Eigen::VectorXd b = p.u21 + p.u_last * spec.beta_star();
  const Eigen::MatrixXd a = p.U11 + spec.beta_star() * p.u12.transpose();
  return closed_risk_core(spec, b, a, p.u12, p.u_last, spec.beta_star());
}

double risk_ltb_closed(const TaskSpec& spec, const LtbParamsReduced& p) {
  const int d = spec.d();
  if (p.v12.size() != d || p.v21.size() != d || p.gamma.size() != d || p.V11.rows() != d ||
      p.V11.cols() != d) {
    throw DimensionError("risk_ltb_closed: parameter shapes do not match the spec");
  }
  const Eigen::VectorXd b = p.v21 + p.v_last * spec.beta_star();
  const Eigen::MatrixXd a = p.V11 + spec.beta_star() * p.v12.transpose();
  const Eigen::VectorXd mean = spec.beta_star() - p.gamma;
  return closed_risk_core(spec, b, a, p.v12, p.v_last, mean);
}

namespace {

struct ShardStats {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++count;
    const double delta = v - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (v - mean);
  }

  void merge(const ShardStats& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double delta = o.mean - mean;
    const std::int64_t total = count + o.count;
    mean += delta * static_cast<double>(o.count) / static_cast<double>(total);
    m2 += o.m2 + delta * delta * static_cast<double>(count) * static_cast<double>(o.count) /
                     static_cast<double>(total);
    count = total;
  }
};

template <typename SampleLoss>
RiskReport mc_over_shards(const TaskSpec& spec, std::int64_t n, std::uint64_t seed, int shards,
                          const SampleLoss& loss) {
  if (n < 2) throw DomainError("monte_carlo_risk: need n >= 2");
  if (shards < 1) throw DomainError("monte_carlo_risk: need shards >= 1");
  ShardStats total;
  for (int s = 0; s < shards; ++s) {
    const std::int64_t share = n / shards + (s < n % shards ? 1 : 0);
    RngStream rng(seed, static_cast<std::uint64_t>(s));
    ShardStats stats;
    for (std::int64_t i = 0; i < share; ++i) {
      const Prompt p = sample_prompt(spec, rng);
      stats.add(loss(p));
    }
    total.merge(stats);
  }
  RiskReport report;
  report.estimate = total.mean;
  report.n_samples = total.count;
  report.std_err = std::sqrt(total.m2 / static_cast<double>(total.count - 1) /
                             static_cast<double>(total.count));
  return report;
}

}  // namespace

RiskReport monte_carlo_risk(const TaskSpec& spec, const Predictor& f, std::int64_t n,
                            std::uint64_t seed, int shards) {
  return mc_over_shards(spec, n, seed, shards, [&](const Prompt& p) {
    const double err = f(p) - p.y_query;
    return err * err;
  });
}

RiskReport monte_carlo_risk_diff(const TaskSpec& spec, const Predictor& f_a, const Predictor& f_b,
                                 std::int64_t n, std::uint64_t seed, int shards) {
  return mc_over_shards(spec, n, seed, shards, [&](const Prompt& p) {
    const double ea = f_a(p) - p.y_query;
    const double eb = f_b(p) - p.y_query;
    return ea * ea - eb * eb;
  });
}

double gap_lower_bound(const TaskSpec& spec) {
  const Eigen::MatrixXd hpsi = spec.h().matrix() * spec.psi().matrix();
  const double tr_sq = (hpsi * hpsi).trace();
  const double m = static_cast<double>(spec.m());
  const double signal = spec.beta_star().dot(spec.h().matrix() * spec.beta_star());
  double factor = 2.0 / (3.0 * (m + 1.0));
  if (tr_sq > 0.0) {
    const double t = spec.tr_h_psi() + spec.sigma2();
    factor = std::max(factor, t * t / ((m + 1.0) * (m + 1.0) * tr_sq));
  }
  return factor * signal;
}

namespace {

Eigen::VectorXd pack_lsa(const LsaParamsReduced& p) {
  const int d = static_cast<int>(p.u12.size());
  Eigen::VectorXd theta(d * d + 2 * d + 1);
  theta.head(d * d) = Eigen::Map<const Eigen::VectorXd>(p.U11.data(), d * d);
  theta.segment(d * d, d) = p.u12;
  theta.segment(d * d + d, d) = p.u21;
  theta[d * d + 2 * d] = p.u_last;
  return theta;
}

LsaParamsReduced unpack_lsa(const Eigen::VectorXd& theta, int d) {
  LsaParamsReduced p;
  p.U11 = Eigen::Map<const Eigen::MatrixXd>(theta.data(), d, d);
  p.u12 = theta.segment(d * d, d);
  p.u21 = theta.segment(d * d + d, d);
  p.u_last = theta[d * d + 2 * d];
  return p;
}

}  // namespace

LsaMinimizeResult minimize_lsa_risk(const TaskSpec& spec, int restarts, std::uint64_t seed) {
  if (restarts < 1) throw DomainError("minimize_lsa_risk: need restarts >= 1");
  require_omega(spec);
  const int d = spec.d();
  const int n_params = d * d + 2 * d + 1;

  const auto objective = [&](const Eigen::VectorXd& theta) {
    return risk_lsa_closed(spec, unpack_lsa(theta, d));
  };

  double best_risk = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_theta;
  int failures = 0;

  for (int restart = 0; restart < restarts; ++restart) {
    Eigen::VectorXd theta;
    if (restart == 0) {
      // One-step-GD plug-in: exact optimum when the prior mean is zero.
      LsaParamsReduced p0;
      p0.U11 = optimal_gamma(spec).transpose();
      p0.u12 = Eigen::VectorXd::Zero(d);
      p0.u21 = Eigen::VectorXd::Zero(d);
      p0.u_last = 1.0;
      theta = pack_lsa(p0);
    } else {
      RngStream rng(seed, static_cast<std::uint64_t>(restart));
      theta = 0.5 * rng.gaussian_vector(n_params);
    }

    double value = objective(theta);
    if (!std::isfinite(value)) {
      ++failures;
      continue;
    }

    double step = 1.0;
    bool diverged = false;
    Eigen::VectorXd grad(n_params);
    for (int iter = 0; iter < 10000; ++iter) {
      const double h = 1e-6 * (1.0 + theta.norm());
      for (int i = 0; i < n_params; ++i) {
        Eigen::VectorXd probe = theta;
        probe[i] = theta[i] + h;
        const double fp = objective(probe);
        probe[i] = theta[i] - h;
        const double fm = objective(probe);
        grad[i] = (fp - fm) / (2.0 * h);
      }
      if (!grad.allFinite()) {
        diverged = true;
        break;
      }
      const double gnorm2 = grad.squaredNorm();
      if (std::sqrt(gnorm2) <= 1e-8) break;

      step = std::min(step * 2.0, 1e6);
      bool accepted = false;
      while (step > 1e-18) {
        const Eigen::VectorXd cand = theta - step * grad;
        const double fc = objective(cand);
        if (std::isfinite(fc) && fc <= value - 1e-4 * step * gnorm2) {
          theta = cand;
          value = fc;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;  // line search exhausted, flat to machine precision
    }

    if (diverged || !std::isfinite(value)) {
      ++failures;
      continue;
    }
    if (value < best_risk) {
      best_risk = value;
      best_theta = theta;
    }
  }

  if (failures == restarts) {
    throw DomainError("minimize_lsa_risk: every restart produced a non-finite risk");
  }
  return LsaMinimizeResult{unpack_lsa(best_theta, d), best_risk};
}

double default_optimality_tol(const TaskSpec& spec) {
  return 1e-8 * (1.0 + optimal_gamma(spec).norm());
}

bool check_gd_beta_optimality(const TaskSpec& spec, const GdBetaParams& p, double tol) {
  const Eigen::VectorXd beta_dev = project_image_vec(spec.h(), p.beta - spec.beta_star());
  const Eigen::MatrixXd gamma_dev = project_image_op(spec.h(), p.gamma - optimal_gamma(spec));
  return beta_dev.norm() <= tol && gamma_dev.norm() <= tol;
}

std::optional<bool> check_ltb_optimality(const TaskSpec& spec, const LtbParamsReduced& p,
                                         double tol) {
  // rank(H^{1/2} Psi^{1/2}) = rank(H^{1/2} Psi H^{1/2}).
  const PsdMatrix s(s_matrix(spec));
  if (s.rank() < 2) return std::nullopt;

  if (p.v_last == 0.0) return false;
  const PsdMatrix& h = spec.h();
  const Eigen::VectorXd& bs = spec.beta_star();
  if (project_image_vec(h, p.v_last * p.v12).norm() > tol) return false;
  if (project_image_vec(h, p.v21 + p.v_last * bs).norm() > tol) return false;
  if (project_image_vec(h, p.gamma - bs).norm() > tol) return false;
  const Eigen::MatrixXd target = optimal_gamma(spec).transpose();
  const Eigen::MatrixXd dev = p.v_last * p.V11 - target + p.v_last * bs * p.v12.transpose();
  return project_image_op(h, dev).norm() <= tol;
}

Eigen::MatrixXd fourth_moment_closed(const PsdMatrix& h, const Eigen::MatrixXd& a, int m) {
  if (a.rows() != h.dim() || a.cols() != h.dim()) {
    throw DimensionError("fourth_moment_closed: A must match the dimension of H");
  }
  if (m < 1) throw DomainError("fourth_moment_closed: M must be >= 1");
  if ((a - a.transpose()).norm() > 1e-10 * std::max(1.0, a.norm())) {
    throw DomainError("fourth_moment_closed: A must be symmetric within 1e-10");
  }
  const Eigen::MatrixXd& hm = h.matrix();
  const double md = static_cast<double>(m);
  return md * (hm * a).trace() * hm + md * (md + 1.0) * hm * a * hm;
}

}  // namespace icl
