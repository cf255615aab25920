#include "mfvi/applications.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace mfvi {

namespace {

double sample_mean(const MatrixXd& samples,
                   const std::function<double(const VectorXd&)>& fn) {
  const auto n = samples.rows();
  if (n == 0) throw InputError("empty sample matrix");
  std::vector<double> vals(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k)
    vals[static_cast<std::size_t>(k)] = fn(samples.row(k));
  return pairwise_mean(vals);
}

}  // namespace

GaussianProduct bvm_surrogate(const Potential& f, long n) {
  validate_potential(f);
  if (n < 1) throw ParamError("bvm_surrogate: n must be >= 1");
  Mode mode = find_mode(f, VectorXd::Zero(f.dim));
  VectorXd diag = f.hessian(mode.x_star).diagonal() * static_cast<double>(n);
  for (int i = 0; i < f.dim; ++i) {
    double lo = n * f.alpha - 1e-9, hi = n * f.beta + 1e-9;
    if (diag[i] < lo || diag[i] > hi)
      throw ParamError("bvm_surrogate: D_n entry outside [n alpha_n, n b_n]; "
                       "certificates inconsistent");
  }
  GaussianProduct gp;
  gp.mean = mode.x_star;
  gp.std = diag.array().rsqrt();
  return gp;
}

double bvm_bound_smooth(double alpha_n, double b_n, int d, long n) {
  if (!(alpha_n > 0.0) || !(b_n > 0.0) || d < 1 || n < 1)
    throw ParamError("bvm_bound_smooth: inputs must be positive");
  return 2.0 * b_n *
         std::sqrt(d / (alpha_n * alpha_n * alpha_n * static_cast<double>(n)));
}

double bvm_bound_local(double alpha_n, double b_n, double ell_n, double tau_n,
                       double s_n, double C, int d, long n) {
  if (!(alpha_n > 0.0) || !(b_n > 0.0) || d < 1 || n < 1 || ell_n < 0.0 ||
      C < 0.0)
    throw ParamError("bvm_bound_local: bad inputs");
  const double nn = static_cast<double>(n);
  if (!(tau_n >= 0.0 && tau_n < nn * alpha_n))
    throw DomainError("bvm_bound_local: need tau_n in [0, n alpha_n)");
  const double gap = nn * alpha_n - tau_n;
  if (!(s_n > std::sqrt((d + 2) / gap)))
    throw DomainError("bvm_bound_local: need s_n > sqrt((d+2)/(n alpha_n - "
                      "tau_n))");
  const double term1 = ell_n * ell_n * (static_cast<double>(d) * d + 2.0 * d) /
                       (3.0 * std::pow(alpha_n, 4) * nn * nn);
  double term2 = 0.0;
  if (C > 0.0) {
    double log_t2 = 0.5 * d * std::log(0.5 * nn * b_n) + std::log(C) +
                    std::log(d + 2.0) + d * std::log(s_n) -
                    std::lgamma(0.5 * d) - 2.0 * std::log(alpha_n) -
                    std::log(gap) - 0.5 * gap * s_n * s_n;
    term2 = std::exp(log_t2);
  }
  return std::sqrt(term1 + term2);
}

GaussianProduct bvm_linreg_surrogate(const MatrixXd& A, const VectorXd& w,
                                     double tau, const Prior1D& prior) {
  Potential v = linreg_potential(A, w, tau, prior);
  Mode mode = find_mode(v, VectorXd::Zero(v.dim));
  GaussianProduct gp;
  gp.mean = mode.x_star;
  VectorXd diag(v.dim);
  for (int i = 0; i < v.dim; ++i)
    diag[i] = tau * A(i, i) + prior.hess(mode.x_star[i]);
  gp.std = diag.array().rsqrt();
  return gp;
}

BvMReport bvm_linreg(const MatrixXd& A, const VectorXd& w, double tau,
                     const Prior1D& prior, long n) {
  if (n < 1) throw ParamError("bvm_linreg: n must be >= 1");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A);
  const double alpha_n = es.eigenvalues().minCoeff();
  const double b_n = es.eigenvalues().maxCoeff();
  const double denom = tau * alpha_n + prior.alpha;
  if (!(denom > 0.0)) throw ParamError("bvm_linreg: tau alpha_n + alpha0 <= 0");
  GaussianProduct gp = bvm_linreg_surrogate(A, w, tau, prior);
  BvMReport rep;
  rep.x_n_star = gp.mean;
  rep.d_n = gp.std.array().square().inverse();
  const double d = static_cast<double>(A.rows());
  const double num = tau * b_n + prior.beta;
  rep.bound_smooth = 2.0 * std::sqrt(d * num * num /
                                     (static_cast<double>(n) * denom * denom *
                                      denom));
  return rep;
}

PriorSwap prior_swap_interval(
    double ell, const std::function<VectorXd(const VectorXd&)>& grad_log_p,
    const std::function<VectorXd(const VectorXd&)>& grad_log_p_tilde,
    const MatrixXd& samples_from_surrogate, double alpha_nd, double alpha_d,
    const std::function<double(const VectorXd&)>& statistic) {
  if (!(alpha_nd + alpha_d > 0.0))
    throw ParamError("prior_swap_interval: alpha_{n,d} + alpha~_d must be > 0");
  if (!(ell >= 0.0)) throw ParamError("prior_swap_interval: ell < 0");
  if (samples_from_surrogate.rows() == 0)
    throw InputError("prior_swap_interval: empty samples");
  double g = std::sqrt(sample_mean(samples_from_surrogate,
                                   [&](const VectorXd& x) {
                                     return (grad_log_p_tilde(x) -
                                             grad_log_p(x))
                                         .squaredNorm();
                                   }));
  PriorSwap out;
  out.delta = ell * g / (alpha_nd + alpha_d);
  if (statistic) {
    out.statistic_mean = sample_mean(samples_from_surrogate, statistic);
    out.interval_lo = *out.statistic_mean - out.delta;
    out.interval_hi = *out.statistic_mean + out.delta;
  }
  return out;
}

double contamination_sensitivity(const LogDensity& p_ref,
                                 const LogDensity& q_perturb, double eps,
                                 const MatrixXd& samples_from_base,
                                 double alpha_nd, double alpha_eps) {
  if (!(alpha_nd + alpha_eps > 0.0))
    throw ParamError("contamination_sensitivity: alpha_{n,d} + alpha_eps <= "
                     "0");
  if (!(eps >= 0.0 && eps < 1.0))
    throw ParamError("contamination_sensitivity: eps must be in [0,1)");
  if (samples_from_base.rows() == 0)
    throw InputError("contamination_sensitivity: empty samples");
  if (eps == 0.0) return 0.0;
  double mean_sq = sample_mean(samples_from_base, [&](const VectorXd& x) {
    // q/p_eps in log space: p_eps = (1-eps) p + eps q
    double lp = p_ref.log_density(x);
    double lq = q_perturb.log_density(x);
    double la = std::log1p(-eps) + lp;
    double lb = std::log(eps) + lq;
    double mx = std::max(la, lb);
    double log_peps = mx + std::log(std::exp(la - mx) + std::exp(lb - mx));
    double ratio = std::exp(lq - log_peps);
    double gd = (q_perturb.grad_log_density(x) - p_ref.grad_log_density(x))
                    .squaredNorm();
    return ratio * ratio * gd;
  });
  return std::sqrt(mean_sq) * eps / (alpha_nd + alpha_eps);
}

Potential control_potential(const Utility& g, double t_horizon) {
  if (!(t_horizon > 0.0))
    throw ParamError("control_potential: T_horizon must be > 0");
  if (g.dim < 1 || !(g.beta >= 0.0) || !g.value || !g.grad || !g.hessian)
    throw ParamError("control_potential: invalid utility");
  const double it = 1.0 / t_horizon;
  Utility gc = g;
  return Potential{
      g.dim, it, g.beta + it, "control",
      [gc, it](const VectorXd& x) {
        return -gc.value(x) + 0.5 * it * x.squaredNorm();
      },
      [gc, it](const VectorXd& x) { return VectorXd(-gc.grad(x) + it * x); },
      [gc, it](const VectorXd& x) {
        return MatrixXd(-gc.hessian(x) +
                        it * MatrixXd::Identity(gc.dim, gc.dim));
      }};
}

double control_value_from_elbo(double elbo_max, int dim, double t_horizon) {
  // M(g) = sup (int g dmu - KL(mu || gamma_T)); the ELBO against
  // V = -g + |x|^2/2T misses the gamma_T normalizer
  return elbo_max - 0.5 * dim * std::log(2.0 * M_PI * t_horizon);
}

double control_value_stability(const Utility& g, const Utility& g_tilde,
                               double beta, double t_horizon,
                               const MatrixXd& samples_from_base) {
  if (!(t_horizon > 0.0) || !(beta >= 0.0))
    throw ParamError("control_value_stability: bad beta or T");
  if (samples_from_base.rows() == 0)
    throw InputError("control_value_stability: empty samples");
  double gd = std::sqrt(sample_mean(samples_from_base, [&](const VectorXd& x) {
    return (g_tilde.grad(x) - g.grad(x)).squaredNorm();
  }));
  double vd = std::sqrt(sample_mean(samples_from_base, [&](const VectorXd& x) {
    double dv = g_tilde.value(x) - g.value(x);
    return dv * dv;
  }));
  const double bt = beta * t_horizon * t_horizon + t_horizon;
  const double d = static_cast<double>(g.dim);
  return 2.0 * std::sqrt(bt * d) * gd + 0.5 * bt * gd * gd + vd;
}

}  // namespace mfvi
