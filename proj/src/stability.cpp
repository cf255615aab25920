#include "mfvi/stability.hpp"

#include <cmath>

namespace mfvi {

namespace {

// mean over sample rows of fn(row), pairwise-summed
double sample_mean(const MatrixXd& samples,
                   const std::function<double(const VectorXd&)>& fn) {
  const auto n = samples.rows();
  if (n == 0) throw InputError("empty sample matrix");
  std::vector<double> vals(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k)
    vals[static_cast<std::size_t>(k)] = fn(samples.row(k));
  return pairwise_mean(vals);
}

double grad_diff_l2_mc(const Potential& p, const Potential& p_tilde,
                       const MatrixXd& samples) {
  return std::sqrt(sample_mean(samples, [&](const VectorXd& x) {
    return (p_tilde.grad(x) - p.grad(x)).squaredNorm();
  }));
}

void check_pair(const Potential& p, const Potential& p_tilde) {
  validate_potential(p);
  validate_potential(p_tilde);
  if (p.dim != p_tilde.dim)
    throw ShapeError("stability: potentials of different dimension");
}

}  // namespace

StabilityReport lipschitz_w2_bound(
    const Potential& p, const Potential& p_tilde,
    const MatrixXd& samples_from_perturbed,
    const std::optional<MatrixXd>& samples_from_base, std::uint64_t seed) {
  check_pair(p, p_tilde);
  if (samples_from_perturbed.rows() == 0)
    throw InputError("lipschitz_w2_bound: empty samples");
  StabilityReport r;
  r.grad_diff_l2 = grad_diff_l2_mc(p, p_tilde, samples_from_perturbed);
  r.alpha_used = p.alpha;
  r.beta_used = std::max(p.beta, p_tilde.beta);
  r.bound_w2 = r.grad_diff_l2 / p.alpha;
  if (samples_from_base && samples_from_base->rows() > 0)
    r.bound_w2_reversed =
        grad_diff_l2_mc(p, p_tilde, *samples_from_base) / p_tilde.alpha;
  r.bound_h1 = r.bound_w2;
  r.sample_count = samples_from_perturbed.rows();
  r.seed = seed;
  return r;
}

double h1_bound(const Potential& p, const Potential& p_tilde,
                const MatrixXd& samples_from_perturbed) {
  check_pair(p, p_tilde);
  if (samples_from_perturbed.rows() == 0)
    throw InputError("h1_bound: empty samples");
  return grad_diff_l2_mc(p, p_tilde, samples_from_perturbed) / p.alpha;
}

RewardBound reward_bound(const Potential& p, const Potential& p_tilde,
                         const MatrixXd& samples_from_perturbed,
                         bool normalized) {
  check_pair(p, p_tilde);
  if (samples_from_perturbed.rows() == 0)
    throw InputError("reward_bound: empty samples");
  const double alpha = std::min(p.alpha, p_tilde.alpha);
  const double beta = std::max(p.beta, p_tilde.beta);
  const double d = p.dim;
  const double g = grad_diff_l2_mc(p, p_tilde, samples_from_perturbed);
  RewardBound out;
  out.mean_offset = sample_mean(samples_from_perturbed, [&](const VectorXd& x) {
    return p_tilde.value(x) - p.value(x);
  });
  const double quad = beta / (2.0 * alpha * alpha) * g * g;
  if (normalized) {
    out.value = (2.0 * std::sqrt(beta * d) + 1.0) / alpha * g + quad;
  } else {
    double value_diff_l2 =
        std::sqrt(sample_mean(samples_from_perturbed, [&](const VectorXd& x) {
          double dv = p_tilde.value(x) - p.value(x);
          return dv * dv;
        }));
    out.value = 2.0 * std::sqrt(beta * d) / alpha * g + quad + value_diff_l2;
  }
  return out;
}

double kl_upper_lsi(const Potential& p, const VectorXd& mu_mean, double mu_var,
                    const MCQuadrature& q) {
  validate_potential(p);
  if (!(mu_var > 0.0)) throw ParamError("kl_upper_lsi: mu_var must be > 0");
  if (mu_mean.size() != p.dim || q.dim != p.dim)
    throw ShapeError("kl_upper_lsi: dimension mismatch");
  const double sd = std::sqrt(mu_var);
  std::vector<double> vals(static_cast<std::size_t>(q.n));
  for (int k = 0; k < q.n; ++k) {
    VectorXd x = mu_mean + sd * q.points.row(k).transpose();
    VectorXd score_mu = (x - mu_mean) / mu_var;  // -grad log mu
    vals[static_cast<std::size_t>(k)] = (score_mu - p.grad(x)).squaredNorm();
  }
  return pairwise_mean(vals) / (2.0 * p.alpha);
}

EnvelopeCertificate density_envelope(const Potential& p,
                                     const MCQuadrature& q) {
  validate_potential(p);
  Mode mode = find_mode(p, VectorXd::Zero(p.dim));
  EnvelopeCertificate cert;
  cert.alpha = p.alpha;
  cert.x_star = mode.x_star;
  cert.kl_upper = kl_upper_lsi(p, mode.x_star, 1.0 / p.alpha, q);
  const double d = p.dim;
  // C = (beta/2pi)^{d/2} exp((beta-alpha) d / alpha * (2 KL + d)); the
  // prefactor is 1 / int exp(-beta t^2/2) dt per coordinate, which is what
  // an upper density envelope requires
  double log_c = 0.5 * d * std::log(p.beta / (2.0 * M_PI)) +
                 (p.beta - p.alpha) * d / p.alpha * (2.0 * cert.kl_upper + d);
  cert.C = std::exp(log_c);
  cert.second_moment_bound = (4.0 * cert.kl_upper + 2.0 * d) / p.alpha;
  return cert;
}

double poly_moment_bracket(int d, double p, double alpha, double xstar_norm) {
  // S(d) 2^{(2p+d-4)/2} alpha^{-d/2} [ ||x*||^p Gamma(d/2)
  //                                    + 2^{p/2} alpha^{-p/2} Gamma((p+d)/2) ]
  double logS = std::log(2.0) + 0.5 * d * std::log(M_PI) - std::lgamma(0.5 * d);
  double common = logS + 0.5 * (2.0 * p + d - 4.0) * std::log(2.0) -
                  0.5 * d * std::log(alpha);
  double term1 = xstar_norm > 0.0
                     ? std::exp(common + p * std::log(xstar_norm) +
                                std::lgamma(0.5 * d))
                     : 0.0;
  double term2 = std::exp(common + 0.5 * p * std::log(2.0) -
                          0.5 * p * std::log(alpha) +
                          std::lgamma(0.5 * (p + d)));
  return term1 + term2;
}

double exp_half_radial_integral(int d, double alpha) {
  // int_0^inf exp(r - alpha r^2/2) r^{d-1} dr, cut far past the peak
  double rmax = (1.0 + std::sqrt(2.0 * (d + 80.0))) / std::min(alpha, 1.0);
  auto f = [d, alpha](double r) {
    return std::exp(r - 0.5 * alpha * r * r +
                    (d - 1) * std::log(std::max(r, 1e-300)));
  };
  return integrate_adaptive(f, 0.0, rmax, 1e-13);
}

double explicit_parametric_bound(const ParametricFamily& fam, double theta,
                                 double theta_tilde, ExplicitKind kind,
                                 double L, double p_exp,
                                 const MCQuadrature& q) {
  if (!(L >= 0.0)) throw ParamError("explicit_parametric_bound: L < 0");
  if (L == 0.0) return 0.0;
  Potential base = fam.at(theta);
  Potential pert = fam.at(theta_tilde);
  EnvelopeCertificate cert = density_envelope(base, q);
  double bracket;
  switch (kind) {
    case ExplicitKind::poly_p:
      if (!(p_exp > 0.0))
        throw ParamError("explicit_parametric_bound: p must be > 0");
      bracket =
          poly_moment_bracket(base.dim, p_exp, base.alpha, cert.x_star.norm());
      break;
    case ExplicitKind::exp_half:
      bracket = sphere_surface_area(base.dim) * std::exp(cert.x_star.norm()) *
                exp_half_radial_integral(base.dim, base.alpha);
      break;
    default:
      throw ParamError("explicit_parametric_bound: invalid kind");
  }
  return L * std::sqrt(cert.C) / pert.alpha * std::sqrt(bracket) *
         std::abs(theta_tilde - theta);
}

WpBound wp_bound(const ParametricFamily& fam, double theta, double theta0,
                 const MatrixXd& samples_from_theta, double p) {
  if (!(p >= 2.0)) throw ParamError("wp_bound: p must be >= 2");
  if (samples_from_theta.rows() == 0)
    throw InputError("wp_bound: empty samples");
  Potential pt = fam.at(theta);
  Potential p0 = fam.at(theta0);
  const double alpha = p0.alpha, beta = p0.beta;
  const double d = p0.dim;
  WpBound out;
  out.g_p = std::pow(
      sample_mean(samples_from_theta,
                  [&](const VectorXd& x) {
                    return std::pow((pt.grad(x) - p0.grad(x)).norm(), p);
                  }),
      1.0 / p);
  out.map_bound = std::pow(d, 0.5 * (p - 2.0)) *
                  (alpha + std::sqrt(d) * beta) / (alpha * alpha) * out.g_p;
  const double kappa = beta / alpha;
  const double r = p / (p - 1.0);
  const double m_r = std::pow(0.5 * M_PI, r) * gaussian_abs_moment(r);
  out.derivative_bound =
      std::pow(m_r, (p - 1.0) / p) *
      (std::pow(d, 0.5 * (p - 2.0)) + std::pow(d, p - 1.0) * kappa +
       std::pow(d, 0.5 * (2.0 * p - 1.0)) * kappa * kappa) /
      alpha * out.g_p;
  return out;
}

double l2_comparison_constant(const Potential& p, double eps,
                              const MCQuadrature& q) {
  if (!(eps > 0.0)) throw ParamError("l2_comparison_constant: eps must be > 0");
  EnvelopeCertificate cert = density_envelope(p, q);
  const double d = p.dim;
  // squared-norm constant against the normalized N(0, (1+eps)/alpha I):
  // ((1+eps) beta / alpha)^{d/2} exp(envelope exponent + Young shift)
  double young = (1.0 + 1.0 / eps) * p.alpha / (2.0 * (1.0 + eps)) *
                 cert.x_star.squaredNorm();
  double log_k = 0.5 * d * std::log((1.0 + eps) * p.beta / p.alpha) +
                 (p.beta - p.alpha) * d / p.alpha * (2.0 * cert.kl_upper + d) +
                 young;
  return std::exp(log_k);
}

double incomplete_gamma_bound(double alpha, double s, int d) {
  if (!(alpha > 0.0) || !(s > 0.0) || d < 1)
    throw ParamError("incomplete_gamma_bound: bad inputs");
  if (!(alpha * s * s > d + 2))
    throw DomainError("incomplete_gamma_bound: requires alpha*s^2 > d+2");
  // log arithmetic keeps s^d and S(d) in range for large d
  double log_b = std::log(2.0) + 0.5 * d * std::log(M_PI) -
                 std::lgamma(0.5 * d) + std::log(d + 2.0) +
                 d * std::log(s) - std::log(2.0 * alpha) -
                 0.5 * alpha * s * s;
  return std::exp(log_b);
}

}  // namespace mfvi
