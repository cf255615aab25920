#include "mfvi/potentials.hpp"

#include <Eigen/Eigenvalues>

namespace mfvi {

double eval_potential(const Potential& p, const VectorXd& x) {
  if (x.size() != p.dim) throw ShapeError("eval: dimension mismatch");
  double v = p.value(x);
  if (!std::isfinite(v))
    throw EvalError("eval: potential '" + p.label + "' returned a non-finite "
                    "value");
  return v;
}

void validate_potential(const Potential& p) {
  if (p.dim < 1) throw ParamError("potential: dim must be >= 1");
  if (!(p.alpha > 0.0)) throw ParamError("potential: alpha must be > 0");
  if (!(p.beta >= p.alpha)) throw ParamError("potential: beta must be >= alpha");
  if (!p.value || !p.grad || !p.hessian)
    throw ParamError("potential: value/grad/hessian evaluators required");
}

Mode find_mode(const Potential& p, const VectorXd& x0, double mode_tol,
               long max_iters) {
  validate_potential(p);
  if (x0.size() != p.dim) throw ShapeError("find_mode: bad x0 dimension");
  VectorXd x = x0;
  VectorXd g = p.grad(x);
  long it = 0;
  while (g.norm() > mode_tol) {
    if (++it > max_iters)
      throw ConvergenceError("find_mode: iteration cap reached", g.norm(), it);
    if (g.norm() >= 1e-3) {
      x -= g / p.beta;
    } else {
      // damped Newton for the local phase
      MatrixXd H = p.hessian(x);
      VectorXd step = H.ldlt().solve(g);
      double t = 1.0;
      double g0 = g.norm();
      while (t > 1e-12 && p.grad(x - t * step).norm() > g0) t *= 0.5;
      x -= t * step;
    }
    g = p.grad(x);
  }
  return Mode{x, g.norm(), it};
}

Prior1D quadratic_prior(double precision) {
  if (precision < 0.0) throw ParamError("quadratic_prior: negative precision");
  return Prior1D{
      precision, precision,
      [precision](double t) { return 0.5 * precision * t * t; },
      [precision](double t) { return precision * t; },
      [precision](double) { return precision; }};
}

VectorXd grad_theta_grad_fd(const ParametricFamily& fam, double theta,
                            const VectorXd& x) {
  double h = 1e-4 * std::max(1.0, std::abs(theta));
  Potential lo = fam.at(theta - h), hi = fam.at(theta + h);
  return (hi.grad(x) - lo.grad(x)) / (2.0 * h);
}

namespace {

void spd_extremes(const MatrixXd& P, double& lo, double& hi) {
  if (P.rows() != P.cols()) throw ShapeError("precision matrix must be square");
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-10 * P.cwiseAbs().maxCoeff())
    throw ParamError("precision matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(P);
  lo = es.eigenvalues().minCoeff();
  hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) throw ParamError("precision matrix must be SPD");
}

}  // namespace

Potential gaussian_potential(const VectorXd& mean, const MatrixXd& precision,
                             const std::string& label) {
  double lo, hi;
  spd_extremes(precision, lo, hi);
  if (mean.size() != precision.rows())
    throw ShapeError("gaussian_potential: mean/precision size mismatch");
  MatrixXd P = precision;
  VectorXd m = mean;
  return Potential{
      static_cast<int>(m.size()), lo, hi, label,
      [P, m](const VectorXd& x) {
        VectorXd c = x - m;
        return 0.5 * c.dot(P * c);
      },
      [P, m](const VectorXd& x) { return VectorXd(P * (x - m)); },
      [P](const VectorXd&) { return P; }};
}

Potential isotropic_gaussian_potential(int dim, double sigma2) {
  if (!(sigma2 > 0.0)) throw ParamError("isotropic gaussian: sigma2 <= 0");
  return gaussian_potential(VectorXd::Zero(dim),
                            MatrixXd::Identity(dim, dim) / sigma2,
                            "isotropic_gaussian");
}

Potential linreg_potential(const MatrixXd& A, const VectorXd& w, double tau,
                           const Prior1D& prior) {
  if (!(tau > 0.0)) throw ParamError("linreg_potential: tau must be > 0");
  if (A.rows() != A.cols() || w.size() != A.rows())
    throw ShapeError("linreg_potential: A/w shape mismatch");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A);
  double a1 = es.eigenvalues().minCoeff();
  double amax = es.eigenvalues().maxCoeff();
  if (a1 < -1e-12) throw ParamError("linreg_potential: A must be PSD");
  double alpha = tau * a1 + prior.alpha;
  double beta = tau * amax + prior.beta;
  if (!(alpha > 0.0))
    throw ParamError("linreg_potential: alpha1*tau + alpha0 must be > 0");
  MatrixXd Ac = A;
  VectorXd wc = w;
  Prior1D v = prior;
  const int d = static_cast<int>(A.rows());
  return Potential{
      d, alpha, beta, "linreg_tau",
      [Ac, wc, tau, v](const VectorXd& b) {
        double s = 0.0;
        for (int i = 0; i < b.size(); ++i) s += v.value(b[i]);
        return s + 0.5 * tau * b.dot(Ac * b) - tau * wc.dot(b);
      },
      [Ac, wc, tau, v](const VectorXd& b) {
        VectorXd g = tau * (Ac * b - wc);
        for (int i = 0; i < b.size(); ++i) g[i] += v.grad(b[i]);
        return g;
      },
      [Ac, tau, v](const VectorXd& b) {
        MatrixXd H = tau * Ac;
        for (int i = 0; i < b.size(); ++i) H(i, i) += v.hess(b[i]);
        return H;
      }};
}

namespace {

inline double softplus(double t) {
  return t > 30.0 ? t : std::log1p(std::exp(t));
}
inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

Potential logistic_gaussian_potential(const MatrixXd& P, const VectorXd& w,
                                      const VectorXd& a, double c) {
  double lo, hi;
  spd_extremes(P, lo, hi);
  if (w.size() != P.rows() || a.size() != P.rows())
    throw ShapeError("logistic_gaussian_potential: w/a size mismatch");
  if (c < 0.0) throw ParamError("logistic_gaussian_potential: c must be >= 0");
  MatrixXd Pc = P;
  VectorXd wc = w, ac = a;
  const int d = static_cast<int>(P.rows());
  return Potential{
      d, lo, hi + 0.25 * c * a.squaredNorm(), "logistic_gaussian",
      [Pc, wc, ac, c](const VectorXd& x) {
        return 0.5 * x.dot(Pc * x) - wc.dot(x) + c * softplus(ac.dot(x));
      },
      [Pc, wc, ac, c](const VectorXd& x) {
        return VectorXd(Pc * x - wc + c * sigmoid(ac.dot(x)) * ac);
      },
      [Pc, ac, c](const VectorXd& x) {
        double s = sigmoid(ac.dot(x));
        return MatrixXd(Pc + c * s * (1.0 - s) * ac * ac.transpose());
      }};
}

Potential perturbed_quadratic_potential(const MatrixXd& P, double eps) {
  double lo, hi;
  spd_extremes(P, lo, hi);
  if (eps < 0.0) throw ParamError("perturbed_quadratic: eps must be >= 0");
  MatrixXd Pc = P;
  const int d = static_cast<int>(P.rows());
  return Potential{
      d, lo, hi + 0.25 * eps, "perturbed_quadratic",
      [Pc, eps](const VectorXd& x) {
        double s = 0.5 * x.dot(Pc * x);
        for (int i = 0; i < x.size(); ++i) s += eps * softplus(x[i]);
        return s;
      },
      [Pc, eps](const VectorXd& x) {
        VectorXd g = Pc * x;
        for (int i = 0; i < x.size(); ++i) g[i] += eps * sigmoid(x[i]);
        return g;
      },
      [Pc, eps](const VectorXd& x) {
        MatrixXd H = Pc;
        for (int i = 0; i < x.size(); ++i) {
          double s = sigmoid(x[i]);
          H(i, i) += eps * s * (1.0 - s);
        }
        return H;
      }};
}

ParametricFamily gaussian_mean_shift_family(const MatrixXd& precision,
                                            const VectorXd& direction,
                                            std::pair<double, double> domain) {
  double lo, hi;
  spd_extremes(precision, lo, hi);
  if (direction.size() != precision.rows())
    throw ShapeError("mean_shift family: direction size mismatch");
  MatrixXd P = precision;
  VectorXd dir = direction;
  VectorXd dtheta = -(P * dir);  // d_theta grad V, constant in (theta, x)
  return ParametricFamily{
      domain, "gaussian_mean_shift",
      [P, dir](double th) {
        return gaussian_potential(th * dir, P, "gaussian_mean_shift");
      },
      [dtheta](double, const VectorXd&) { return dtheta; },
      0.0};
}

ParametricFamily gaussian_precision_scale_family(
    double prec_a, double prec_b, int dim, std::pair<double, double> domain) {
  auto prec = [prec_a, prec_b](double th) {
    return (1.0 - th) * prec_a + th * prec_b;
  };
  double p_lo = std::min(prec(domain.first), prec(domain.second));
  double p_hi = std::max(prec(domain.first), prec(domain.second));
  if (!(p_lo > 0.0))
    throw ParamError("precision_scale family: precision path must stay "
                     "positive on the domain");
  return ParametricFamily{
      domain, "gaussian_precision_scale",
      [prec, dim, p_lo, p_hi](double th) {
        Potential p = isotropic_gaussian_potential(dim, 1.0 / prec(th));
        p.alpha = p_lo;  // uniform certificates over the domain
        p.beta = p_hi;
        p.label = "gaussian_precision_scale";
        return p;
      },
      [prec_a, prec_b](double, const VectorXd& x) {
        return VectorXd((prec_b - prec_a) * x);
      },
      std::abs(prec_b - prec_a)};
}

ParametricFamily linreg_tau_family(const MatrixXd& A, const VectorXd& w,
                                   const Prior1D& prior,
                                   std::pair<double, double> tau_domain) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A);
  double a1 = es.eigenvalues().minCoeff();
  double amax = es.eigenvalues().maxCoeff();
  double tau_lo = tau_domain.first, tau_hi = tau_domain.second;
  if (!(tau_lo > 0.0)) throw ParamError("linreg family: tau domain must be > 0");
  double alpha = tau_lo * a1 + prior.alpha;
  double beta = tau_hi * amax + prior.beta;
  if (!(alpha > 0.0))
    throw ParamError("linreg family: alpha1*tau + alpha0 must be > 0 on the "
                     "domain");
  MatrixXd Ac = A;
  VectorXd wc = w;
  Prior1D v = prior;
  return ParametricFamily{
      tau_domain, "linreg_tau",
      [Ac, wc, v, alpha, beta](double tau) {
        Potential p = linreg_potential(Ac, wc, tau, v);
        p.alpha = alpha;
        p.beta = beta;
        return p;
      },
      [Ac, wc](double, const VectorXd& b) { return VectorXd(Ac * b - wc); },
      std::nullopt};
}

ParametricFamily contamination_path_family(
    int dim, double sigma2, double contam_mean, double lik_prec,
    const VectorXd& data_mean, double alpha_eps,
    std::pair<double, double> eps_domain) {
  if (!(sigma2 > 0.0) || !(lik_prec >= 0.0))
    throw ParamError("contamination family: bad sigma2/lik_prec");
  if (data_mean.size() != dim)
    throw ShapeError("contamination family: data_mean size mismatch");
  if (!(lik_prec + alpha_eps > 0.0))
    throw ParamError("contamination family: alpha_{n,d} + alpha_eps <= 0");
  const double mu = contam_mean;

  // mixture prior per coordinate: p_eps = (1-eps) N(0,s2) + eps N(mu,s2);
  // everything reduces to r(t) = eps*phi_mu / p_eps computed in log space
  auto mix = [sigma2, mu](double eps, double t, double& logp, double& dlogp,
                          double& d2logp, double& deps_dlogp) {
    double la = std::log1p(-eps) - 0.5 * t * t / sigma2;
    double lb = std::log(std::max(eps, 1e-300)) -
                0.5 * (t - mu) * (t - mu) / sigma2;
    double m = std::max(la, lb);
    double ea = std::exp(la - m), eb = std::exp(lb - m);
    double sum = ea + eb;
    logp = m + std::log(sum) - 0.5 * std::log(2.0 * M_PI * sigma2);
    double r = eb / sum;  // posterior weight of the contaminant
    double ga = -t / sigma2, gb = -(t - mu) / sigma2;
    dlogp = (1.0 - r) * ga + r * gb;
    double dr = r * (1.0 - r) * (gb - ga);
    d2logp = -1.0 / sigma2 + dr * (gb - ga);
    // d/deps of dlogp at fixed t: r depends on eps through the mixture weight
    double dr_deps = r * (1.0 - r) *
                     (1.0 / std::max(eps, 1e-300) + 1.0 / (1.0 - eps));
    deps_dlogp = dr_deps * (gb - ga);
  };

  // smoothness: mixture log-density curvature is bounded by 1/s2 plus the
  // separation term mu^2/(4 s2^2) (worst case of r(1-r)(gb-ga)^2)
  double hess_margin = mu * mu / (4.0 * sigma2 * sigma2);
  double beta_cert = lik_prec + 1.0 / sigma2 + hess_margin;
  double alpha_cert = lik_prec + alpha_eps;

  auto at = [dim, lik_prec, data_mean, alpha_cert, beta_cert,
             mix](double eps) {
    return Potential{
        dim, alpha_cert, beta_cert, "contamination_path",
        [dim, lik_prec, data_mean, mix, eps](const VectorXd& x) {
          double v = 0.5 * lik_prec * (x - data_mean).squaredNorm();
          for (int i = 0; i < dim; ++i) {
            double lp, d1, d2, de;
            mix(eps, x[i], lp, d1, d2, de);
            v -= lp;
          }
          return v;
        },
        [dim, lik_prec, data_mean, mix, eps](const VectorXd& x) {
          VectorXd g = lik_prec * (x - data_mean);
          for (int i = 0; i < dim; ++i) {
            double lp, d1, d2, de;
            mix(eps, x[i], lp, d1, d2, de);
            g[i] -= d1;
          }
          return g;
        },
        [dim, lik_prec, mix, eps](const VectorXd& x) {
          MatrixXd H = lik_prec * MatrixXd::Identity(dim, dim);
          for (int i = 0; i < dim; ++i) {
            double lp, d1, d2, de;
            mix(eps, x[i], lp, d1, d2, de);
            H(i, i) -= d2;
          }
          return H;
        }};
  };

  return ParametricFamily{
      eps_domain, "contamination_path", at,
      [dim, mix](double eps, const VectorXd& x) {
        VectorXd g(dim);
        for (int i = 0; i < dim; ++i) {
          double lp, d1, d2, de;
          mix(eps, x[i], lp, d1, d2, de);
          g[i] = -de;  // d_eps grad V = -d_eps dlogp
        }
        return g;
      },
      std::nullopt};
}

}  // namespace mfvi
