#pragma once

// Target potentials V (negative log-density up to constant), theta-indexed
// families, convexity certificates, and mode finding.

#include "mfvi/common.hpp"

#include <functional>
#include <optional>
#include <string>

namespace mfvi {

struct Potential {
  int dim = 0;
  double alpha = 0.0;  // strong convexity certificate, > 0
  double beta = 0.0;   // smoothness certificate, >= alpha
  std::string label;
  std::function<double(const VectorXd&)> value;
  std::function<VectorXd(const VectorXd&)> grad;
  std::function<MatrixXd(const VectorXd&)> hessian;
};

// Checked evaluation: finite result or EvalError.
double eval_potential(const Potential& p, const VectorXd& x);

void validate_potential(const Potential& p);

struct Mode {
  VectorXd x_star;
  double grad_norm = 0.0;
  long iterations = 0;
};

// Gradient descent with step 1/beta, switching to damped Newton once
// ||grad V|| < 1e-3; ConvergenceError past the iteration cap.
Mode find_mode(const Potential& p, const VectorXd& x0, double mode_tol = 1e-8,
               long max_iters = 200000);

// 1-d prior piece v for the linear-regression potential (and prior swaps).
struct Prior1D {
  double alpha = 0.0;  // convexity of v (may be 0)
  double beta = 0.0;
  std::function<double(double)> value;
  std::function<double(double)> grad;
  std::function<double(double)> hess;
};

Prior1D quadratic_prior(double precision);  // v(t) = precision * t^2 / 2

// alpha/beta certificates are uniform over the whole theta interval.
struct ParametricFamily {
  std::pair<double, double> theta_domain;
  std::string label;
  std::function<Potential(double)> at;
  std::function<VectorXd(double, const VectorXd&)> grad_theta_grad;
  std::optional<double> lipschitz_dtheta;  // Lipschitz const of d_theta grad V
};

// central finite difference fallback for d_theta grad V, h = 1e-4*max(1,|th|)
VectorXd grad_theta_grad_fd(const ParametricFamily& fam, double theta,
                            const VectorXd& x);

// ---------------------------------------------------------------------------
// built-in potentials

Potential gaussian_potential(const VectorXd& mean, const MatrixXd& precision,
                             const std::string& label = "gaussian");
Potential isotropic_gaussian_potential(int dim, double sigma2);

// V(beta) = sum_i v(beta_i) + tau/2 beta' A beta - tau w' beta
Potential linreg_potential(const MatrixXd& A, const VectorXd& w, double tau,
                           const Prior1D& prior);

// V(x) = x'Px/2 - w'x + c log(1 + exp(a'x)); log-concave with
// alpha = lambda_min(P), beta = lambda_max(P) + c ||a||^2 / 4
Potential logistic_gaussian_potential(const MatrixXd& P, const VectorXd& w,
                                      const VectorXd& a, double c);

// sup |sigma''| for sigma(t) = 1/(1+e^{-t}); Hessian-Lipschitz certificates
// of softplus perturbations
inline constexpr double kLogisticThirdDerivBound = 0.09623;

// V(x) = x'Px/2 + eps sum_i log(1+e^{x_i}); Hessian is eps*0.25-bounded away
// from P and eps*kLogisticThirdDerivBound-Lipschitz
Potential perturbed_quadratic_potential(const MatrixXd& P, double eps);

// ---------------------------------------------------------------------------
// built-in families

// V_th(x) = (x - th*dir)' P (x - th*dir) / 2
ParametricFamily gaussian_mean_shift_family(const MatrixXd& precision,
                                            const VectorXd& direction,
                                            std::pair<double, double> domain);

// V_th(x) = p(th) ||x||^2 / 2 with p(th) = (1-th)*prec_a + th*prec_b; the
// precision path must stay positive on the closed domain
ParametricFamily gaussian_precision_scale_family(
    double prec_a, double prec_b, int dim, std::pair<double, double> domain);

ParametricFamily linreg_tau_family(const MatrixXd& A, const VectorXd& w,
                                   const Prior1D& prior,
                                   std::pair<double, double> tau_domain);

// eps-contamination of a product-Gaussian prior N(0, sigma2 I) by
// N(contam_mean, sigma2 I), composed with a Gaussian likelihood term
// lik_prec/2 ||x - data_mean||^2. alpha_eps is the user-certified
// log-concavity of the contaminated prior.
ParametricFamily contamination_path_family(
    int dim, double sigma2, double contam_mean, double lik_prec,
    const VectorXd& data_mean, double alpha_eps,
    std::pair<double, double> eps_domain);

}  // namespace mfvi
