#pragma once

// Statistical applications: quantitative BvM surrogate and bounds, Bayesian
// linear-regression stability, prior swapping, eps-contamination, and
// distributed stochastic control.

#include "mfvi/oracle.hpp"
#include "mfvi/potentials.hpp"

#include <optional>

namespace mfvi {

struct BvMReport {
  VectorXd x_n_star;
  VectorXd d_n;  // diagonal entries of D_n
  double bound_smooth = 0.0;
  std::optional<double> bound_local;
  std::optional<double> measured_w2;
};

// gamma_n* = N(x_n*, D_n^{-1}) with D_n = diag(n grad^2 f_n(x_n*)); f is the
// per-observation potential with certificates (alpha_n, b_n).
GaussianProduct bvm_surrogate(const Potential& f, long n);

// W2 form of the smooth bound: 2 b_n sqrt(d / (alpha_n^3 n))
double bvm_bound_smooth(double alpha_n, double b_n, int d, long n);

// W2 form of the local bound; requires tau_n in [0, n alpha_n) and
// s_n > sqrt((d+2)/(n alpha_n - tau_n)).
double bvm_bound_local(double alpha_n, double b_n, double ell_n, double tau_n,
                       double s_n, double C, int d, long n);

// Cor "BvM for Bayesian linear model": mode of the linreg potential,
// D_n = diag(tau A + v''(beta*)), bound 2 sqrt(d (tau b_n + b0)^2 /
// (n (tau alpha_n + alpha0)^3)).
BvMReport bvm_linreg(const MatrixXd& A, const VectorXd& w, double tau,
                     const Prior1D& prior, long n);
GaussianProduct bvm_linreg_surrogate(const MatrixXd& A, const VectorXd& w,
                                     double tau, const Prior1D& prior);

struct PriorSwap {
  double delta = 0.0;
  std::optional<double> statistic_mean;  // E_{nu~*} phi by MC
  std::optional<double> interval_lo;
  std::optional<double> interval_hi;
};

// Cor "prior-swapping": delta = ell ||grad log p~ - grad log p|| /
// (alpha_{n,d} + alpha~_d) over samples from the surrogate posterior.
PriorSwap prior_swap_interval(
    double ell, const std::function<VectorXd(const VectorXd&)>& grad_log_p,
    const std::function<VectorXd(const VectorXd&)>& grad_log_p_tilde,
    const MatrixXd& samples_from_surrogate, double alpha_nd, double alpha_d,
    const std::function<double(const VectorXd&)>& statistic = nullptr);

struct LogDensity {
  std::function<double(const VectorXd&)> log_density;  // shared normalization
  std::function<VectorXd(const VectorXd&)> grad_log_density;
};

// eps-contamination sensitivity: MC estimate of
// || (q / p_eps)(grad log q - grad log p) ||_{L2(nu*)} eps / (a_nd + a_eps)
double contamination_sensitivity(const LogDensity& p_ref,
                                 const LogDensity& q_perturb, double eps,
                                 const MatrixXd& samples_from_base,
                                 double alpha_nd, double alpha_eps);

struct Utility {
  int dim = 0;
  double beta = 0.0;  // smoothness of the concave utility
  std::function<double(const VectorXd&)> value;
  std::function<VectorXd(const VectorXd&)> grad;
  std::function<MatrixXd(const VectorXd&)> hessian;
};

// V(x) = -g(x) + ||x||^2/(2T); alpha = 1/T, beta = beta_g + 1/T
Potential control_potential(const Utility& g, double t_horizon);

// value of the distributed control problem via the MFVI reformulation:
// max ELBO minus the log-normalizer of N(0, T I)
double control_value_from_elbo(double elbo_max, int dim, double t_horizon);

// Cor "sc reward": 2 sqrt((beta T^2 + T) d) G + (beta T^2 + T)/2 G^2 +
// ||g~ - g||_{L2(nu*)}
double control_value_stability(const Utility& g, const Utility& g_tilde,
                               double beta, double t_horizon,
                               const MatrixXd& samples_from_base);

}  // namespace mfvi
