#pragma once

// Stability bounds: W2 Lipschitz, H1 strengthening, reward (max-ELBO)
// stability, explicit parametric bounds with the density envelope, W_p bounds,
// and the L2 comparison / incomplete-gamma lemmas.

#include "mfvi/potentials.hpp"
#include "mfvi/transport.hpp"

#include <optional>

namespace mfvi {

struct StabilityReport {
  double bound_w2 = 0.0;           // grad_diff_l2 / alpha_used
  double bound_w2_reversed = std::numeric_limits<double>::quiet_NaN();
  double bound_h1 = 0.0;
  double grad_diff_l2 = 0.0;       // ||grad Vt - grad V||_{L2(nu_t*)}
  double alpha_used = 0.0;
  double beta_used = 0.0;
  double reward_bound = 0.0;
  double reward_bound_normalized = 0.0;
  double reward_mean_offset = 0.0;  // int (Vt - V) d nu_t*
  long sample_count = 0;
  std::uint64_t seed = 0;
};

// Thm "Lip": W2(nu_t*, nu*) <= ||grad Vt - grad V||_{L2(nu_t*)} / alpha.
// samples_from_perturbed ~ nu_t*; the reversed direction is filled when
// samples from nu* are supplied too.
StabilityReport lipschitz_w2_bound(
    const Potential& p, const Potential& p_tilde,
    const MatrixXd& samples_from_perturbed,
    const std::optional<MatrixXd>& samples_from_base = std::nullopt,
    std::uint64_t seed = 0);

// Same quantity bounding the full H(rho) distance (values and derivatives).
double h1_bound(const Potential& p, const Potential& p_tilde,
                const MatrixXd& samples_from_perturbed);

struct RewardBound {
  double value = 0.0;
  double mean_offset = 0.0;  // int (Vt - V) d nu_t*, assumed 0 when normalized
};

RewardBound reward_bound(const Potential& p, const Potential& p_tilde,
                         const MatrixXd& samples_from_perturbed,
                         bool normalized);

struct EnvelopeCertificate {
  double C = 0.0;      // nu*(x) <= C exp(-alpha/2 ||x - x*||^2)
  double alpha = 0.0;
  VectorXd x_star;
  double kl_upper = 0.0;             // LSI bound on KL(N(x*,1/alpha I) || pi)
  double second_moment_bound = 0.0;  // (4 kl_upper + 2d) / alpha
};

// KL(N(mu_mean, mu_var I) || pi) <= I(mu|pi) / (2 alpha), Fisher term by MC.
double kl_upper_lsi(const Potential& p, const VectorXd& mu_mean, double mu_var,
                    const MCQuadrature& q);

EnvelopeCertificate density_envelope(const Potential& p,
                                     const MCQuadrature& q);

enum class ExplicitKind { poly_p, exp_half };

// Cor "explicit Lipschitz": bound on W2(nu_thT*, nu_th*) per unit of
// ||thT - th|| times the actual parameter distance. f and L certify
// ||grad V_thT - grad V_th|| <= L ||thT - th|| f(x).
double explicit_parametric_bound(const ParametricFamily& fam, double theta,
                                 double theta_tilde, ExplicitKind kind,
                                 double L, double p_exp,
                                 const MCQuadrature& q);

// the radial integrals the explicit bounds are built from (exposed so the
// acceptance suite can double-enter them)
double poly_moment_bracket(int d, double p, double alpha, double xstar_norm);
double exp_half_radial_integral(int d, double alpha);

struct WpBound {
  double g_p = 0.0;  // (mean ||grad V_th - grad V_th0||^p)^{1/p}
  double map_bound = 0.0;
  double derivative_bound = 0.0;
};

// Prop "Wp Lipschitz" (p >= 2); samples are drawn from nu_theta*.
WpBound wp_bound(const ParametricFamily& fam, double theta, double theta0,
                 const MatrixXd& samples_from_theta, double p);

// Lemma "L^2": squared-norm comparison constant against
// N(0, (1+eps)/alpha I).
double l2_comparison_constant(const Potential& p, double eps,
                              const MCQuadrature& q);

// Lemma "incomplete-Gamma": requires alpha * s^2 > d + 2.
double incomplete_gamma_bound(double alpha, double s, int d);

}  // namespace mfvi
