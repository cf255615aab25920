#include "mfvi/applications.hpp"

#include "mfvi/lifted.hpp"

#include <doctest.h>

#include <random>

using namespace mfvi;

TEST_CASE("bvm_surrogate closed forms") {
  // f_n = ||x||^2/2, n = 10: N(0, I/10)
  Potential f = isotropic_gaussian_potential(3, 1.0);
  GaussianProduct gp = bvm_surrogate(f, 10);
  CHECK(gp.mean.norm() <= 1e-7);
  CHECK((gp.std.array() - 1.0 / std::sqrt(10.0)).abs().maxCoeff() < 1e-9);

  MatrixXd P(2, 2);
  P << 2.0, 1.0, 1.0, 2.0;
  GaussianProduct g2 = bvm_surrogate(gaussian_potential(VectorXd::Zero(2), P),
                                     4);
  CHECK((g2.std.array() - 1.0 / std::sqrt(8.0)).abs().maxCoeff() < 1e-9);

  // regularized logistic per-observation potential: surrogate matches the
  // finite-difference Hessian diagonal at the mode
  MatrixXd Pl(2, 2);
  Pl << 1.2, 0.3, 0.3, 0.8;
  VectorXd w(2), a(2);
  w << 0.2, -0.1;
  a << 0.7, 0.4;
  Potential fl = logistic_gaussian_potential(Pl, w, a, 1.0);
  const long n = 25;
  GaussianProduct gl = bvm_surrogate(fl, n);
  Mode mode = find_mode(fl, VectorXd::Zero(2));
  const double h = 1e-5;
  for (int i = 0; i < 2; ++i) {
    VectorXd e = VectorXd::Zero(2);
    e[i] = h;
    double hess_fd = (fl.grad(mode.x_star + e)[i] -
                      fl.grad(mode.x_star - e)[i]) /
                     (2.0 * h);
    CHECK(1.0 / (gl.std[i] * gl.std[i]) ==
          doctest::Approx(n * hess_fd).epsilon(1e-6));
  }
}

TEST_CASE("bvm_bound_smooth plug-in values and scaling") {
  CHECK(bvm_bound_smooth(1.0, 1.0, 4, 100) == doctest::Approx(0.4).epsilon(1e-15));
  double b1 = bvm_bound_smooth(1.0, 2.0, 3, 50);
  double b2 = bvm_bound_smooth(1.0, 2.0, 3, 100);
  CHECK(b1 / b2 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(bvm_bound_smooth(-1.0, 1.0, 2, 10), ParamError);
}

TEST_CASE("bvm_bound_local: limits, monotonicity, double entry") {
  // quadratic f_n (ell = 0): bound vanishes as s_n grows
  double large_s = bvm_bound_local(1.0, 1.0, 0.0, 0.0, 40.0, 1.0, 2, 50);
  CHECK(large_s < 1e-100);
  // monotone decreasing in s_n when only the tail term remains
  double prev = std::numeric_limits<double>::infinity();
  for (double s : {0.5, 1.0, 2.0, 4.0}) {
    double b = bvm_bound_local(1.0, 1.0, 0.0, 0.0, s, 1.0, 2, 50);
    CHECK(b < prev);
    prev = b;
  }
  // independent transcription of the displayed two-term formula
  {
    const double an = 1.0, bn = 2.0, ell = 0.5, tau = 0.0, s = 2.0, C = 1.0;
    const int d = 2;
    const long n = 50;
    double term1 = ell * ell * (d * d + 2.0 * d) /
                   (3.0 * std::pow(an, 4) * double(n) * double(n));
    double gap = n * an - tau;
    double term2 = std::pow(0.5 * n * bn, 0.5 * d) * C * (d + 2) *
                   std::pow(s, d) /
                   (std::tgamma(0.5 * d) * an * an * gap) *
                   std::exp(-0.5 * gap * s * s);
    double expect = std::sqrt(term1 + term2);
    CHECK(bvm_bound_local(an, bn, ell, tau, s, C, d, n) ==
          doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK_THROWS_AS(bvm_bound_local(1.0, 1.0, 0.1, 100.0, 2.0, 1.0, 2, 50),
                  DomainError);
  CHECK_THROWS_AS(bvm_bound_local(1.0, 1.0, 0.1, 0.0, 0.01, 1.0, 2, 50),
                  DomainError);
}

TEST_CASE("linreg potential algebra") {
  MatrixXd A = MatrixXd::Identity(3, 3);
  VectorXd w = VectorXd::Zero(3);
  Potential p = linreg_potential(A, w, 1.0, quadratic_prior(1.0));
  VectorXd beta(3);
  beta << 0.5, -1.0, 2.0;
  // v = x^2/2, A = I, w = 0, tau = 1: V(beta) = ||beta||^2, alpha = 2
  CHECK(p.value(beta) == doctest::Approx(beta.squaredNorm()).epsilon(1e-14));
  CHECK(p.alpha == doctest::Approx(2.0));

  // gradient: grad v + tau (A beta - w)
  MatrixXd A2(2, 2);
  A2 << 1.5, 0.2, 0.2, 0.8;
  VectorXd w2(2);
  w2 << 0.3, -0.6;
  Prior1D prior = quadratic_prior(0.7);
  Potential p2 = linreg_potential(A2, w2, 1.3, prior);
  VectorXd b2(2);
  b2 << 0.9, -0.4;
  VectorXd expect = 1.3 * (A2 * b2 - w2);
  for (int i = 0; i < 2; ++i) expect[i] += prior.grad(b2[i]);
  CHECK((p2.grad(b2) - expect).norm() < 1e-14);
}

TEST_CASE("Cor 'linear model' bound holds on synthetic data") {
  // y = X beta + noise; A = X'X, w = X'y; tau vs tau-hat
  const int n = 50, d = 5;
  std::mt19937_64 eng(8);
  std::normal_distribution<double> g;
  MatrixXd X(n, d);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) X(r, c) = 0.45 * g(eng);
  VectorXd beta_true(d);
  for (int c = 0; c < d; ++c) beta_true[c] = g(eng);
  VectorXd y = X * beta_true;
  for (int r = 0; r < n; ++r) y[r] += 0.3 * g(eng);
  MatrixXd A = X.transpose() * X;
  VectorXd w = X.transpose() * y;
  Prior1D prior = quadratic_prior(1.0);
  const double tau = 1.0, tau_hat = 1.15;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A);
  const double alpha1 = es.eigenvalues().minCoeff();
  REQUIRE(alpha1 > 0.0);

  SolverConfig cfg;
  cfg.seed = 61;
  LiftedSolution sol_tau = solve_lifted(linreg_potential(A, w, tau, prior),
                                        cfg);
  LiftedSolution sol_hat =
      solve_lifted(linreg_potential(A, w, tau_hat, prior), cfg);
  MCQuadrature q(cfg.seed, cfg.mc_samples, d);
  MatrixXd samples = push_samples(sol_hat.map, q);
  std::vector<double> sq(static_cast<std::size_t>(q.n));
  for (int k = 0; k < q.n; ++k)
    sq[static_cast<std::size_t>(k)] =
        (A * samples.row(k).transpose() - w).squaredNorm();
  double bound = std::sqrt(pairwise_mean(sq)) * std::abs(tau_hat - tau) /
                 (alpha1 * tau + prior.alpha);
  double measured = lp_distance(sol_tau.map, sol_hat.map, 2.0);
  CHECK(measured <= bound * 1.05);
}

TEST_CASE("bvm_linreg: surrogate, plug-in value, and n-scaling") {
  // quadratic prior and A = I: the surrogate equals the Gaussian mean-field
  // oracle, and the solved optimizer matches it to solver accuracy
  MatrixXd A = MatrixXd::Identity(2, 2);
  VectorXd w(2);
  w << 0.8, -0.5;
  Prior1D prior = quadratic_prior(1.0);
  BvMReport rep = bvm_linreg(A, w, 1.0, prior, 50);
  // posterior is N((I + I)^{-1} w, (2I)^{-1}): check the mode
  CHECK((rep.x_n_star - 0.5 * w).norm() <= 1e-7);
  CHECK((rep.d_n.array() - 2.0).abs().maxCoeff() <= 1e-9);

  SolverConfig cfg;
  cfg.seed = 62;
  LiftedSolution sol = solve_lifted(linreg_potential(A, w, 1.0, prior), cfg);
  GaussianProduct sur = bvm_linreg_surrogate(A, w, 1.0, prior);
  CHECK(lp_distance(sol.map, map_from_gaussian_product(sur, sol.map.grid),
                    2.0) <= 1e-3);

  // plug-in: d=5, n=100, tau=1, alpha_n=b_n=1, alpha0=b0=1
  BvMReport plug = bvm_linreg(MatrixXd::Identity(5, 5), VectorXd::Zero(5),
                              1.0, quadratic_prior(1.0), 100);
  CHECK(plug.bound_smooth ==
        doctest::Approx(2.0 * std::sqrt(5.0 * 4.0 / (100.0 * 8.0)))
            .epsilon(1e-12));
  CHECK(plug.bound_smooth == doctest::Approx(0.31623).epsilon(1e-4));

  BvMReport n4 = bvm_linreg(A, w, 1.0, prior, 400);
  CHECK(rep.bound_smooth / n4.bound_smooth ==
        doctest::Approx(std::sqrt(8.0)).epsilon(1e-12));
}

TEST_CASE("bvm squared-error corollary") {
  // || E_{nu*}[X] - x* ||^2 <= measured W2^2 <= bound^2
  MatrixXd P(2, 2);
  P << 2.0, 1.0, 1.0, 2.0;
  const long n = 80;
  Potential f = gaussian_potential(VectorXd::Zero(2), P);
  GaussianProduct sur = bvm_surrogate(f, n);
  Potential scaled = gaussian_potential(VectorXd::Zero(2),
                                        MatrixXd(double(n) * P));
  SolverConfig cfg;
  cfg.seed = 67;
  LiftedSolution sol = solve_lifted(scaled, cfg);
  VectorXd mean, sd;
  pushforward_moments(sol.map, mean, sd);
  double measured = lp_distance(
      sol.map, map_from_gaussian_product(sur, sol.map.grid), 2.0);
  double bound = bvm_bound_smooth(f.alpha, f.beta, 2, n);
  CHECK((mean - sur.mean).norm() <= measured + 1e-12);
  CHECK(measured <= bound);
}

TEST_CASE("prior swap uncertainty interval") {
  Potential lik = isotropic_gaussian_potential(3, 0.5);  // alpha_{n,d} = 2
  MCQuadrature q(63, 8192, 3);
  MatrixXd samples = push_samples(identity_map(make_grid(64), 3), q);
  auto grad_p = [](const VectorXd& x) { return VectorXd(-x); };
  PriorSwap same =
      prior_swap_interval(1.0, grad_p, grad_p, samples, lik.alpha, 1.0);
  CHECK(same.delta == 0.0);

  // N(0,1) vs N(mu,1) priors per coordinate: delta = |mu| sqrt(d)/(a+b)
  const double mu = 0.6;
  auto grad_pt = [mu](const VectorXd& x) {
    return VectorXd(-(x.array() - mu).matrix());
  };
  PriorSwap shifted = prior_swap_interval(
      1.0, grad_p, grad_pt, samples, lik.alpha, 1.0,
      [](const VectorXd& x) { return x.sum(); });
  double expect = mu * std::sqrt(3.0) / (lik.alpha + 1.0);
  CHECK(shifted.delta == doctest::Approx(expect).epsilon(1e-12));
  REQUIRE(shifted.statistic_mean.has_value());
  CHECK(*shifted.interval_hi - *shifted.interval_lo ==
        doctest::Approx(2.0 * shifted.delta).epsilon(1e-12));

  // delta is linear in ell
  PriorSwap doubled = prior_swap_interval(2.0, grad_p, grad_pt, samples,
                                          lik.alpha, 1.0);
  CHECK(doubled.delta == doctest::Approx(2.0 * shifted.delta).epsilon(1e-12));

  CHECK_THROWS_AS(
      prior_swap_interval(1.0, grad_p, grad_pt, samples, -2.0, 1.0),
      ParamError);
}

TEST_CASE("contamination sensitivity") {
  auto gauss = [](double mean, double var) {
    return LogDensity{
        [mean, var](const VectorXd& x) {
          double d = static_cast<double>(x.size());
          return -0.5 * (x.array() - mean).matrix().squaredNorm() / var -
                 0.5 * d * std::log(2.0 * M_PI * var);
        },
        [mean, var](const VectorXd& x) {
          return VectorXd(-(x.array() - mean).matrix() / var);
        }};
  };
  MCQuadrature q(64, 100000, 1);
  MatrixXd samples = push_samples(identity_map(make_grid(64), 1), q);

  CHECK(contamination_sensitivity(gauss(0, 1), gauss(1, 1), 0.0, samples, 1.0,
                                  0.5) == 0.0);
  CHECK(contamination_sensitivity(gauss(0, 1), gauss(0, 1), 0.1, samples, 1.0,
                                  0.5) == doctest::Approx(0.0).epsilon(1e-12));

  // 1-d p=N(0,1), q=N(1,1), eps=0.1: dense-grid quadrature oracle, nu* = rho
  const double eps = 0.1, alpha_nd = 1.0, alpha_eps = 0.5;
  double mc = contamination_sensitivity(gauss(0, 1), gauss(1, 1), eps, samples,
                                        alpha_nd, alpha_eps);
  const int n = 20001;
  const double lo = -10.0, hi = 11.0, dx = (hi - lo) / (n - 1);
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    double x = lo + k * dx;
    double p = norm_pdf(x);
    double qq = norm_pdf(x - 1.0);
    double peps = (1.0 - eps) * p + eps * qq;
    double ratio = qq / peps;
    double gd = (-(x - 1.0)) - (-x);  // = 1
    double w = (k == 0 || k == n - 1) ? 0.5 : 1.0;
    acc += w * ratio * ratio * gd * gd * p * dx;
  }
  double oracle = std::sqrt(acc) * eps / (alpha_nd + alpha_eps);
  CHECK(mc == doctest::Approx(oracle).epsilon(0.01));
  CHECK_THROWS_AS(contamination_sensitivity(gauss(0, 1), gauss(1, 1), 0.1,
                                            samples, -1.0, 0.5),
                  ParamError);
}

TEST_CASE("control potential and value identity") {
  const double T = 2.0;
  // g = 0: V = ||x||^2/(2T), optimizer N(0, T I), M(0) = 0
  Utility zero{2, 0.0, [](const VectorXd&) { return 0.0; },
               [](const VectorXd&) { return VectorXd(VectorXd::Zero(2)); },
               [](const VectorXd&) { return MatrixXd(MatrixXd::Zero(2, 2)); }};
  Potential v0 = control_potential(zero, T);
  CHECK(v0.alpha == doctest::Approx(1.0 / T));
  SolverConfig cfg;
  cfg.seed = 65;
  LiftedSolution sol = solve_lifted(v0, cfg);
  VectorXd mean, sd;
  pushforward_moments(sol.map, mean, sd);
  CHECK(mean.cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((sd.array() - std::sqrt(T)).abs().maxCoeff() <= 1e-3);
  CHECK(control_value_from_elbo(sol.elbo, 2, T) ==
        doctest::Approx(0.0).epsilon(1e-6).scale(1.0));

  // linear utility <c,x>: optimizer N(Tc, T I), M(g) = T ||c||^2 / 2
  VectorXd c(2);
  c << 0.4, -0.3;
  Utility lin{2, 0.0, [c](const VectorXd& x) { return c.dot(x); },
              [c](const VectorXd&) { return c; },
              [](const VectorXd&) { return MatrixXd(MatrixXd::Zero(2, 2)); }};
  LiftedSolution sol_lin = solve_lifted(control_potential(lin, T), cfg);
  pushforward_moments(sol_lin.map, mean, sd);
  CHECK((mean - T * c).cwiseAbs().maxCoeff() <= 1e-6);
  double value = control_value_from_elbo(sol_lin.elbo, 2, T);
  CHECK(value == doctest::Approx(0.5 * T * c.squaredNorm()).epsilon(1e-6));

  CHECK_THROWS_AS(control_potential(zero, -1.0), ParamError);
}

TEST_CASE("control value stability bound") {
  const double T = 1.5;
  VectorXd c(2), ct(2);
  c << 0.4, -0.3;
  ct << 0.1, 0.2;
  auto lin = [](const VectorXd& cc) {
    VectorXd cv = cc;
    return Utility{2, 0.0, [cv](const VectorXd& x) { return cv.dot(x); },
                   [cv](const VectorXd&) { return cv; },
                   [](const VectorXd&) {
                     return MatrixXd(MatrixXd::Zero(2, 2));
                   }};
  };
  Utility g = lin(c), gt = lin(ct);
  SolverConfig cfg;
  cfg.seed = 66;
  LiftedSolution sol = solve_lifted(control_potential(g, T), cfg);
  MCQuadrature q(cfg.seed, cfg.mc_samples, 2);
  MatrixXd samples = push_samples(sol.map, q);

  CHECK(control_value_stability(g, g, 0.0, T, samples) == 0.0);
  double bound = control_value_stability(g, gt, 0.0, T, samples);
  double exact_diff =
      0.5 * T * std::abs(c.squaredNorm() - ct.squaredNorm());
  CHECK(exact_diff <= bound);
  // the gradient-difference norm is exactly ||c - ct||
  CHECK(bound >= 2.0 * std::sqrt(T * 2.0) * (c - ct).norm());
  // beta-monotonicity
  CHECK(control_value_stability(g, gt, 1.0, T, samples) > bound);
}
