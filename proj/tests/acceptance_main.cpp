// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion pins its tolerances in code.

#include "mfvi/applications.hpp"
#include "mfvi/cli.hpp"
#include "mfvi/lifted.hpp"
#include "mfvi/oracle.hpp"
#include "mfvi/sensitivity.hpp"
#include "mfvi/stability.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <cstdarg>
#include <cstdio>
#include <random>

using namespace mfvi;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass,
            const std::string& detail) {
  std::printf("[%s] %2d %-28s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return std::string(buf);
}

MatrixXd random_spd(int d, std::mt19937_64& eng, double cond_max) {
  std::normal_distribution<double> g;
  MatrixXd A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = g(eng);
  Eigen::HouseholderQR<MatrixXd> qr(A);
  MatrixXd Q = qr.householderQ();
  std::uniform_real_distribution<double> ucond(1.5, cond_max);
  std::uniform_real_distribution<double> uscale(0.4, 1.6);
  double lmin = uscale(eng);
  VectorXd ev(d);
  ev[0] = lmin;
  double cond = ucond(eng);
  for (int i = 1; i < d; ++i)
    ev[i] = lmin * std::pow(cond, double(i) / std::max(1, d - 1));
  return Q * ev.asDiagonal() * Q.transpose();
}

// --------------------------------------------------------------------------

void criterion_1_gaussian_recovery() {
  std::mt19937_64 eng(101);
  double worst = 0.0, worst_time = 0.0;
  bool ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    int d = 2 + trial % 5;
    MatrixXd P = random_spd(d, eng, 20.0);
    std::normal_distribution<double> g;
    VectorXd mean(d);
    for (int i = 0; i < d; ++i) mean[i] = 0.5 * g(eng);
    Potential p = gaussian_potential(mean, P);
    SolverConfig cfg;
    cfg.seed = 1000 + static_cast<std::uint64_t>(trial);
    auto t0 = std::chrono::steady_clock::now();
    LiftedSolution sol = solve_lifted(p, cfg);
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    GaussianProduct oracle = gaussian_mfvi({mean, P});
    double err = lp_distance(
        sol.map, map_from_gaussian_product(oracle, sol.map.grid), 2.0);
    worst = std::max(worst, err);
    worst_time = std::max(worst_time, secs);
    ok = ok && err <= 1e-2 && secs <= 10.0;
  }
  report(1, "gaussian-mfvi-recovery", ok,
         fmt("20 instances d in {2..6}: max lp2 = %.2e (tol 1e-2), max time "
             "= %.2fs (cap 10s)",
             worst, worst_time));
}

void criterion_2_lipschitz() {
  bool ok = true;
  // tight mean-shift pairs
  double worst_ratio = 1.0;
  for (double delta : {0.1, 0.5, 1.0}) {
    MatrixXd id = MatrixXd::Identity(2, 2);
    Potential base = gaussian_potential(VectorXd::Zero(2), id);
    VectorXd m(2);
    m << delta, 0.0;
    Potential pert = gaussian_potential(m, id);
    SolverConfig cfg;
    cfg.seed = 210;
    LiftedSolution sb = solve_lifted(base, cfg);
    LiftedSolution sp = solve_lifted(pert, cfg);
    MCQuadrature q(cfg.seed, cfg.mc_samples, 2);
    StabilityReport r =
        lipschitz_w2_bound(base, pert, push_samples(sp.map, q));
    double measured = lp_distance(sb.map, sp.map, 2.0);
    double ratio = measured / r.bound_w2;
    ok = ok && measured <= r.bound_w2 * (1.0 + 1e-9) && ratio >= 0.95;
    worst_ratio = std::min(worst_ratio, ratio);
  }
  // fuzzed pairs
  std::mt19937_64 eng(202);
  std::normal_distribution<double> g;
  double worst_excess = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    int d = 2 + trial % 3;
    MatrixXd P = random_spd(d, eng, 8.0);
    MatrixXd Pt = random_spd(d, eng, 8.0);
    VectorXd mu(d), mut(d);
    for (int i = 0; i < d; ++i) {
      mu[i] = 0.4 * g(eng);
      mut[i] = 0.4 * g(eng);
    }
    Potential base = gaussian_potential(mu, P);
    Potential pert = gaussian_potential(mut, Pt);
    SolverConfig cfg;
    cfg.seed = 2000 + static_cast<std::uint64_t>(trial);
    LiftedSolution sb = solve_lifted(base, cfg);
    LiftedSolution sp = solve_lifted(pert, cfg);
    MCQuadrature q(cfg.seed, cfg.mc_samples, d);
    StabilityReport r =
        lipschitz_w2_bound(base, pert, push_samples(sp.map, q));
    double measured = lp_distance(sb.map, sp.map, 2.0);
    worst_excess = std::max(worst_excess, measured / r.bound_w2);
    ok = ok && measured <= r.bound_w2 * 1.05;
  }
  report(2, "lipschitz-sound-and-tight", ok,
         fmt("mean-shift min ratio = %.4f (>= 0.95); fuzz 50: max "
             "measured/bound = %.4f (<= 1.05)",
             worst_ratio, worst_excess));
}

void criterion_3_reward() {
  bool ok = true;
  double worst_gap = 0.0, worst_elbo_rel = 0.0;
  for (double s2 : {0.8, 1.0})
    for (double st2 : {1.44, 2.25})
      for (int d : {1, 2, 4}) {
        Potential base = isotropic_gaussian_potential(d, s2);
        Potential pert = isotropic_gaussian_potential(d, st2);
        SolverConfig cfg;
        cfg.seed = 300;
        LiftedSolution sb = solve_lifted(base, cfg);
        LiftedSolution sp = solve_lifted(pert, cfg);
        MCQuadrature q(cfg.seed, cfg.mc_samples, d);
        RewardBound rb =
            reward_bound(base, pert, push_samples(sp.map, q), false);
        double lhs = 0.5 * d * std::abs(std::log(s2 / st2));
        ok = ok && lhs <= rb.value;
        worst_gap = std::max(worst_gap, lhs / rb.value);
        double lhs_solver = std::abs(sb.elbo - sp.elbo);
        double rel = std::abs(lhs_solver - lhs) / lhs;
        worst_elbo_rel = std::max(worst_elbo_rel, rel);
        ok = ok && rel <= 0.02;
      }
  report(3, "reward-bound", ok,
         fmt("12 isotropic pairs: max lhs/bound = %.3f (<= 1); solver-ELBO "
             "lhs rel err = %.2e (<= 2e-2)",
             worst_gap, worst_elbo_rel));
}

void criterion_4_explicit_bounds() {
  bool ok = true;
  // (a) formula-vs-quadrature double entry
  double worst_rel = 0.0;
  for (int d : {1, 2, 3, 5})
    for (double pp : {1.0, 2.0, 3.0})
      for (double alpha : {0.5, 1.0, 2.0})
        for (double xn : {0.0, 0.8}) {
          auto radial = [alpha](double k) {
            return integrate_adaptive(
                [k, alpha](double r) {
                  return std::pow(r, k) * std::exp(-0.5 * alpha * r * r);
                },
                0.0, 40.0 / std::sqrt(alpha), 1e-14);
          };
          double quad = std::pow(2.0, pp - 1.0) * sphere_surface_area(d) *
                        (std::pow(xn, pp) * radial(d - 1.0) +
                         radial(pp + d - 1.0));
          double formula = poly_moment_bracket(d, pp, alpha, xn);
          double rel = std::abs(formula - quad) / quad;
          worst_rel = std::max(worst_rel, rel);
          ok = ok && rel <= 1e-10;
        }
  for (int d : {1, 2, 4})
    for (double alpha : {0.5, 1.5}) {
      const double hi = (1.0 + std::sqrt(2.0 * (d + 90.0))) /
                        std::min(1.0, alpha);
      const int n = 200001;
      const double h = hi / (n - 1);
      auto f = [d, alpha](double r) {
        return std::exp(r - 0.5 * alpha * r * r) * std::pow(r, double(d - 1));
      };
      double quad = f(0.0) + f(hi);
      for (int k = 1; k + 1 < n; ++k)
        quad += (k % 2 == 1 ? 4.0 : 2.0) * f(k * h);
      quad *= h / 3.0;
      double rel =
          std::abs(exp_half_radial_integral(d, alpha) - quad) / quad;
      worst_rel = std::max(worst_rel, rel);
      ok = ok && rel <= 1e-10;
    }

  // (b) envelope domination of solver-sample histograms on fuzzed targets
  std::mt19937_64 eng(404);
  int worst_viol = 0;
  for (int trial = 0; trial < 10; ++trial) {
    MatrixXd P = random_spd(2, eng, 6.0);
    std::normal_distribution<double> g;
    VectorXd mean(2);
    for (int i = 0; i < 2; ++i) mean[i] = 0.3 * g(eng);
    Potential p = gaussian_potential(mean, P);
    SolverConfig cfg;
    cfg.seed = 4000 + static_cast<std::uint64_t>(trial);
    LiftedSolution sol = solve_lifted(p, cfg);
    MCQuadrature q(cfg.seed, cfg.mc_samples, 2);
    MatrixXd samples = push_samples(sol.map, q);
    EnvelopeCertificate cert = density_envelope(p, q);
    const int bins = 24;
    const double span = 4.0 / std::sqrt(p.alpha);
    const double width = 2.0 * span / bins;
    MatrixXd counts = MatrixXd::Zero(bins, bins);
    for (int k = 0; k < samples.rows(); ++k) {
      int bx = static_cast<int>((samples(k, 0) - (mean[0] - span)) / width);
      int by = static_cast<int>((samples(k, 1) - (mean[1] - span)) / width);
      if (bx < 0 || bx >= bins || by < 0 || by >= bins) continue;
      counts(bx, by) += 1.0;
    }
    int violations = 0, nonempty = 0;
    for (int bx = 0; bx < bins; ++bx)
      for (int by = 0; by < bins; ++by) {
        if (counts(bx, by) == 0.0) continue;
        ++nonempty;
        double density = counts(bx, by) / (samples.rows() * width * width);
        VectorXd center(2);
        center << mean[0] - span + (bx + 0.5) * width,
            mean[1] - span + (by + 0.5) * width;
        double envelope =
            cert.C * std::exp(-0.5 * cert.alpha *
                              (center - cert.x_star).squaredNorm());
        if (density > envelope) ++violations;
      }
    ok = ok && violations * 100 <= nonempty;
    worst_viol = std::max(worst_viol, violations);
  }
  report(4, "explicit-bounds", ok,
         fmt("double entry rel err = %.1e (<= 1e-10); envelope domination "
             "worst violations = %d (<= 1%% of bins)",
             worst_rel, worst_viol));
}

void criterion_5_wp() {
  bool ok = true;
  double worst = 0.0;
  SolverConfig cfg;
  cfg.seed = 500;

  MatrixXd I2 = MatrixXd::Identity(2, 2);
  VectorXd e1(2);
  e1 << 1.0, 0.0;
  ParametricFamily shift = gaussian_mean_shift_family(I2, e1, {-1.0, 1.0});
  ParametricFamily scale =
      gaussian_precision_scale_family(1.0, 1.5625, 2, {-0.1, 1.1});
  struct Case {
    const ParametricFamily* fam;
    double th0, th;
  };
  Case cases[] = {{&shift, 0.0, 0.7}, {&scale, 0.0, 1.0}};
  for (const Case& c : cases) {
    LiftedSolution s0 = solve_lifted(c.fam->at(c.th0), cfg);
    LiftedSolution s1 = solve_lifted(c.fam->at(c.th), cfg);
    MCQuadrature q(cfg.seed, cfg.mc_samples, 2);
    MatrixXd samples = push_samples(s1.map, q);
    for (double pp : {2.0, 3.0, 4.0}) {
      WpBound wb = wp_bound(*c.fam, c.th, c.th0, samples, pp);
      double measured = lp_distance(s1.map, s0.map, pp);
      double ratio = measured / wb.map_bound;
      worst = std::max(worst, ratio);
      ok = ok && measured <= wb.map_bound * 1.05;
    }
  }
  report(5, "wp-bound", ok,
         fmt("p in {2,3,4}, mean-shift + precision-scale: max "
             "measured/bound = %.3f (<= 1.05)",
             worst));
}

void criterion_6_sensitivity() {
  bool ok = true;
  std::string parts;

  // (a) mean shift: S = e1
  {
    MatrixXd P(2, 2);
    P << 2.0, 1.0, 1.0, 2.0;
    VectorXd e1(2);
    e1 << 1.0, 0.0;
    ParametricFamily fam = gaussian_mean_shift_family(P, e1, {-1.0, 1.0});
    SolverConfig cfg;
    cfg.seed = 600;
    LiftedSolution sol = solve_lifted(fam.at(0.0), cfg);
    MCQuadrature q(cfg.seed, cfg.mc_samples, 2);
    SensitivitySolution der =
        solve_derivative(fam, 0.0, sol.map, HermiteBasis(6), q);
    MatrixXd target = MatrixXd::Zero(2, 7);
    target(0, 0) = 1.0;
    double err = (der.coeffs - target).norm();
    ok = ok && err <= 5e-2;
    parts += fmt("(a) |S-e1| = %.1e; ", err);
    ok = ok && der.lambda_min >= 0.95 * fam.at(0.0).alpha;
  }

  // (b,c) precision scale in 1-d: coefficient and fd slope
  {
    ParametricFamily fam =
        gaussian_precision_scale_family(0.0, 1.0, 1, {0.3, 1.7});
    SolverConfig cfg;
    cfg.seed = 601;
    cfg.mc_samples = 80000;  // CRN between solver and Galerkin assembly
    LiftedSolution sol = solve_lifted(fam.at(1.0), cfg);
    MCQuadrature q(cfg.seed, cfg.mc_samples, 1);
    SensitivitySolution der =
        solve_derivative(fam, 1.0, sol.map, HermiteBasis(6), q);
    double coeff = der.coeffs(0, 1);
    ok = ok && std::abs(coeff + 0.5) <= 5e-2;
    parts += fmt("(b) He1 coeff = %.4f; ", coeff);
    FdCheckReport fd =
        finite_diff_check(fam, 1.0, {0.2, 0.1, 0.05}, der, cfg);
    ok = ok && fd.slope >= 1.5;
    parts += fmt("(c) fd slope = %.2f; ", fd.slope);
    ok = ok && der.lambda_min >= 0.95 * fam.at(1.0).alpha;
  }

  // (d) coercivity on a third target
  {
    MatrixXd P(3, 3);
    P << 2.5, 0.6, 0.1, 0.6, 1.8, -0.4, 0.1, -0.4, 1.2;
    VectorXd dir(3);
    dir << 0.6, -0.8, 0.0;
    ParametricFamily fam = gaussian_mean_shift_family(P, dir, {-1.0, 1.0});
    SolverConfig cfg;
    cfg.seed = 602;
    LiftedSolution sol = solve_lifted(fam.at(0.0), cfg);
    MCQuadrature q(cfg.seed, cfg.mc_samples, 3);
    MatrixXd M = assemble_bilinear(sol.map, fam.at(0.0), HermiteBasis(6), q);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
    double lmin = es.eigenvalues().minCoeff();
    ok = ok && lmin >= 0.95 * fam.at(0.0).alpha;
    parts += fmt("(d) lambda_min/alpha = %.3f; ", lmin / fam.at(0.0).alpha);
  }

  // (e) first-order prediction error ratio decreases
  {
    ParametricFamily fam =
        gaussian_precision_scale_family(0.0, 1.0, 1, {0.4, 1.6});
    SolverConfig cfg;
    cfg.seed = 603;
    LiftedSolution sol = solve_lifted(fam.at(1.0), cfg);
    MCQuadrature q(cfg.seed, cfg.mc_samples, 1);
    SensitivitySolution der =
        solve_derivative(fam, 1.0, sol.map, HermiteBasis(6), q);
    double prev = std::numeric_limits<double>::infinity();
    bool mono = true;
    std::string seq = "(e) ratios:";
    for (double dt : {0.4, 0.2, 0.1, 0.05}) {
      TransportMap pred = first_order_predict(sol.map, der, 1.0 + dt, 1.0);
      LiftedSolution truth = solve_lifted(fam.at(1.0 + dt), cfg);
      double ratio = lp_distance(pred, truth.map, 2.0) / dt;
      seq += fmt(" %.3f", ratio);
      mono = mono && ratio < prev;
      prev = ratio;
    }
    ok = ok && mono;
    parts += seq;
  }

  report(6, "sensitivity", ok, parts);
}

void criterion_7_bvm() {
  bool ok = true;
  std::string parts;
  // quadratic f_n: the surrogate is exact up to solver error
  {
    MatrixXd P(2, 2);
    P << 2.0, 1.0, 1.0, 2.0;
    Potential f = gaussian_potential(VectorXd::Zero(2), P);
    const long n = 100;
    GaussianProduct sur = bvm_surrogate(f, n);
    Potential scaled = gaussian_potential(VectorXd::Zero(2), double(n) * P);
    SolverConfig cfg;
    cfg.seed = 700;
    LiftedSolution sol = solve_lifted(scaled, cfg);
    double measured = lp_distance(
        sol.map, map_from_gaussian_product(sur, sol.map.grid), 2.0);
    ok = ok && measured <= 1e-2;
    parts += fmt("quadratic W2 = %.1e (<= 1e-2); ", measured);
  }
  // perturbed-quadratic suite with certified constants
  double worst_smooth = 0.0, worst_local = 0.0;
  std::mt19937_64 eng(707);
  for (int trial = 0; trial < 6; ++trial) {
    int d = 2 + trial % 2;
    long n = (trial % 3 == 0) ? 60 : 120;
    MatrixXd P = random_spd(d, eng, 4.0);
    const double eps = 1.0;
    Potential f = perturbed_quadratic_potential(P, eps);
    const double alpha_n = f.alpha;  // lambda_min(P); softplus adds >= 0
    const double b_n = f.beta;
    const double ell_n = eps * kLogisticThirdDerivBound;
    const double tau_n = 0.0;
    const double C = 0.25 * eps * 0.25 * eps;
    const double s_n = 2.0 * std::sqrt((d + 2) / (n * alpha_n));

    GaussianProduct sur = bvm_surrogate(f, n);
    Potential base = f;
    double nn = static_cast<double>(n);
    Potential scaled = f;
    scaled.alpha = nn * f.alpha;
    scaled.beta = nn * f.beta;
    scaled.value = [base, nn](const VectorXd& x) {
      return nn * base.value(x);
    };
    scaled.grad = [base, nn](const VectorXd& x) {
      return VectorXd(nn * base.grad(x));
    };
    scaled.hessian = [base, nn](const VectorXd& x) {
      return MatrixXd(nn * base.hessian(x));
    };
    SolverConfig cfg;
    cfg.seed = 7000 + static_cast<std::uint64_t>(trial);
    LiftedSolution sol = solve_lifted(scaled, cfg);
    double measured = lp_distance(
        sol.map, map_from_gaussian_product(sur, sol.map.grid), 2.0);
    double bs = bvm_bound_smooth(alpha_n, b_n, d, n);
    double bl = bvm_bound_local(alpha_n, b_n, ell_n, tau_n, s_n, C, d, n);
    ok = ok && measured <= bs * 1.05 && measured <= bl * 1.05;
    worst_smooth = std::max(worst_smooth, measured / bs);
    worst_local = std::max(worst_local, measured / bl);
  }
  parts += fmt("perturbed suite: max W2/bound smooth = %.3f, local = %.3f "
               "(<= 1.05); ",
               worst_smooth, worst_local);
  double plug = bvm_bound_smooth(1.0, 1.0, 4, 100);
  ok = ok && plug == 0.4;
  parts += fmt("plug-in = %.17g (= 0.4)", plug);
  report(7, "bvm", ok, parts);
}

void criterion_8_incomplete_gamma() {
  std::mt19937_64 eng(808);
  std::uniform_real_distribution<double> ua(0.2, 4.0);
  std::uniform_int_distribution<int> ud(1, 6);
  bool ok = true;
  int trials = 0;
  double worst = 0.0;
  while (trials < 500) {
    double alpha = ua(eng);
    int d = ud(eng);
    double smin = std::sqrt((d + 2) / alpha);
    std::uniform_real_distribution<double> us(smin * 1.01, smin * 3.0);
    double s = us(eng);
    double b = incomplete_gamma_bound(alpha, s, d);
    double integral =
        sphere_surface_area(d) *
        integrate_adaptive(
            [alpha, d](double r) {
              return std::pow(r, d + 1) * std::exp(-0.5 * alpha * r * r);
            },
            s, s + 50.0 / std::sqrt(alpha), 1e-13);
    ok = ok && integral <= b * (1.0 + 1e-9);
    worst = std::max(worst, integral / b);
    ++trials;
  }
  double spot_bound = incomplete_gamma_bound(1.0, 3.0, 1);
  double spot_integral = 2.0 * integrate_adaptive(
                                   [](double y) {
                                     return y * y * std::exp(-0.5 * y * y);
                                   },
                                   3.0, 60.0, 1e-13);
  ok = ok && std::abs(spot_bound - 0.09998) <= 5e-6 &&
       std::abs(spot_integral - 0.0734) <= 5e-5 && spot_integral <= spot_bound;
  report(8, "incomplete-gamma", ok,
         fmt("500 fuzz trials: max integral/bound = %.3f (<= 1); spot "
             "bound %.5f >= integral %.5f",
             worst, spot_bound, spot_integral));
}

void criterion_9_cross_solver() {
  bool ok = true;
  std::string parts;
  // Gaussian suite
  std::mt19937_64 eng(909);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    int d = 2 + trial % 3;
    MatrixXd P = random_spd(d, eng, 6.0);
    VectorXd mean(d);
    for (int i = 0; i < d; ++i) mean[i] = 0.4 * g(eng);
    Potential p = gaussian_potential(mean, P);
    SolverConfig scfg;
    scfg.seed = 9000 + static_cast<std::uint64_t>(trial);
    LiftedSolution sol = solve_lifted(p, scfg);
    CaviConfig ccfg;
    ccfg.seed = scfg.seed;
    CaviResult cavi = cavi_solve(p, ccfg);
    double gap = lp_distance(cavi.map, sol.map, 2.0);
    worst = std::max(worst, gap);
    ok = ok && gap <= 5e-3;
  }
  parts += fmt("gaussian suite max cavi-vs-lifted lp2 = %.2e (<= 5e-3); ",
               worst);

  // committed 2-d logistic fixture
  try {
    nlohmann::json fx =
        nlohmann::json::parse(read_file(default_fixture_path()));
    auto vec = [](const nlohmann::json& a) {
      VectorXd v(static_cast<Eigen::Index>(a.size()));
      for (std::size_t i = 0; i < a.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
      return v;
    };
    VectorXd pf = vec(fx["params"]["precision"]);
    MatrixXd P(2, 2);
    P << pf[0], pf[1], pf[2], pf[3];
    Potential pot = logistic_gaussian_potential(
        P, vec(fx["params"]["w"]), vec(fx["params"]["a"]),
        fx["params"]["c"].get<double>());
    GridDensity marg[2];
    for (int i = 0; i < 2; ++i) {
      const auto& mj = fx["marginals"][static_cast<std::size_t>(i)];
      VectorXd dens = vec(mj["density"]);
      double x0 = mj["x0"].get<double>(), dx = mj["dx"].get<double>();
      marg[i].x =
          VectorXd::LinSpaced(dens.size(), x0, x0 + dx * (dens.size() - 1));
      marg[i].density = dens;
    }
    SolverConfig scfg;
    scfg.seed = 9100;
    LiftedSolution sol = solve_lifted(pot, scfg);
    CaviConfig ccfg;
    ccfg.seed = 9100;
    ccfg.mc_samples = 16384;
    CaviResult cavi = cavi_solve(pot, ccfg);
    double worst_fixture = 0.0;
    for (int i = 0; i < 2; ++i) {
      worst_fixture =
          std::max(worst_fixture, w2_1d_grid_vs_map(marg[i], sol.map, i));
      worst_fixture =
          std::max(worst_fixture, w2_1d_grid_vs_map(marg[i], cavi.map, i));
    }
    ok = ok && worst_fixture <= 5e-3;
    parts += fmt("logistic fixture max marginal W2 = %.2e (<= 5e-3)",
                 worst_fixture);
  } catch (const std::exception& e) {
    ok = false;
    parts += fmt("fixture error: %s", e.what());
  }
  report(9, "cross-solver-agreement", ok, parts);
}

void criterion_10_determinism() {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "mfvi_acceptance_oracle_check";
  fs::create_directories(dir);
  std::string cfg_path = (dir / "oracle_check.json.cfg").string();
  {
    Jv cfg = Jv::object();
    cfg.set("command", "oracle-check");
    cfg.set("seed", 2025);
    cfg.set("output_dir", (dir / "out").string());
    cfg.set("fixture", default_fixture_path());
    write_file(cfg_path, cfg.dump());
  }
  int rc1 = run_config_file(cfg_path);
  std::string first = read_file((dir / "out" / "oracle_check.json").string());
  int rc2 = run_config_file(cfg_path);
  std::string second = read_file((dir / "out" / "oracle_check.json").string());
  bool ok = rc1 == 0 && rc2 == 0 && first == second && !first.empty();
  fs::remove_all(dir);
  report(10, "determinism", ok,
         fmt("oracle-check exit codes %d/%d; report files byte-identical = "
             "%s (%zu bytes)",
             rc1, rc2, first == second ? "yes" : "no", first.size()));
}

}  // namespace

int main() {
  std::printf("acceptance suite (library version %s)\n", kVersion);
  criterion_1_gaussian_recovery();
  criterion_2_lipschitz();
  criterion_3_reward();
  criterion_4_explicit_bounds();
  criterion_5_wp();
  criterion_6_sensitivity();
  criterion_7_bvm();
  criterion_8_incomplete_gamma();
  criterion_9_cross_solver();
  criterion_10_determinism();
  if (g_failures > 0) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
