#include "mfvi/oracle.hpp"

#include <Eigen/Cholesky>

#include <array>
#include <cmath>

namespace mfvi {

GaussianProduct gaussian_mfvi(const GaussianTarget& t) {
  const auto d = t.precision.rows();
  if (t.precision.cols() != d || t.mean.size() != d)
    throw ShapeError("gaussian_mfvi: shape mismatch");
  Eigen::LLT<MatrixXd> llt(t.precision);
  if (llt.info() != Eigen::Success)
    throw ParamError("gaussian_mfvi: precision not SPD");
  GaussianProduct gp;
  gp.mean = t.mean;
  gp.std = t.precision.diagonal().array().rsqrt();
  return gp;
}

double gaussian_product_w2(const GaussianProduct& a, const GaussianProduct& b) {
  if (a.mean.size() != b.mean.size())
    throw ShapeError("gaussian_product_w2: dimension mismatch");
  double s = (a.mean - b.mean).squaredNorm() + (a.std - b.std).squaredNorm();
  return std::sqrt(s);
}

TransportMap map_from_gaussian_product(const GaussianProduct& gp,
                                       GridPtr grid) {
  return affine_map(std::move(grid), gp.mean, gp.std);
}

double gaussian_fixed_point_residual(const GaussianTarget& t,
                                     const GaussianProduct& gp,
                                     int grid_points, double span) {
  const int d = static_cast<int>(t.mean.size());
  // For V = (x-m)'P(x-m)/2 the conditional energy is analytic:
  //   E_{-j} V(x_j, X_{-j}) = P_jj x_j^2/2 - x_j b_j + const,
  //   b_j = (P m)_j - sum_{i != j} P_ji mu_i,
  // so the fixed-point update is N(b_j / P_jj, 1/P_jj). The residual is the
  // worst per-coordinate L1 gap between gp's marginal and that density.
  double worst = 0.0;
  VectorXd pm = t.precision * t.mean;
  for (int j = 0; j < d; ++j) {
    double bj = pm[j];
    for (int i = 0; i < d; ++i)
      if (i != j) bj -= t.precision(j, i) * gp.mean[i];
    double prec = t.precision(j, j);
    double mu = bj / prec, sd = 1.0 / std::sqrt(prec);
    double lo = mu - span * sd, hi = mu + span * sd;
    double dx = (hi - lo) / (grid_points - 1);
    double l1 = 0.0;
    for (int g = 0; g < grid_points; ++g) {
      double x = lo + g * dx;
      double fixed = norm_pdf((x - mu) / sd) / sd;
      double cand = norm_pdf((x - gp.mean[j]) / gp.std[j]) / gp.std[j];
      double w = (g == 0 || g == grid_points - 1) ? 0.5 : 1.0;
      l1 += w * std::abs(fixed - cand) * dx;
    }
    worst = std::max(worst, l1);
  }
  return worst;
}

std::pair<GridDensity, GridDensity> brute_force_mfvi_2d(
    const Potential& p, const BruteForceConfig& cfg) {
  validate_potential(p);
  if (p.dim != 2) throw ParamError("brute_force_mfvi_2d: requires dim == 2");
  const int G = cfg.grid_points;
  Mode mode = find_mode(p, VectorXd::Zero(2));
  const double half = cfg.span / std::sqrt(p.alpha);

  std::array<GridDensity, 2> marg;
  for (int i = 0; i < 2; ++i) {
    marg[i].x = VectorXd::LinSpaced(G, mode.x_star[i] - half,
                                    mode.x_star[i] + half);
    marg[i].density.resize(G);
  }
  MatrixXd H0 = p.hessian(mode.x_star);
  for (int i = 0; i < 2; ++i) {
    for (int g = 0; g < G; ++g) {
      double t = marg[i].x[g] - mode.x_star[i];
      marg[i].density[g] = std::exp(-0.5 * H0(i, i) * t * t);
    }
    marg[i].density /= grid_density_mass(marg[i]);
  }

  // tabulate V on the product grid once
  MatrixXd V(G, G);
  VectorXd x(2);
  for (int a = 0; a < G; ++a) {
    x[0] = marg[0].x[a];
    for (int b = 0; b < G; ++b) {
      x[1] = marg[1].x[b];
      V(a, b) = p.value(x);
    }
  }

  auto trapw = [G](int g) { return (g == 0 || g == G - 1) ? 0.5 : 1.0; };
  long sweep = 0;
  double change = std::numeric_limits<double>::infinity();
  while (sweep < cfg.max_sweeps) {
    ++sweep;
    change = 0.0;
    for (int j = 0; j < 2; ++j) {
      const GridDensity& other = marg[1 - j];
      double dx_other = other.x[1] - other.x[0];
      VectorXd weights(G);
      for (int g = 0; g < G; ++g)
        weights[g] = trapw(g) * other.density[g] * dx_other;
      VectorXd energy = (j == 0) ? VectorXd(V * weights)
                                 : VectorXd(V.transpose() * weights);
      double emin = energy.minCoeff();
      VectorXd fresh = (-(energy.array() - emin)).exp().matrix();
      GridDensity cand{marg[j].x, fresh};
      cand.density /= grid_density_mass(cand);
      double dx = marg[j].x[1] - marg[j].x[0];
      change = std::max(
          change, (cand.density - marg[j].density).cwiseAbs().sum() * dx);
      marg[j].density = cand.density;
    }
    if (change <= cfg.tol) break;
  }
  if (change > cfg.tol)
    throw ConvergenceError("brute_force_mfvi_2d: sweep cap reached", change,
                           sweep);
  return {marg[0], marg[1]};
}

double w2_1d(const std::function<double(double)>& quantile_a,
             const std::function<double(double)>& quantile_b, int panels,
             double clip) {
  // substitute p = Phi(u): int_0^1 (Qa - Qb)^2 dp =
  // int (Qa(Phi(u)) - Qb(Phi(u)))^2 phi(u) du, which is well-behaved at the
  // ends; composite Simpson over u in +-u_clip
  const double u_hi = -norm_quantile(clip);
  const double h = 2.0 * u_hi / panels;
  auto f = [&](double u) {
    double pr = norm_cdf(u);
    double d = quantile_a(pr) - quantile_b(pr);
    return d * d * norm_pdf(u);
  };
  double total = f(-u_hi) + f(u_hi);
  for (int k = 1; k < panels; ++k)
    total += (k % 2 == 1 ? 4.0 : 2.0) * f(-u_hi + k * h);
  return std::sqrt(std::max(0.0, total * h / 3.0));
}

double w2_1d_grid_vs_map(const GridDensity& g, const TransportMap& T, int i) {
  return w2_1d([&](double pr) { return grid_density_quantile(g, pr); },
               [&](double pr) { return T.eval1(i, norm_quantile(pr)); });
}

}  // namespace mfvi
