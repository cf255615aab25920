#include "mfvi/lifted.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <cmath>
#include <limits>

namespace mfvi {

namespace {

constexpr std::size_t kChunk = 2048;

double combine_pairwise(std::vector<double>& parts) {
  return pairwise_sum(parts.data(), parts.size());
}

// frozen interpolation weights of the MC points on the grid: point (k,i)
// lands on segment seg with barycentric lam (lam outside [0,1] in the tails)
struct InterpCache {
  Eigen::MatrixXi seg;
  MatrixXd lam;
};

InterpCache make_interp(const QuantileGrid& g, const MCQuadrature& q) {
  InterpCache ic;
  ic.seg.resize(q.n, q.dim);
  ic.lam.resize(q.n, q.dim);
  const VectorXd& nodes = g.nodes;
  const int m = g.m;
  for (int k = 0; k < q.n; ++k)
    for (int i = 0; i < q.dim; ++i) {
      double u = q.points(k, i);
      int s;
      if (u <= nodes[0]) {
        s = 0;
      } else if (u >= nodes[m - 1]) {
        s = m - 2;
      } else {
        const double* b = nodes.data();
        s = static_cast<int>(std::upper_bound(b, b + m, u) - b) - 1;
        s = std::min(s, m - 2);
      }
      ic.seg(k, i) = s;
      ic.lam(k, i) = (u - nodes[s]) / (nodes[s + 1] - nodes[s]);
    }
  return ic;
}

double entropy_term(const QuantileGrid& g, const MatrixXd& v) {
  double total = 0.0;
  for (int i = 0; i < v.rows(); ++i)
    for (int k = 0; k < g.m - 1; ++k) {
      double s = (v(i, k + 1) - v(i, k)) / (g.nodes[k + 1] - g.nodes[k]);
      if (!(s > 0.0)) throw DomainError("eval_functional: map not monotone");
      total -= g.slope_mass[k] * std::log(s);
    }
  return total;
}

void add_entropy_grad(const QuantileGrid& g, const MatrixXd& v, MatrixXd& G) {
  for (int i = 0; i < v.rows(); ++i)
    for (int k = 0; k < g.m - 1; ++k) {
      double dt = v(i, k + 1) - v(i, k);
      double c = g.slope_mass[k] / dt;  // W_k / (s_k du_k)
      G(i, k) += c;
      G(i, k + 1) -= c;
    }
}

// Potential-term estimator with a second-order control variate at the mode:
// the quadratic Vhat(x) = (x-x*)'H*(x-x*)/2 is integrated in closed form
// over the piecewise-affine map, and the MC average applies only to the
// remainder V - Vhat. Same expectation as the plain MC average, exact for
// quadratic targets.
class PotentialEvaluator {
 public:
  PotentialEvaluator(const QuantileGrid& g, const Potential& p,
                     const MCQuadrature& q, int threads)
      : g_(g), p_(p), q_(q), threads_(threads), ic_(make_interp(g, q)) {
    Mode mode = find_mode(p, VectorXd::Zero(p.dim));
    x_star_ = mode.x_star;
    hess_ = p.hessian(x_star_);

    const int m = g.m;
    const double inf = std::numeric_limits<double>::infinity();
    auto add_interval = [&](double lo, double hi, int seg) {
      auto mom = gaussian_partial_moments(lo, hi, 2);
      intervals_.push_back({mom[0], mom[1], mom[2], seg});
    };
    add_interval(-inf, g.nodes[0], 0);
    for (int k = 1; k < m; ++k) add_interval(g.nodes[k - 1], g.nodes[k], k - 1);
    add_interval(g.nodes[m - 1], inf, m - 2);

    hat_mass_ = VectorXd::Zero(m);
    for (const Interval& iv : intervals_) {
      int s = iv.seg;
      double du = g.nodes[s + 1] - g.nodes[s];
      // hat_s = (u_{s+1} - u)/du, hat_{s+1} = (u - u_s)/du on this interval
      hat_mass_[s] += (g.nodes[s + 1] * iv.m0 - iv.m1) / du;
      hat_mass_[s + 1] += (iv.m1 - g.nodes[s] * iv.m0) / du;
    }
  }

  double value(const MatrixXd& v) const {
    return exact_quadratic_value(v) + mc_remainder_value(v);
  }

  void add_gradient(const MatrixXd& v, MatrixXd& G) const {
    add_exact_quadratic_grad(v, G);
    add_mc_remainder_grad(v, G);
  }

 private:
  struct Interval {
    double m0, m1, m2;
    int seg;
  };

  // E[T_i], E[T_i^2] and A(i,j) = E[(T_i - x*_i) hat_j(u)], exact
  void coord_stats(const MatrixXd& v, VectorXd& mean, VectorXd& msq,
                   MatrixXd* hat_corr) const {
    const int d = static_cast<int>(v.rows());
    mean = VectorXd::Zero(d);
    msq = VectorXd::Zero(d);
    if (hat_corr) hat_corr->setZero();
    for (int i = 0; i < d; ++i) {
      for (const Interval& iv : intervals_) {
        int s = iv.seg;
        double du = g_.nodes[s + 1] - g_.nodes[s];
        double b = (v(i, s + 1) - v(i, s)) / du;
        double a = v(i, s) - b * g_.nodes[s];
        mean[i] += a * iv.m0 + b * iv.m1;
        msq[i] += a * a * iv.m0 + 2.0 * a * b * iv.m1 + b * b * iv.m2;
        if (hat_corr) {
          double ash = a - x_star_[i];
          // (ash + b u)(p0 + p1 u) with hat_s: p0 = u_{s+1}/du, p1 = -1/du
          double p0 = g_.nodes[s + 1] / du, p1 = -1.0 / du;
          (*hat_corr)(i, s) += ash * p0 * iv.m0 +
                               (ash * p1 + b * p0) * iv.m1 + b * p1 * iv.m2;
          double q0 = -g_.nodes[s] / du, q1 = 1.0 / du;
          (*hat_corr)(i, s + 1) += ash * q0 * iv.m0 +
                                   (ash * q1 + b * q0) * iv.m1 +
                                   b * q1 * iv.m2;
        }
      }
    }
  }

  double exact_quadratic_value(const MatrixXd& v) const {
    const int d = static_cast<int>(v.rows());
    VectorXd mean, msq;
    coord_stats(v, mean, msq, nullptr);
    double total = 0.0;
    for (int i = 0; i < d; ++i) {
      double centered_sq =
          msq[i] - 2.0 * x_star_[i] * mean[i] + x_star_[i] * x_star_[i];
      total += 0.5 * hess_(i, i) * centered_sq;
      for (int l = 0; l < d; ++l)
        if (l != i)
          total += 0.5 * hess_(i, l) * (mean[i] - x_star_[i]) *
                   (mean[l] - x_star_[l]);
    }
    return total + p_.value(x_star_);
  }

  void add_exact_quadratic_grad(const MatrixXd& v, MatrixXd& G) const {
    const int d = static_cast<int>(v.rows());
    VectorXd mean, msq;
    MatrixXd hat_corr(d, v.cols());
    coord_stats(v, mean, msq, &hat_corr);
    for (int i = 0; i < d; ++i) {
      double cross = 0.0;
      for (int l = 0; l < d; ++l)
        if (l != i) cross += hess_(i, l) * (mean[l] - x_star_[l]);
      G.row(i) += hess_(i, i) * hat_corr.row(i) +
                  cross * hat_mass_.transpose();
    }
  }

  double vhat(const VectorXd& x) const {
    VectorXd c = x - x_star_;
    return 0.5 * c.dot(hess_ * c) + p_.value(x_star_);
  }

  double mc_remainder_value(const MatrixXd& v) const {
    const std::size_t n = static_cast<std::size_t>(q_.n);
    const int d = q_.dim;
    std::vector<double> chunk_sums(chunk_count(n, kChunk), 0.0);
    std::atomic<bool> bad{false};
    run_chunks(n, kChunk, threads_,
               [&](std::size_t c, std::size_t b, std::size_t e) {
                 VectorXd x(d);
                 std::vector<double> vals;
                 vals.reserve(e - b);
                 for (std::size_t k = b; k < e; ++k) {
                   for (int i = 0; i < d; ++i) {
                     int s = ic_.seg(static_cast<int>(k), i);
                     double lam = ic_.lam(static_cast<int>(k), i);
                     x[i] = v(i, s) * (1.0 - lam) + v(i, s + 1) * lam;
                   }
                   double val = p_.value(x);
                   if (!std::isfinite(val)) bad = true;
                   vals.push_back(val - vhat(x));
                 }
                 chunk_sums[c] = pairwise_sum(vals);
               });
    if (bad)
      throw EvalError("eval_functional: potential returned non-finite value");
    return combine_pairwise(chunk_sums) / static_cast<double>(n);
  }

  void add_mc_remainder_grad(const MatrixXd& v, MatrixXd& G) const {
    const std::size_t n = static_cast<std::size_t>(q_.n);
    const int d = q_.dim;
    const std::size_t nc = chunk_count(n, kChunk);
    std::vector<MatrixXd> parts(nc);
    std::atomic<bool> bad{false};
    run_chunks(n, kChunk, threads_,
               [&](std::size_t c, std::size_t b, std::size_t e) {
                 MatrixXd part = MatrixXd::Zero(v.rows(), v.cols());
                 VectorXd x(d);
                 for (std::size_t k = b; k < e; ++k) {
                   for (int i = 0; i < d; ++i) {
                     int s = ic_.seg(static_cast<int>(k), i);
                     double lam = ic_.lam(static_cast<int>(k), i);
                     x[i] = v(i, s) * (1.0 - lam) + v(i, s + 1) * lam;
                   }
                   VectorXd gr = p_.grad(x) - hess_ * (x - x_star_);
                   if (!gr.allFinite()) bad = true;
                   for (int i = 0; i < d; ++i) {
                     int s = ic_.seg(static_cast<int>(k), i);
                     double lam = ic_.lam(static_cast<int>(k), i);
                     part(i, s) += gr[i] * (1.0 - lam);
                     part(i, s + 1) += gr[i] * lam;
                   }
                 }
                 parts[c] = std::move(part);
               });
    if (bad)
      throw EvalError(
          "eval_first_variation: gradient returned non-finite value");
    std::function<MatrixXd(std::size_t, std::size_t)> comb =
        [&](std::size_t b, std::size_t e) -> MatrixXd {
      if (e - b == 1) return parts[b];
      std::size_t mid = b + (e - b) / 2;
      return comb(b, mid) + comb(mid, e);
    };
    G += comb(0, nc) / static_cast<double>(n);
  }

  const QuantileGrid& g_;
  const Potential& p_;
  const MCQuadrature& q_;
  int threads_;
  InterpCache ic_;
  VectorXd x_star_;
  MatrixXd hess_;
  std::vector<Interval> intervals_;
  VectorXd hat_mass_;
};

// Band projection used inside the solver: clamp slopes, re-anchor so the
// row mean of node values is preserved. Mean anchoring makes the projected
// gradient vanish at band-constrained optima (the feasible translation
// direction has gradient sum_j G_ij).
void project_values(const QuantileGrid& g, double lo, double hi, MatrixXd& v) {
  const int m = g.m;
  for (int i = 0; i < v.rows(); ++i) {
    double old_mean = v.row(i).mean();
    for (int k = 0; k < m - 1; ++k) {
      double du = g.nodes[k + 1] - g.nodes[k];
      double s = (v(i, k + 1) - v(i, k)) / du;
      v(i, k + 1) = v(i, k) + std::clamp(s, lo, hi) * du;
    }
    v.row(i).array() += old_mean - v.row(i).mean();
  }
}

}  // namespace

double eval_functional(const TransportMap& T, const Potential& p,
                       const MCQuadrature& q, int threads) {
  validate_potential(p);
  if (p.dim != T.dim() || q.dim != p.dim)
    throw ShapeError("eval_functional: dimension mismatch");
  PotentialEvaluator pe(*T.grid, p, q, threads);
  return entropy_term(*T.grid, T.values) + pe.value(T.values);
}

MatrixXd eval_first_variation(const TransportMap& T, const Potential& p,
                              const MCQuadrature& q, int threads) {
  validate_potential(p);
  if (p.dim != T.dim() || q.dim != p.dim)
    throw ShapeError("eval_first_variation: dimension mismatch");
  PotentialEvaluator pe(*T.grid, p, q, threads);
  MatrixXd G = MatrixXd::Zero(T.dim(), T.m());
  add_entropy_grad(*T.grid, T.values, G);
  pe.add_gradient(T.values, G);
  return G;
}

double elbo(const TransportMap& T, const Potential& p, const MCQuadrature& q,
            int threads) {
  double f = eval_functional(T, p, q, threads);
  return -f + 0.5 * p.dim * (std::log(2.0 * M_PI) + 1.0);
}

LiftedSolution solve_lifted(const Potential& p, const SolverConfig& cfg) {
  validate_potential(p);
  GridPtr grid = make_grid(cfg.grid_m);
  MCQuadrature q(cfg.seed, cfg.mc_samples, p.dim);
  PotentialEvaluator pe(*grid, p, q, cfg.threads);
  const QuantileGrid& g = *grid;
  const int d = p.dim, m = g.m;
  const double lo = 1.0 / std::sqrt(p.beta), hi = 1.0 / std::sqrt(p.alpha);

  MatrixXd v;
  if (cfg.init_map) {
    const TransportMap& init = *cfg.init_map;
    if (init.dim() != d) throw DomainError("solve_lifted: init map dimension");
    v.resize(d, m);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < m; ++j) v(i, j) = init.eval1(i, g.nodes[j]);
  } else {
    Mode mode = find_mode(p, VectorXd::Zero(d));
    v.resize(d, m);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < m; ++j) v(i, j) = mode.x_star[i] + g.nodes[j] * lo;
  }
  project_values(g, lo, hi, v);

  // Preconditioner: exact tridiagonal entropy Hessian at the current slopes
  // plus a beta-weighted hat-mass diagonal for the potential block. The
  // entropy block is stiff and node-local while smooth modes carry O(1)
  // curvature; a diagonal preconditioner overdamps them by ~m.
  VectorXd pot_diag(m);
  for (int j = 0; j < m; ++j)
    pot_diag[j] = p.beta * (g.interval_mass[j] + g.interval_mass[j + 1]) / 3.0;

  // dir_i = (H_ent(v_i) + diag(pot))^{-1} G_i, Thomas algorithm
  auto precondition = [&](const MatrixXd& vals, const MatrixXd& G) {
    MatrixXd dir(d, m);
    VectorXd diag(m), off(m - 1), rhs(m), cp(m - 1);
    for (int i = 0; i < d; ++i) {
      diag = pot_diag;
      for (int k = 0; k < m - 1; ++k) {
        double dt = vals(i, k + 1) - vals(i, k);
        double c = g.slope_mass[k] / (dt * dt);
        diag[k] += c;
        diag[k + 1] += c;
        off[k] = -c;
      }
      rhs = G.row(i);
      // forward sweep
      cp[0] = off[0] / diag[0];
      rhs[0] /= diag[0];
      for (int k = 1; k < m; ++k) {
        double denom = diag[k] - off[k - 1] * cp[k - 1];
        if (k < m - 1) cp[k] = off[k] / denom;
        rhs[k] = (rhs[k] - off[k - 1] * rhs[k - 1]) / denom;
      }
      for (int k = m - 2; k >= 0; --k) rhs[k] -= cp[k] * rhs[k + 1];
      dir.row(i) = rhs;
    }
    return dir;
  };
  // fixed probe step for the projected-gradient residual, from the initial
  // curvature scale
  double max_curv = pot_diag.maxCoeff();
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < m - 1; ++k) {
      double dt = v(i, k + 1) - v(i, k);
      max_curv = std::max(max_curv, 2.0 * g.slope_mass[k] / (dt * dt));
    }
  const double gamma0 = 1.0 / max_curv;
  const double res_scale = 1.0 / std::sqrt(static_cast<double>(d) * m);

  auto objective = [&](const MatrixXd& vals) {
    return entropy_term(g, vals) + pe.value(vals);
  };
  auto gradient = [&](const MatrixXd& vals) {
    MatrixXd G = MatrixXd::Zero(d, m);
    add_entropy_grad(g, vals, G);
    pe.add_gradient(vals, G);
    return G;
  };
  auto pg_residual = [&](const MatrixXd& vals, const MatrixXd& G) {
    MatrixXd cand = vals - gamma0 * G;
    project_values(g, lo, hi, cand);
    return (cand - vals).norm() / gamma0 * res_scale;
  };

  double F = objective(v);
  double step = 1.0;
  double residual = std::numeric_limits<double>::infinity();
  long it = 0;
  bool converged = false;
  while (it < cfg.max_iters) {
    ++it;
    MatrixXd G = gradient(v);
    residual = pg_residual(v, G);
    if (residual <= cfg.tol) {
      converged = true;
      break;
    }
    MatrixXd dir = precondition(v, G);
    step = std::min(step * 2.0, 2.0);
    bool accepted = false;
    while (step > 1e-16) {
      MatrixXd cand = v - step * dir;
      project_values(g, lo, hi, cand);
      double Fc;
      try {
        Fc = objective(cand);
      } catch (const EvalError&) {
        Fc = std::numeric_limits<double>::infinity();
      }
      double decr = (G.array() * (v - cand).array()).sum();
      if (Fc <= F - 1e-4 * std::max(decr, 0.0)) {
        v = std::move(cand);
        F = Fc;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // no improving step left; re-test stationarity at working precision
      residual = pg_residual(v, gradient(v));
      converged = residual <= cfg.tol;
      break;
    }
  }
  if (!converged)
    throw ConvergenceError("solve_lifted: did not reach tolerance", residual,
                           it);

  TransportMap map(grid, v);
  LiftedSolution sol{std::move(map), 0.0, F, residual, it, cfg.config_hash};
  sol.elbo = -F + 0.5 * d * (std::log(2.0 * M_PI) + 1.0);
  return sol;
}

// ---------------------------------------------------------------------------
// CAVI

double grid_density_mass(const GridDensity& gd) {
  const auto n = gd.x.size();
  double dx = gd.x[1] - gd.x[0];
  double s = 0.5 * (gd.density[0] + gd.density[n - 1]);
  for (Eigen::Index i = 1; i + 1 < n; ++i) s += gd.density[i];
  return s * dx;
}

namespace {

VectorXd density_cdf(const GridDensity& gd) {
  const auto n = gd.x.size();
  double dx = gd.x[1] - gd.x[0];
  VectorXd cdf(n);
  cdf[0] = 0.0;
  for (Eigen::Index i = 1; i < n; ++i)
    cdf[i] = cdf[i - 1] + 0.5 * dx * (gd.density[i - 1] + gd.density[i]);
  double total = cdf[n - 1];
  cdf /= total;
  return cdf;
}

double quantile_from_cdf(const GridDensity& gd, const VectorXd& cdf,
                         double pr) {
  const auto n = cdf.size();
  if (pr <= 0.0) return gd.x[0];
  if (pr >= 1.0) return gd.x[n - 1];
  const double* b = cdf.data();
  Eigen::Index k = std::upper_bound(b, b + n, pr) - b;
  if (k <= 0) return gd.x[0];
  if (k >= n) return gd.x[n - 1];
  double c0 = cdf[k - 1], c1 = cdf[k];
  double t = c1 > c0 ? (pr - c0) / (c1 - c0) : 0.5;
  return gd.x[k - 1] + t * (gd.x[k] - gd.x[k - 1]);
}

}  // namespace

double grid_density_quantile(const GridDensity& g, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw DomainError("grid_density_quantile: p must be in (0,1)");
  return quantile_from_cdf(g, density_cdf(g), p);
}

CaviResult cavi_solve(const Potential& p, const CaviConfig& cfg) {
  validate_potential(p);
  const int d = p.dim;
  const int G = cfg.grid_points;
  if (G < 9) throw ParamError("cavi: grid_points too small");
  Mode mode = find_mode(p, VectorXd::Zero(d));
  MatrixXd H0 = p.hessian(mode.x_star);

  const double half = cfg.span / std::sqrt(p.alpha);
  std::vector<GridDensity> marg(static_cast<std::size_t>(d));
  std::vector<VectorXd> cdfs(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    GridDensity gd;
    gd.x = VectorXd::LinSpaced(G, mode.x_star[i] - half, mode.x_star[i] + half);
    gd.density.resize(G);
    double prec = std::clamp(H0(i, i), p.alpha, p.beta);
    for (int g = 0; g < G; ++g) {
      double t = gd.x[g] - mode.x_star[i];
      gd.density[g] = std::exp(-0.5 * prec * t * t);
    }
    gd.density /= grid_density_mass(gd);
    marg[static_cast<std::size_t>(i)] = std::move(gd);
    cdfs[static_cast<std::size_t>(i)] =
        density_cdf(marg[static_cast<std::size_t>(i)]);
  }

  MCQuadrature q(cfg.seed, cfg.mc_samples, d);
  MatrixXd levels(q.n, d);  // Phi(u), reused across sweeps
  for (int k = 0; k < q.n; ++k)
    for (int i = 0; i < d; ++i) levels(k, i) = norm_cdf(q.points(k, i));

  MatrixXd X(q.n, d);
  auto refresh_column = [&](int i) {
    for (int k = 0; k < q.n; ++k)
      X(k, i) = quantile_from_cdf(marg[static_cast<std::size_t>(i)],
                                  cdfs[static_cast<std::size_t>(i)],
                                  levels(k, i));
  };
  for (int i = 0; i < d; ++i) refresh_column(i);

  const std::size_t n = static_cast<std::size_t>(q.n);
  long sweep = 0;
  double change = std::numeric_limits<double>::infinity();
  while (sweep < cfg.max_sweeps) {
    ++sweep;
    change = 0.0;
    for (int j = 0; j < d; ++j) {
      GridDensity& gd = marg[static_cast<std::size_t>(j)];
      // average over samples of V(x_j = grid point, X_{-j})
      const std::size_t nc = chunk_count(n, kChunk);
      std::vector<VectorXd> parts(nc);
      run_chunks(n, kChunk, cfg.threads,
                 [&](std::size_t c, std::size_t b, std::size_t e) {
                   VectorXd acc = VectorXd::Zero(G);
                   VectorXd x(d);
                   for (std::size_t k = b; k < e; ++k) {
                     x = X.row(static_cast<Eigen::Index>(k));
                     for (int g = 0; g < G; ++g) {
                       x[j] = gd.x[g];
                       acc[g] += p.value(x);
                     }
                   }
                   parts[c] = std::move(acc);
                 });
      std::function<VectorXd(std::size_t, std::size_t)> comb =
          [&](std::size_t b, std::size_t e) -> VectorXd {
        if (e - b == 1) return parts[b];
        std::size_t mid = b + (e - b) / 2;
        return comb(b, mid) + comb(mid, e);
      };
      VectorXd energy = comb(0, nc) / static_cast<double>(n);
      double emin = energy.minCoeff();
      VectorXd fresh(G);
      for (int g = 0; g < G; ++g) fresh[g] = std::exp(-(energy[g] - emin));
      GridDensity cand{gd.x, fresh};
      cand.density /= grid_density_mass(cand);
      double dx = gd.x[1] - gd.x[0];
      double l1 = (cand.density - gd.density).cwiseAbs().sum() * dx;
      change = std::max(change, l1);
      gd.density = cand.density;
      cdfs[static_cast<std::size_t>(j)] = density_cdf(gd);
      refresh_column(j);
    }
    if (change <= cfg.tol) break;
  }
  if (change > cfg.tol)
    throw ConvergenceError("cavi_solve: sweep cap reached", change, sweep);

  GridPtr out_grid = make_grid(cfg.grid_m);
  MatrixXd values(d, cfg.grid_m);
  const double denom = cfg.grid_m + 1;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < cfg.grid_m; ++j)
      values(i, j) = quantile_from_cdf(marg[static_cast<std::size_t>(i)],
                                       cdfs[static_cast<std::size_t>(i)],
                                       (j + 1) / denom);
  TransportMap map(out_grid, values);
  return CaviResult{std::move(marg), std::move(map), sweep, change};
}

}  // namespace mfvi
