#include "mfvi/sensitivity.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace mfvi {

HermiteBasis::HermiteBasis(int degree_) : degree(degree_) {
  if (degree < 0 || degree > 20)
    throw ParamError("HermiteBasis: degree must be in [0, 20]");
  const int K = degree;
  mono_coeff = MatrixXd::Zero(K + 1, K + 1);
  mono_coeff(0, 0) = 1.0;
  if (K >= 1) mono_coeff(1, 1) = 1.0;
  for (int k = 1; k < K; ++k) {
    // he_{k+1} = (u he_k - sqrt(k) he_{k-1}) / sqrt(k+1)
    double inv = 1.0 / std::sqrt(k + 1.0);
    for (int t = 0; t <= k; ++t)
      mono_coeff(k + 1, t + 1) += inv * mono_coeff(k, t);
    double sk = std::sqrt(static_cast<double>(k));
    for (int t = 0; t <= k - 1; ++t)
      mono_coeff(k + 1, t) -= inv * sk * mono_coeff(k - 1, t);
  }
}

VectorXd HermiteBasis::values(double u) const {
  VectorXd v(degree + 1);
  v[0] = 1.0;
  if (degree >= 1) v[1] = u;
  for (int k = 1; k < degree; ++k)
    v[k + 1] = (u * v[k] - std::sqrt(static_cast<double>(k)) * v[k - 1]) /
               std::sqrt(k + 1.0);
  return v;
}

double SensitivitySolution::eval(int i, double u) const {
  VectorXd v = basis.values(u);
  return coeffs.row(i).dot(v);
}

namespace {

constexpr std::size_t kChunk = 2048;

MatrixXd combine_matrix_chunks(std::vector<MatrixXd>& parts) {
  std::function<MatrixXd(std::size_t, std::size_t)> comb =
      [&](std::size_t b, std::size_t e) -> MatrixXd {
    if (e - b == 1) return parts[b];
    std::size_t mid = b + (e - b) / 2;
    return comb(b, mid) + comb(mid, e);
  };
  return comb(0, parts.size());
}

// int_lo^hi he_a'(u) he_b'(u) phi(u) du via monomial expansion
double deriv_product_integral(const HermiteBasis& basis, int a, int b,
                              const std::vector<double>& moments) {
  if (a == 0 || b == 0) return 0.0;
  // he_a' = sqrt(a) he_{a-1}
  double scale = std::sqrt(static_cast<double>(a) * b);
  double total = 0.0;
  for (int s = 0; s <= a - 1; ++s) {
    double ca = basis.mono_coeff(a - 1, s);
    if (ca == 0.0) continue;
    for (int t = 0; t <= b - 1; ++t) {
      double cb = basis.mono_coeff(b - 1, t);
      if (cb == 0.0) continue;
      total += ca * cb * moments[static_cast<std::size_t>(s + t)];
    }
  }
  return scale * total;
}

}  // namespace

MatrixXd assemble_bilinear(const TransportMap& T0, const Potential& p0,
                           const HermiteBasis& basis, const MCQuadrature& q) {
  validate_potential(p0);
  const int d = p0.dim;
  if (T0.dim() != d || q.dim != d)
    throw ShapeError("assemble_bilinear: dimension mismatch");
  const int K = basis.degree;
  const int nb = K + 1;
  const int n = d * nb;

  // Hessian block by MC over the shared sample set
  const std::size_t ns = static_cast<std::size_t>(q.n);
  const std::size_t nc = chunk_count(ns, kChunk);
  std::vector<MatrixXd> parts(nc);
  run_chunks(ns, kChunk, 1, [&](std::size_t c, std::size_t b, std::size_t e) {
    MatrixXd part = MatrixXd::Zero(n, n);
    VectorXd x(d);
    MatrixXd hv(d, nb);
    for (std::size_t k = b; k < e; ++k) {
      for (int i = 0; i < d; ++i) {
        double u = q.points(static_cast<int>(k), i);
        x[i] = T0.eval1(i, u);
        hv.row(i) = basis.values(u).transpose();
      }
      MatrixXd H = p0.hessian(x);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          double hij = H(i, j);
          if (hij == 0.0) continue;
          part.block(i * nb, j * nb, nb, nb).noalias() +=
              hij * hv.row(i).transpose() * hv.row(j);
        }
    }
    parts[c] = std::move(part);
  });
  MatrixXd M = combine_matrix_chunks(parts) / static_cast<double>(q.n);

  // derivative block: (T0_i')^{-2} piecewise constant, exact interval masses
  const QuantileGrid& g = *T0.grid;
  const int m = g.m;
  const int kmax = std::max(0, 2 * K - 2);
  for (int i = 0; i < d; ++i) {
    MatrixXd block = MatrixXd::Zero(nb, nb);
    auto add_interval = [&](double lo, double hi, int seg) {
      double du = g.nodes[seg + 1] - g.nodes[seg];
      double slope = (T0.values(i, seg + 1) - T0.values(i, seg)) / du;
      double w = 1.0 / (slope * slope);
      auto mom = gaussian_partial_moments(lo, hi, kmax);
      for (int a = 1; a <= K; ++a)
        for (int b = 1; b <= K; ++b)
          block(a, b) += w * deriv_product_integral(basis, a, b, mom);
    };
    const double inf = std::numeric_limits<double>::infinity();
    add_interval(-inf, g.nodes[0], 0);
    for (int k = 1; k < m; ++k) add_interval(g.nodes[k - 1], g.nodes[k], k - 1);
    add_interval(g.nodes[m - 1], inf, m - 2);
    M.block(i * nb, i * nb, nb, nb) += block;
  }

  M = 0.5 * (M + M.transpose());
  return M;
}

VectorXd assemble_rhs(const ParametricFamily& fam, double theta0,
                      const TransportMap& T0, const HermiteBasis& basis,
                      const MCQuadrature& q) {
  const int d = T0.dim();
  if (q.dim != d) throw ShapeError("assemble_rhs: dimension mismatch");
  const int nb = basis.degree + 1;
  auto dgrad = [&](const VectorXd& x) {
    return fam.grad_theta_grad ? fam.grad_theta_grad(theta0, x)
                               : grad_theta_grad_fd(fam, theta0, x);
  };
  const std::size_t ns = static_cast<std::size_t>(q.n);
  const std::size_t nc = chunk_count(ns, kChunk);
  std::vector<MatrixXd> parts(nc);
  run_chunks(ns, kChunk, 1, [&](std::size_t c, std::size_t b, std::size_t e) {
    MatrixXd part = MatrixXd::Zero(d * nb, 1);
    VectorXd x(d);
    MatrixXd hv(d, nb);
    for (std::size_t k = b; k < e; ++k) {
      for (int i = 0; i < d; ++i) {
        double u = q.points(static_cast<int>(k), i);
        x[i] = T0.eval1(i, u);
        hv.row(i) = basis.values(u).transpose();
      }
      VectorXd gth = dgrad(x);
      for (int j = 0; j < d; ++j)
        part.block(j * nb, 0, nb, 1).noalias() -=
            gth[j] * hv.row(j).transpose();
    }
    parts[c] = std::move(part);
  });
  return combine_matrix_chunks(parts).col(0) / static_cast<double>(q.n);
}

SensitivitySolution solve_derivative(const ParametricFamily& fam,
                                     double theta0, const TransportMap& T0,
                                     const HermiteBasis& basis,
                                     const MCQuadrature& q) {
  Potential p0 = fam.at(theta0);
  MatrixXd M = assemble_bilinear(T0, p0, basis, q);
  VectorXd rhs = assemble_rhs(fam, theta0, T0, basis, q);
  Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
    throw AssemblyError(
        "solve_derivative: assembled matrix not positive definite; increase "
        "mc_samples or decrease basis degree");
  VectorXd c = llt.solve(rhs);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
  const int d = T0.dim(), nb = basis.degree + 1;
  SensitivitySolution sol{MatrixXd(d, nb), (M * c - rhs).norm(),
                          es.eigenvalues().maxCoeff() /
                              es.eigenvalues().minCoeff(),
                          es.eigenvalues().minCoeff(), basis};
  for (int i = 0; i < d; ++i)
    sol.coeffs.row(i) = c.segment(i * nb, nb).transpose();
  return sol;
}

TransportMap first_order_predict(const TransportMap& T0,
                                 const SensitivitySolution& S, double theta,
                                 double theta0) {
  const double dt = theta - theta0;
  MatrixXd v = T0.values;
  for (int i = 0; i < T0.dim(); ++i)
    for (int j = 0; j < T0.m(); ++j)
      v(i, j) += dt * S.eval(i, T0.grid->nodes[j]);
  try {
    return TransportMap(T0.grid, std::move(v));
  } catch (const MonotonicityError&) {
    throw MonotonicityError(
        "first_order_predict: prediction violates monotonicity; |theta - "
        "theta0| too large");
  }
}

FdCheckReport finite_diff_check(const ParametricFamily& fam, double theta0,
                                const std::vector<double>& h_list,
                                const SensitivitySolution& S,
                                const SolverConfig& cfg) {
  if (h_list.empty()) throw InputError("finite_diff_check: empty h list");
  FdCheckReport rep;
  GridPtr grid = make_grid(cfg.grid_m);
  MatrixXd s_nodes(S.coeffs.rows(), grid->m);
  for (int i = 0; i < s_nodes.rows(); ++i)
    for (int j = 0; j < grid->m; ++j)
      s_nodes(i, j) = S.eval(i, grid->nodes[j]);
  for (double h : h_list) {
    if (h == 0.0) throw InputError("finite_diff_check: h must be nonzero");
    if (theta0 - std::abs(h) <= fam.theta_domain.first ||
        theta0 + std::abs(h) >= fam.theta_domain.second)
      throw InputError("finite_diff_check: theta0 +- h leaves the domain");
    LiftedSolution hi = solve_lifted(fam.at(theta0 + h), cfg);
    LiftedSolution lo = solve_lifted(fam.at(theta0 - h), cfg);
    MatrixXd diff =
        (hi.map.values - lo.map.values) / (2.0 * h) - s_nodes;
    rep.h.push_back(h);
    rep.err.push_back(grid_function_l2(*grid, diff));
  }
  // least-squares slope of log err vs log h
  const auto n = rep.h.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    double x = std::log(std::abs(rep.h[k]));
    double y = std::log(std::max(rep.err[k], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double denom = n * sxx - sx * sx;
  rep.slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
  return rep;
}

}  // namespace mfvi
