#include "mfvi/transport.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mfvi {

QuantileGrid::QuantileGrid(int m_) : m(m_) {
  if (m < 3) throw ParamError("QuantileGrid: m must be >= 3");
  nodes.resize(m);
  const double denom = m + 1;
  // fill half and mirror so symmetry about 0 is exact
  for (int j = 0; j < m / 2; ++j) {
    double u = norm_quantile((j + 1) / denom);
    nodes[j] = u;
    nodes[m - 1 - j] = -u;
  }
  if (m % 2 == 1) nodes[m / 2] = 0.0;

  interval_mass.resize(m + 1);
  interval_mass[0] = norm_cdf(nodes[0]);
  for (int k = 1; k < m; ++k)
    interval_mass[k] = norm_cdf(nodes[k]) - norm_cdf(nodes[k - 1]);
  interval_mass[m] = 1.0 - norm_cdf(nodes[m - 1]);

  slope_mass.resize(m - 1);
  for (int k = 0; k < m - 1; ++k) slope_mass[k] = interval_mass[k + 1];
  slope_mass[0] += interval_mass[0];
  slope_mass[m - 2] += interval_mass[m];
}

GridPtr make_grid(int m) { return std::make_shared<const QuantileGrid>(m); }

namespace {

// segment index whose affine piece evaluates T at u (tails extrapolate the
// end segments)
inline int segment_of(const VectorXd& nodes, double u) {
  const int m = static_cast<int>(nodes.size());
  if (u <= nodes[0]) return 0;
  if (u >= nodes[m - 1]) return m - 2;
  const double* begin = nodes.data();
  int k = static_cast<int>(std::upper_bound(begin, begin + m, u) - begin) - 1;
  return std::min(k, m - 2);
}

struct Affine {
  double a, b;  // f(u) = a + b u
};

inline Affine segment_affine(const VectorXd& nodes, const double* row, int k) {
  double du = nodes[k + 1] - nodes[k];
  double b = (row[k + 1] - row[k]) / du;
  return {row[k] - b * nodes[k], b};
}

// visit the m+1 grid intervals with the segment that rules each of them
template <typename F>
void for_each_interval(const QuantileGrid& g, F&& f) {
  const int m = g.m;
  f(0, -std::numeric_limits<double>::infinity(), g.nodes[0], 0);
  for (int k = 1; k < m; ++k) f(k, g.nodes[k - 1], g.nodes[k], k - 1);
  f(m, g.nodes[m - 1], std::numeric_limits<double>::infinity(), m - 2);
}

void check_monotone(const MatrixXd& values) {
  for (int i = 0; i < values.rows(); ++i)
    for (int j = 0; j + 1 < values.cols(); ++j)
      if (!(values(i, j + 1) > values(i, j)))
        throw MonotonicityError(
            "TransportMap: node values must be strictly increasing "
            "(coordinate " +
            std::to_string(i) + ", node " + std::to_string(j) + ")");
}

}  // namespace

TransportMap::TransportMap(GridPtr grid_, MatrixXd values_)
    : grid(std::move(grid_)), values(std::move(values_)) {
  if (!grid) throw ParamError("TransportMap: null grid");
  if (values.cols() != grid->m)
    throw ShapeError("TransportMap: values must have grid->m columns");
  if (values.rows() < 1) throw ShapeError("TransportMap: empty map");
  check_monotone(values);
}

double TransportMap::eval1(int i, double u) const {
  const VectorXd& nodes = grid->nodes;
  int k = segment_of(nodes, u);
  double lam = (u - nodes[k]) / (nodes[k + 1] - nodes[k]);
  return values(i, k) * (1.0 - lam) + values(i, k + 1) * lam;
}

double TransportMap::slope1(int i, double u) const {
  const VectorXd& nodes = grid->nodes;
  int k = segment_of(nodes, u);
  return (values(i, k + 1) - values(i, k)) / (nodes[k + 1] - nodes[k]);
}

VectorXd eval_map(const TransportMap& T, const VectorXd& u) {
  if (u.size() != T.dim()) throw ShapeError("eval_map: dimension mismatch");
  VectorXd out(T.dim());
  for (int i = 0; i < T.dim(); ++i) out[i] = T.eval1(i, u[i]);
  return out;
}

VectorXd eval_slope(const TransportMap& T, const VectorXd& u) {
  if (u.size() != T.dim()) throw ShapeError("eval_slope: dimension mismatch");
  VectorXd out(T.dim());
  for (int i = 0; i < T.dim(); ++i) out[i] = T.slope1(i, u[i]);
  return out;
}

TransportMap identity_map(GridPtr grid, int dim) {
  MatrixXd v(dim, grid->m);
  for (int i = 0; i < dim; ++i) v.row(i) = grid->nodes.transpose();
  return TransportMap(std::move(grid), std::move(v));
}

TransportMap affine_map(GridPtr grid, const VectorXd& mean,
                        const VectorXd& std) {
  const int d = static_cast<int>(mean.size());
  if (std.size() != d) throw ShapeError("affine_map: mean/std size mismatch");
  if ((std.array() <= 0.0).any())
    throw ParamError("affine_map: std must be positive");
  MatrixXd v(d, grid->m);
  for (int i = 0; i < d; ++i)
    v.row(i) = (mean[i] + std[i] * grid->nodes.array()).transpose();
  return TransportMap(std::move(grid), std::move(v));
}

TransportMap project_band(const TransportMap& T, double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta >= alpha))
    throw ParamError("project_band: need 0 < alpha <= beta");
  const double lo = 1.0 / std::sqrt(beta), hi = 1.0 / std::sqrt(alpha);
  const int d = T.dim(), m = T.m();
  const int anchor = (m + 1) / 2 - 1;  // 0-based index of node ceil(m/2)
  const VectorXd& nodes = T.grid->nodes;
  MatrixXd v(d, m);
  for (int i = 0; i < d; ++i) {
    VectorXd inc(m - 1);
    for (int k = 0; k < m - 1; ++k) {
      double du = nodes[k + 1] - nodes[k];
      double s = (T.values(i, k + 1) - T.values(i, k)) / du;
      inc[k] = std::clamp(s, lo, hi) * du;
    }
    v(i, anchor) = T.values(i, anchor);
    for (int k = anchor; k < m - 1; ++k) v(i, k + 1) = v(i, k) + inc[k];
    for (int k = anchor - 1; k >= 0; --k) v(i, k) = v(i, k + 1) - inc[k];
  }
  return TransportMap(T.grid, std::move(v));
}

bool in_band(const TransportMap& T, double alpha, double beta, double tol) {
  const double lo = 1.0 / std::sqrt(beta), hi = 1.0 / std::sqrt(alpha);
  const VectorXd& nodes = T.grid->nodes;
  for (int i = 0; i < T.dim(); ++i)
    for (int k = 0; k + 1 < T.m(); ++k) {
      double s =
          (T.values(i, k + 1) - T.values(i, k)) / (nodes[k + 1] - nodes[k]);
      if (s < lo - tol || s > hi + tol) return false;
    }
  return true;
}

namespace {

// int_lo^hi (a + b u)^2 phi(u) du
inline double affine_sq_mass(const Affine& f, double lo, double hi) {
  auto mom = gaussian_partial_moments(lo, hi, 2);
  return f.a * f.a * mom[0] + 2.0 * f.a * f.b * mom[1] + f.b * f.b * mom[2];
}

// int_lo^hi (a + b u)^pow phi(u) du for integer pow >= 0
double affine_pow_mass(const Affine& f, int pow, double lo, double hi) {
  auto mom = gaussian_partial_moments(lo, hi, pow);
  double total = 0.0, binom = 1.0;
  // (a+bu)^pow = sum_k C(pow,k) a^{pow-k} b^k u^k
  for (int k = 0; k <= pow; ++k) {
    total += binom * std::pow(f.a, pow - k) * std::pow(f.b, k) * mom[k];
    binom = binom * (pow - k) / (k + 1.0);
  }
  return total;
}

MatrixXd resample_values(const TransportMap& src, const QuantileGrid& grid) {
  MatrixXd v(src.dim(), grid.m);
  for (int i = 0; i < src.dim(); ++i)
    for (int j = 0; j < grid.m; ++j) v(i, j) = src.eval1(i, grid.nodes[j]);
  return v;
}

// per-coordinate moments E[D_i(u)^{2k}], k = 1..q, for the node-difference
// rows of two maps on a shared grid
MatrixXd diff_even_moments(const QuantileGrid& g, const MatrixXd& diff,
                           int q) {
  MatrixXd mom = MatrixXd::Zero(diff.rows(), q);
  for (int i = 0; i < diff.rows(); ++i) {
    VectorXd r = diff.row(i);  // contiguous copy of the row
    for_each_interval(g, [&](int, double lo, double hi, int seg) {
      Affine f = segment_affine(g.nodes, r.data(), seg);
      for (int k = 1; k <= q; ++k)
        mom(i, k - 1) += affine_pow_mass(f, 2 * k, lo, hi);
    });
  }
  return mom;
}

// E[(X_1+...+X_d)^q] with independent X_i given E[X_i^k], via the multinomial
// theorem
double sum_power_expectation(const MatrixXd& mom, int q) {
  const int d = static_cast<int>(mom.rows());
  double total = 0.0;
  std::vector<int> comp(d, 0);
  std::function<void(int, int, double)> rec = [&](int i, int left,
                                                  double coeff) {
    if (i == d - 1) {
      double term = coeff;
      if (left > 0) term *= mom(i, left - 1);
      total += term;
      return;
    }
    double binom = 1.0;  // C(left, k) accumulated incrementally
    for (int k = 0; k <= left; ++k) {
      double term = coeff * binom;
      if (k > 0) term *= mom(i, k - 1);
      rec(i + 1, left - k, term);
      binom = binom * (left - k) / (k + 1.0);
    }
  };
  rec(0, q, 1.0);
  return total;
}

// 1-d quadrature nodes/weights (weight already includes phi) covering the
// grid intervals with Gauss-Legendre panels and truncated tails
void dense_coordinate_rule(const QuantileGrid& g, std::vector<double>& pts,
                           std::vector<double>& wts, int gl_order) {
  static const std::array<double, 4> gl4x = {
      -0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
      0.8611363115940526};
  static const std::array<double, 4> gl4w = {
      0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
      0.3478548451374538};
  static const std::array<double, 8> gl8x = {
      -0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
      -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
      0.7966664774136267,  0.9602898564975363};
  static const std::array<double, 8> gl8w = {
      0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
      0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
      0.2223810344533745, 0.1012285362903763};

  const double umax = std::max(8.0, g.nodes[g.m - 1] + 8.0);
  std::vector<double> bounds;
  const int tail_panels = 8;
  for (int t = 0; t < tail_panels; ++t)
    bounds.push_back(-umax + t * (g.nodes[0] + umax) / tail_panels);
  for (int j = 0; j < g.m; ++j) bounds.push_back(g.nodes[j]);
  for (int t = 1; t <= tail_panels; ++t)
    bounds.push_back(g.nodes[g.m - 1] + t * (umax - g.nodes[g.m - 1]) / tail_panels);

  auto add_panel = [&](double a, double b) {
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    if (gl_order == 8) {
      for (int q = 0; q < 8; ++q) {
        double u = c + h * gl8x[q];
        pts.push_back(u);
        wts.push_back(h * gl8w[q] * norm_pdf(u));
      }
    } else {
      for (int q = 0; q < 4; ++q) {
        double u = c + h * gl4x[q];
        pts.push_back(u);
        wts.push_back(h * gl4w[q] * norm_pdf(u));
      }
    }
  };
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k)
    add_panel(bounds[k], bounds[k + 1]);
}

double lp_dense(const QuantileGrid& g, const MatrixXd& diff, double p) {
  const int d = static_cast<int>(diff.rows());
  if (d > 3)
    throw DomainError(
        "lp_distance: non-even p supported for dim <= 3 only; use p = 2 or an "
        "even integer");
  std::vector<double> pts, wts;
  dense_coordinate_rule(g, pts, wts, d <= 2 ? 8 : 4);
  const int P = static_cast<int>(pts.size());
  // tabulate D_i(u_q)^2 per coordinate
  MatrixXd d2(d, P);
  for (int i = 0; i < d; ++i) {
    VectorXd row = diff.row(i);
    for (int q = 0; q < P; ++q) {
      int seg = segment_of(g.nodes, pts[q]);
      Affine f = segment_affine(g.nodes, row.data(), seg);
      double v = f.a + f.b * pts[q];
      d2(i, q) = v * v;
    }
  }
  const double half_p = 0.5 * p;
  double total = 0.0;
  if (d == 1) {
    std::vector<double> acc(P);
    for (int q = 0; q < P; ++q)
      acc[q] = wts[q] * std::pow(d2(0, q), half_p);
    total = pairwise_sum(acc);
  } else if (d == 2) {
    std::vector<double> acc(P);
    for (int q0 = 0; q0 < P; ++q0) {
      double inner = 0.0;
      for (int q1 = 0; q1 < P; ++q1)
        inner += wts[q1] * std::pow(d2(0, q0) + d2(1, q1), half_p);
      acc[q0] = wts[q0] * inner;
    }
    total = pairwise_sum(acc);
  } else {
    std::vector<double> acc(P);
    for (int q0 = 0; q0 < P; ++q0) {
      double mid = 0.0;
      for (int q1 = 0; q1 < P; ++q1) {
        double inner = 0.0;
        double base = d2(0, q0) + d2(1, q1);
        for (int q2 = 0; q2 < P; ++q2)
          inner += wts[q2] * std::pow(base + d2(2, q2), half_p);
        mid += wts[q1] * inner;
      }
      acc[q0] = wts[q0] * mid;
    }
    total = pairwise_sum(acc);
  }
  return std::pow(total, 1.0 / p);
}

}  // namespace

double lp_distance(const TransportMap& T, const TransportMap& S, double p) {
  if (T.dim() != S.dim()) throw ShapeError("lp_distance: dimension mismatch");
  if (!(p >= 1.0)) throw ParamError("lp_distance: p must be >= 1");

  // resample onto the finer grid when the grids differ
  GridPtr grid = T.grid;
  MatrixXd diff;
  if (T.m() == S.m()) {
    diff = T.values - S.values;
  } else if (T.m() > S.m()) {
    grid = T.grid;
    diff = T.values - resample_values(S, *grid);
  } else {
    grid = S.grid;
    diff = resample_values(T, *grid) - S.values;
  }
  const QuantileGrid& g = *grid;

  if (p == 2.0) {
    double total = 0.0;
    for (int i = 0; i < diff.rows(); ++i) {
      VectorXd row = diff.row(i);
      for_each_interval(g, [&](int, double lo, double hi, int seg) {
        total += affine_sq_mass(segment_affine(g.nodes, row.data(), seg), lo,
                                hi);
      });
    }
    return std::sqrt(total);
  }
  double ip;
  if (std::modf(p, &ip) == 0.0 && static_cast<long>(ip) % 2 == 0) {
    int q = static_cast<int>(ip) / 2;
    MatrixXd mom = diff_even_moments(g, diff, q);
    return std::pow(sum_power_expectation(mom, q), 1.0 / p);
  }
  return lp_dense(g, diff, p);
}

double slope_l2_distance(const TransportMap& T, const TransportMap& S) {
  if (T.dim() != S.dim() || T.m() != S.m())
    throw ShapeError("slope_l2_distance: shape mismatch");
  const QuantileGrid& g = *T.grid;
  double total = 0.0;
  for (int i = 0; i < T.dim(); ++i)
    for (int k = 0; k < g.m - 1; ++k) {
      double du = g.nodes[k + 1] - g.nodes[k];
      double st = (T.values(i, k + 1) - T.values(i, k)) / du;
      double ss = (S.values(i, k + 1) - S.values(i, k)) / du;
      total += g.slope_mass[k] * (st - ss) * (st - ss);
    }
  return std::sqrt(total);
}

double grid_function_l2(const QuantileGrid& grid, const MatrixXd& values) {
  if (values.cols() != grid.m)
    throw ShapeError("grid_function_l2: column count must equal grid.m");
  double total = 0.0;
  for (int i = 0; i < values.rows(); ++i) {
    VectorXd row = values.row(i);
    for_each_interval(grid, [&](int, double lo, double hi, int seg) {
      total +=
          affine_sq_mass(segment_affine(grid.nodes, row.data(), seg), lo, hi);
    });
  }
  return std::sqrt(total);
}

void pushforward_moments(const TransportMap& T, VectorXd& mean,
                         VectorXd& std) {
  const QuantileGrid& g = *T.grid;
  mean.resize(T.dim());
  std.resize(T.dim());
  for (int i = 0; i < T.dim(); ++i) {
    VectorXd row = T.values.row(i);
    double m1 = 0.0, m2 = 0.0;
    for_each_interval(g, [&](int, double lo, double hi, int seg) {
      Affine f = segment_affine(g.nodes, row.data(), seg);
      auto mom = gaussian_partial_moments(lo, hi, 2);
      m1 += f.a * mom[0] + f.b * mom[1];
      m2 += f.a * f.a * mom[0] + 2.0 * f.a * f.b * mom[1] + f.b * f.b * mom[2];
    });
    mean[i] = m1;
    std[i] = std::sqrt(std::max(0.0, m2 - m1 * m1));
  }
}

MCQuadrature::MCQuadrature(std::uint64_t seed_, int n_, int dim_)
    : seed(seed_), n(n_), dim(dim_) {
  if (dim < 1) throw ParamError("MCQuadrature: dim must be >= 1");
  if (n % 2 != 0) throw ParamError("MCQuadrature: n_samples must be even");
  if (n < 2 * dim + 2)
    throw ParamError("MCQuadrature: n_samples must be at least 2*dim+2");
  points.resize(n, dim);
  NormalSource src(seed);
  for (int k = 0; k < n / 2; ++k) {
    for (int i = 0; i < dim; ++i) {
      double z = src.next();
      points(2 * k, i) = z;
      points(2 * k + 1, i) = -z;  // antithetic pair
    }
  }
  // moment matching: exact sample mean 0 (antithetic) and covariance I
  MatrixXd cov = points.transpose() * points / static_cast<double>(n);
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw ParamError("MCQuadrature: sample covariance not SPD; increase n");
  points = llt.matrixL().solve(points.transpose()).transpose();
}

MatrixXd push_samples(const TransportMap& T, const MCQuadrature& q) {
  if (q.dim != T.dim()) throw ShapeError("push_samples: dimension mismatch");
  MatrixXd out(q.n, q.dim);
  for (int k = 0; k < q.n; ++k)
    for (int i = 0; i < q.dim; ++i) out(k, i) = T.eval1(i, q.points(k, i));
  return out;
}

void save_map_csv(const TransportMap& T, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InputError("save_map_csv: cannot open " + path);
  f << "i,j,u,t\n";
  for (int i = 0; i < T.dim(); ++i)
    for (int j = 0; j < T.m(); ++j)
      f << i << ',' << j << ',' << format_double(T.grid->nodes[j]) << ','
        << format_double(T.values(i, j)) << '\n';
}

TransportMap load_map_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("load_map_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != "i,j,u,t")
    throw InputError("load_map_csv: bad header in " + path);
  std::vector<std::array<double, 4>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::array<double, 4> r{};
    std::istringstream ss(line);
    std::string tok;
    for (int c = 0; c < 4; ++c) {
      if (!std::getline(ss, tok, ','))
        throw InputError("load_map_csv: short row in " + path);
      r[c] = std::stod(tok);
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw InputError("load_map_csv: no data in " + path);
  int d = 0, m = 0;
  for (auto& r : rows) {
    d = std::max(d, static_cast<int>(r[0]) + 1);
    m = std::max(m, static_cast<int>(r[1]) + 1);
  }
  if (static_cast<int>(rows.size()) != d * m)
    throw InputError("load_map_csv: expected d*m rows in " + path);
  GridPtr grid = make_grid(m);
  MatrixXd v(d, m);
  for (auto& r : rows) {
    int i = static_cast<int>(r[0]), j = static_cast<int>(r[1]);
    if (std::abs(r[2] - grid->nodes[j]) > 1e-9)
      throw InputError("load_map_csv: node column does not match the "
                       "quantile grid in " + path);
    v(i, j) = r[3];
  }
  return TransportMap(std::move(grid), std::move(v));
}

}  // namespace mfvi
