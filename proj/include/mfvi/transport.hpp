#pragma once

// Product measures represented as coordinatewise monotone transport maps from
// N(0, I_d): Gaussian quantile grid, piecewise-linear maps with affine tails,
// frozen Monte Carlo quadrature, pushforward and L^p(rho) distances.

#include "mfvi/common.hpp"

#include <memory>
#include <optional>
#include <string>

namespace mfvi {

// Nodes u_j = Phi^{-1}(j/(m+1)), j = 1..m, plus the masses of the m+1
// intervals they cut out of the real line (tails included).
struct QuantileGrid {
  explicit QuantileGrid(int m);

  int m;
  VectorXd nodes;          // strictly increasing, symmetric about 0
  VectorXd interval_mass;  // size m+1; [0] = left tail, [m] = right tail

  // mass of interval j merged with the adjacent tail at the ends; these are
  // the weights the entropy term sees for the m-1 interior slopes
  VectorXd slope_mass;     // size m-1
};

using GridPtr = std::shared_ptr<const QuantileGrid>;

GridPtr make_grid(int m);

// T(u) = (T_1(u_1),...,T_d(u_d)); each T_i piecewise linear through
// (u_j, values(i,j)) with affine tails continuing the end slopes.
struct TransportMap {
  TransportMap(GridPtr grid, MatrixXd values);  // validates monotonicity

  int dim() const { return static_cast<int>(values.rows()); }
  int m() const { return grid->m; }

  GridPtr grid;
  MatrixXd values;  // d x m

  double eval1(int i, double u) const;   // T_i(u)
  double slope1(int i, double u) const;  // T_i'(u), piecewise constant
};

VectorXd eval_map(const TransportMap& T, const VectorXd& u);
VectorXd eval_slope(const TransportMap& T, const VectorXd& u);

TransportMap identity_map(GridPtr grid, int dim);
// t_{i,j} = mean_i + std_i * u_j
TransportMap affine_map(GridPtr grid, const VectorXd& mean,
                        const VectorXd& std);

// Clamp interior slopes into [1/sqrt(beta), 1/sqrt(alpha)], re-anchored to
// preserve the median node value.
TransportMap project_band(const TransportMap& T, double alpha, double beta);

bool in_band(const TransportMap& T, double alpha, double beta,
             double tol = 1e-12);

// (int ||T(u)-S(u)||^p rho(du))^{1/p}. Exact via Gaussian partial moments for
// p = 2 and even integer p; dense tensor quadrature (d <= 3) otherwise.
// Maps on different grids are resampled onto the finer grid.
double lp_distance(const TransportMap& T, const TransportMap& S, double p);

// sqrt(int ||T'(u)-S'(u)||^2 rho(du)), exact from interval masses.
double slope_l2_distance(const TransportMap& T, const TransportMap& S);

// L^2(rho) norm of a (not necessarily monotone) grid function with the same
// piecewise-linear-plus-affine-tails evaluation rule as a map coordinate.
double grid_function_l2(const QuantileGrid& grid, const MatrixXd& values);

// Per-coordinate mean and standard deviation of the pushforward, exact from
// partial moments.
void pushforward_moments(const TransportMap& T, VectorXd& mean, VectorXd& std);

// Frozen standard-Gaussian sample matrix: antithetic pairs, columns exactly
// moment-matched (mean 0, covariance I). n must be even and > dim+1.
struct MCQuadrature {
  MCQuadrature(std::uint64_t seed, int n, int dim);

  std::uint64_t seed;
  int n;
  int dim;
  MatrixXd points;  // n x dim
};

// Row k = T(points_k).
MatrixXd push_samples(const TransportMap& T, const MCQuadrature& q);

// CSV persistence, header "i,j,u,t" (0-based indices).
void save_map_csv(const TransportMap& T, const std::string& path);
TransportMap load_map_csv(const std::string& path);

}  // namespace mfvi
