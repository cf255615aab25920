#pragma once

// Independent ground truth for tests and acceptance: closed-form Gaussian
// MFVI, Gaussian product W2, and a brute-force 2-d grid alternating
// minimization. None of this shares quadrature or representations with the
// solver paths it checks.

#include "mfvi/lifted.hpp"
#include "mfvi/potentials.hpp"

namespace mfvi {

struct GaussianTarget {
  VectorXd mean;
  MatrixXd precision;  // SPD
};

struct GaussianProduct {
  VectorXd mean;
  VectorXd std;  // per-coordinate, > 0
};

// The MFVI optimizer of a Gaussian target keeps the mean and takes the
// diagonal of the precision as marginal precisions.
GaussianProduct gaussian_mfvi(const GaussianTarget& t);

// sqrt(sum (m_i - mt_i)^2 + (s_i - st_i)^2)
double gaussian_product_w2(const GaussianProduct& a, const GaussianProduct& b);

TransportMap map_from_gaussian_product(const GaussianProduct& gp,
                                       GridPtr grid);

// Residual of the mean-field fixed-point equation for a product-Gaussian
// candidate, by dense per-coordinate quadrature: max_j L1 distance between
// the candidate marginal and exp(-E_{-j} V)/Z on the grid.
double gaussian_fixed_point_residual(const GaussianTarget& t,
                                     const GaussianProduct& gp,
                                     int grid_points = 801, double span = 10.0);

struct BruteForceConfig {
  int grid_points = 1025;
  double span = 8.0;  // half-width = span / sqrt(alpha), centered at the mode
  double tol = 1e-10;
  long max_sweeps = 20000;
};

// Alternating exact minimization of the discretized KL on a dense 2-d
// product grid; the discrete analogue of the fixed-point equation.
std::pair<GridDensity, GridDensity> brute_force_mfvi_2d(
    const Potential& p, const BruteForceConfig& cfg = {});

// 1-d W2 between quantile functions, integrated over levels by composite
// Simpson with clipped endpoints.
double w2_1d(const std::function<double(double)>& quantile_a,
             const std::function<double(double)>& quantile_b,
             int panels = 4096, double clip = 1e-12);

double w2_1d_grid_vs_map(const GridDensity& g, const TransportMap& T, int i);

}  // namespace mfvi
