#pragma once

// The lifted convex problem: evaluate and minimize
//   F_V(T) = -sum_i int log T_i' drho_1 + int V(T(u)) rho(du)
// over coordinatewise monotone maps, plus the CAVI fixed-point baseline.

#include "mfvi/potentials.hpp"
#include "mfvi/transport.hpp"

#include <optional>
#include <vector>

namespace mfvi {

struct SolverConfig {
  int grid_m = 64;
  int mc_samples = 20000;
  std::uint64_t seed = 1;
  double tol = 1e-6;  // RMS projected-gradient stop, per node
  long max_iters = 5000;
  int threads = 1;
  std::optional<TransportMap> init_map;  // default: mode-centered 1/sqrt(beta)
  std::string config_hash;
};

struct LiftedSolution {
  TransportMap map;
  double elbo = 0.0;
  double functional_value = 0.0;
  double residual = 0.0;
  long iterations = 0;
  std::string config_hash;
};

// Entropy term uses exact interval masses (tails carry the end slopes); the
// potential term is the MC average over q.
double eval_functional(const TransportMap& T, const Potential& p,
                       const MCQuadrature& q, int threads = 1);

// Exact gradient of the discretized functional w.r.t. node values.
MatrixXd eval_first_variation(const TransportMap& T, const Potential& p,
                              const MCQuadrature& q, int threads = 1);

double elbo(const TransportMap& T, const Potential& p, const MCQuadrature& q,
            int threads = 1);

LiftedSolution solve_lifted(const Potential& p, const SolverConfig& cfg);

// ---------------------------------------------------------------------------
// CAVI baseline on per-coordinate uniform grids

struct GridDensity {
  VectorXd x;        // uniform grid
  VectorXd density;  // nonnegative, trapezoid mass 1
};

double grid_density_mass(const GridDensity& g);
// W2-ready quantile of the grid density at level p in (0,1)
double grid_density_quantile(const GridDensity& g, double p);

struct CaviConfig {
  int grid_points = 513;
  double span = 8.0;  // half-width = span / sqrt(alpha)
  int mc_samples = 2048;
  std::uint64_t seed = 1;
  double tol = 1e-9;  // max per-coordinate L1 density change
  long max_sweeps = 500;
  int grid_m = 64;  // resolution of the returned transport map
  int threads = 1;
};

struct CaviResult {
  std::vector<GridDensity> marginals;
  TransportMap map;
  long sweeps = 0;
  double final_change = 0.0;
};

CaviResult cavi_solve(const Potential& p, const CaviConfig& cfg);

}  // namespace mfvi
