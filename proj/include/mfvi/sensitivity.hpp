#pragma once

// Frechet derivative of the lifted optimizer in the family parameter:
// Galerkin discretization of the bilinear form B in a per-coordinate
// orthonormal Hermite basis, Lax-Milgram solve by dense Cholesky, and
// finite-difference validation.

#include "mfvi/lifted.hpp"
#include "mfvi/potentials.hpp"
#include "mfvi/transport.hpp"

namespace mfvi {

// probabilists' Hermite polynomials, orthonormal in L2(rho_1); he_k' =
// sqrt(k) he_{k-1}
struct HermiteBasis {
  explicit HermiteBasis(int degree);

  int degree;           // K; basis functions he_0 .. he_K
  MatrixXd mono_coeff;  // (K+1) x (K+1); row k = monomial coefficients of he_k

  // values he_0..he_K at u
  VectorXd values(double u) const;
};

struct SensitivitySolution {
  MatrixXd coeffs;  // d x (K+1); S_i = sum_k coeffs(i,k) he_k
  double residual = 0.0;          // ||B c - rhs||
  double matrix_condition = 0.0;  // lambda_max / lambda_min
  double lambda_min = 0.0;
  HermiteBasis basis;

  double eval(int i, double u) const;
  // ||S||_{L2(rho)} from orthonormality
  double l2_norm() const { return coeffs.norm(); }
};

// B[(i,a),(j,b)] = E[ d2V/dxi dxj (T0(u)) he_a(u_i) he_b(u_j) ]
//                  + delta_ij int he_a' he_b' / (T0_i')^2 drho_1,
// MC for the Hessian block (CRN with the solver), exact interval-mass
// quadrature for the derivative block. Result symmetric; Cholesky must
// succeed downstream or AssemblyError.
MatrixXd assemble_bilinear(const TransportMap& T0, const Potential& p0,
                           const HermiteBasis& basis, const MCQuadrature& q);

// rhs[(j,b)] = -E[ (d_theta grad V(T0(u)))_j he_b(u_j) ]
VectorXd assemble_rhs(const ParametricFamily& fam, double theta0,
                      const TransportMap& T0, const HermiteBasis& basis,
                      const MCQuadrature& q);

SensitivitySolution solve_derivative(const ParametricFamily& fam,
                                     double theta0, const TransportMap& T0,
                                     const HermiteBasis& basis,
                                     const MCQuadrature& q);

// node values T0 + (theta - theta0) S; MonotonicityError when the prediction
// extrapolates past monotonicity
TransportMap first_order_predict(const TransportMap& T0,
                                 const SensitivitySolution& S, double theta,
                                 double theta0);

struct FdCheckReport {
  std::vector<double> h;
  std::vector<double> err;  // ||(T^{th0+h} - T^{th0-h})/2h - S||_{L2(rho)}
  double slope = 0.0;       // least-squares slope of log err vs log h
};

FdCheckReport finite_diff_check(const ParametricFamily& fam, double theta0,
                                const std::vector<double>& h_list,
                                const SensitivitySolution& S,
                                const SolverConfig& cfg);

}  // namespace mfvi
