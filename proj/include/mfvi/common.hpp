#pragma once

// Shared numerics: error types, Gaussian cdf/quantile, deterministic
// summation, seeded normal draws, partial moments of the standard normal.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfvi {

inline constexpr const char* kVersion = "0.1.0";

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EvalError : Error { using Error::Error; };
struct ParamError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct InputError : Error { using Error::Error; };
struct AssemblyError : Error { using Error::Error; };
struct MonotonicityError : Error { using Error::Error; };

struct ConvergenceError : Error {
  ConvergenceError(const std::string& msg, double res, long iters)
      : Error(msg + " (residual=" + std::to_string(res) +
              ", iterations=" + std::to_string(iters) + ")"),
        residual(res), iterations(iters) {}
  double residual;
  long iterations;
};

// ---------------------------------------------------------------------------
// standard normal density / cdf / quantile

inline double norm_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

// Acklam's rational approximation refined with one Halley step; accurate to
// full double precision for p in (0,1).
double norm_quantile(double p);

// ---------------------------------------------------------------------------
// deterministic reductions

// Fixed-order pairwise summation; the reduction used for every MC mean.
double pairwise_sum(const double* data, std::size_t n);

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(v.data(), v.size());
}

inline double pairwise_mean(const std::vector<double>& v) {
  if (v.empty()) throw InputError("pairwise_mean: empty sample");
  return pairwise_sum(v) / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// seeded standard-normal draws (engine-pinned Box-Muller, bit reproducible)

class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}
  double next();

 private:
  double uniform();  // in (0,1)
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// partial moments of rho_1: M_k(a,b) = int_a^b u^k phi(u) du, k = 0..kmax.
// a = -inf and b = +inf are allowed.
std::vector<double> gaussian_partial_moments(double a, double b, int kmax);

// E|Z|^r for Z ~ N(0,1), any r > -1.
inline double gaussian_abs_moment(double r) {
  return std::exp(0.5 * r * std::log(2.0) + std::lgamma(0.5 * (r + 1.0))) /
         std::sqrt(M_PI);
}

// Surface area of the unit sphere in R^d, computed via log-gamma.
inline double sphere_surface_area(int d) {
  if (d < 1) throw ParamError("sphere_surface_area: d must be >= 1");
  return std::exp(std::log(2.0) + 0.5 * d * std::log(M_PI) -
                  std::lgamma(0.5 * d));
}

// ---------------------------------------------------------------------------
// adaptive Simpson quadrature on [a,b]

double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double tol = 1e-12, int max_depth = 60);

// ---------------------------------------------------------------------------
// Fixed-size chunking of [0,n), optionally fanned out over threads. Chunk
// boundaries do not depend on the thread count, so per-chunk partials combined
// in chunk order give bit-identical results for any `threads`.

inline std::size_t chunk_count(std::size_t n, std::size_t chunk) {
  return (n + chunk - 1) / chunk;
}

void run_chunks(std::size_t n, std::size_t chunk, int threads,
                const std::function<void(std::size_t, std::size_t,
                                         std::size_t)>& fn);

// ---------------------------------------------------------------------------
// FNV-1a hash of a byte string, hex-encoded; used for config provenance.
std::uint64_t fnv1a(const std::string& bytes);
std::string hash_hex(const std::string& bytes);

// printf-style %.17g formatting shared by reports and CSV output.
std::string format_double(double x);

}  // namespace mfvi
