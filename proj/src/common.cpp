#include "mfvi/common.hpp"

#include <array>
#include <cstdio>
#include <atomic>
#include <thread>
#include <limits>

namespace mfvi {

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw DomainError("norm_quantile: p must be in (0,1)");

  // Acklam's rational approximation.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley refinement with the exact cdf.
  double e = norm_cdf(x) - p;
  double u = e / norm_pdf(x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

double pairwise_sum(const double* data, std::size_t n) {
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = data[0];
    for (std::size_t i = 1; i < n; ++i) s += data[i];
    return s;
  }
  std::size_t half = n / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

double NormalSource::uniform() {
  // splitmix-style scramble of an LCG-free counter state feeding a 53-bit
  // mantissa; fully pinned, independent of any std library distribution.
  state_ += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z = z ^ (z >> 31);
  return (static_cast<double>(z >> 11) + 1.0) * 0x1.0p-53;  // in (0,1]
}

double NormalSource::next() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double t = 2.0 * M_PI * u2;
  spare_ = r * std::sin(t);
  have_spare_ = true;
  return r * std::cos(t);
}

std::vector<double> gaussian_partial_moments(double a, double b, int kmax) {
  if (kmax < 0) throw ParamError("gaussian_partial_moments: kmax < 0");
  auto cdf = [](double x) {
    return std::isinf(x) ? (x > 0 ? 1.0 : 0.0) : norm_cdf(x);
  };
  auto pdf = [](double x) { return std::isinf(x) ? 0.0 : norm_pdf(x); };
  // boundary terms u^{k-1} phi(u), zero at +-inf for every k
  auto bterm = [&](double x, int k) {
    if (std::isinf(x)) return 0.0;
    return std::pow(x, k) * norm_pdf(x);
  };
  std::vector<double> m(static_cast<std::size_t>(kmax) + 1, 0.0);
  m[0] = cdf(b) - cdf(a);
  if (kmax >= 1) m[1] = pdf(a) - pdf(b);
  for (int k = 2; k <= kmax; ++k)
    m[static_cast<std::size_t>(k)] =
        (k - 1) * m[static_cast<std::size_t>(k - 2)] + bterm(a, k - 1) -
        bterm(b, k - 1);
  return m;
}

namespace {

double simpson(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adapt(const std::function<double(double)>& f, double a, double fa,
             double b, double fb, double m, double fm, double whole,
             double tol, int depth, int force) {
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson(a, fa, m, fm, flm);
  double right = simpson(m, fm, b, fb, frm);
  double delta = left + right - whole;
  // forced initial subdivision guards against probe points that all miss a
  // localized peak; the relative floor keeps the recursion from chasing
  // round-off once the requested tolerance is below machine noise
  double floor = 4.0 * std::numeric_limits<double>::epsilon() *
                 (std::abs(left) + std::abs(right));
  if (force <= 0 &&
      (depth <= 0 || std::abs(delta) <= std::max(15.0 * tol, floor)))
    return left + right + delta / 15.0;
  return adapt(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1,
               force - 1) +
         adapt(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1,
               force - 1);
}

}  // namespace

double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double tol, int max_depth) {
  double m = 0.5 * (a + b);
  double fa = f(a), fb = f(b), fm = f(m);
  double whole = simpson(a, fa, b, fb, fm);
  return adapt(f, a, fa, b, fb, m, fm, whole, tol, max_depth, 7);
}

void run_chunks(std::size_t n, std::size_t chunk, int threads,
                const std::function<void(std::size_t, std::size_t,
                                         std::size_t)>& fn) {
  const std::size_t nc = chunk_count(n, chunk);
  if (threads <= 1 || nc <= 1) {
    for (std::size_t c = 0; c < nc; ++c)
      fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= nc) break;
      fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    }
  };
  std::vector<std::thread> pool;
  int nt = std::min<int>(threads, static_cast<int>(nc));
  pool.reserve(static_cast<std::size_t>(nt));
  for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(const std::string& bytes) {
  std::uint64_t h = fnv1a(bytes);
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string format_double(double x) {
  if (std::isnan(x)) return "null";
  if (std::isinf(x)) return x > 0 ? "1e999" : "-1e999";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

}  // namespace mfvi
