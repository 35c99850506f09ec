#pragma once
// Small numerical utilities shared across the library: normal distribution
// primitives, bracketed 1-D minimization, sequence acceleration, and a
// deterministic random stream with explicit bit-to-double mappings.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fylab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Error taxonomy
// ---------------------------------------------------------------------------
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct domain_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct unsupported_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct bracket_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct analysis_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct not_separable_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Normal distribution: density, CDF, quantile
// ---------------------------------------------------------------------------
inline double norm_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) {
  // erfc-based form keeps relative accuracy deep in the lower tail.
  static const double inv_sqrt2 = 0.7071067811865475244008444;
  return 0.5 * std::erfc(-x * inv_sqrt2);
}

// Quantile of the standard normal. Rational initial guess (Acklam's
// approximation) polished with two Newton steps on the CDF. The upper half
// is reduced to the lower half through the exact complement (1-p is exact
// for p >= 0.5), so the polish always runs where the erfc-based CDF carries
// full relative precision.
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw domain_error("norm_quantile: p outside (0,1)");
  if (p > 0.5) return -norm_quantile(1.0 - p);
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    double e = norm_cdf(x) - p;
    double u = e / norm_pdf(x);
    x = x - u / (1.0 + 0.5 * x * u);  // Halley-flavored Newton step
  }
  return x;
}

// ---------------------------------------------------------------------------
// 1-D minimization: golden-section on a bracket [a,b] holding a unimodal f.
// Fixed iteration count for bit-determinism; 180 iterations shrink any
// bracket by ~1e-37 so the value tolerance is limited by arithmetic alone.
// ---------------------------------------------------------------------------
template <class F>
double golden_min(F&& f, double a, double b, double* argmin = nullptr,
                  int iters = 180) {
  static const double gr = 0.6180339887498948482045868;  // (sqrt(5)-1)/2
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
    if (b - a < 1e-15 * (1.0 + std::fabs(a) + std::fabs(b))) break;
  }
  double x = 0.5 * (a + b);
  double fx = f(x);
  if (fc < fx) { fx = fc; x = c; }
  if (fd < fx) { fx = fd; x = d; }
  if (argmin) *argmin = x;
  return fx;
}

// ---------------------------------------------------------------------------
// Aitken delta-squared acceleration. One pass maps a sequence of length n to
// length n-2; a near-zero denominator (already-converged or exactly constant
// sequences) falls back to the raw tail value.
// ---------------------------------------------------------------------------
inline std::vector<double> aitken(const std::vector<double>& s) {
  std::vector<double> out;
  if (s.size() < 3) return out;
  out.reserve(s.size() - 2);
  for (size_t i = 0; i + 2 < s.size(); ++i) {
    double d1 = s[i + 1] - s[i];
    double d2 = s[i + 2] - s[i + 1];
    double den = d2 - d1;
    if (std::fabs(den) < 1e-14 * std::max(1.0, std::fabs(s[i + 2]))) {
      out.push_back(s[i + 2]);
    } else {
      out.push_back(s[i + 2] - d2 * d2 / den);
    }
  }
  return out;
}

// Extrapolate a sequence with two Aitken passes; returns the last accelerated
// value, guarded against runaway when the sequence is not geometric-like.
inline double aitken_limit(const std::vector<double>& s) {
  if (s.empty()) throw analysis_error("aitken_limit: empty sequence");
  if (s.size() < 3) return s.back();
  std::vector<double> a1 = aitken(s);
  std::vector<double> a2 = aitken(a1);
  double est = !a2.empty() ? a2.back() : a1.back();
  double lo = s[0], hi = s[0];
  for (double v : s) { lo = std::min(lo, v); hi = std::max(hi, v); }
  double span = std::max(hi - lo, 1e-15 * std::max(1.0, std::fabs(s.back())));
  if (est < lo - span || est > hi + span) est = s.back();
  return est;
}

// ---------------------------------------------------------------------------
// Deterministic random stream. mt19937_64 with explicit mappings so results
// do not depend on implementation-defined distribution internals.
// ---------------------------------------------------------------------------
class RandomStream {
 public:
  explicit RandomStream(uint64_t seed) : eng_(seed) {}

  // Uniform on (0,1]: 53 high bits, shifted into (0,1] so log() is safe.
  double uniform_pos() {
    return static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;
  }
  // Uniform on [0,1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (one value per call; pair cached).
  double gauss() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform_pos();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 6.283185307179586476925287 * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  // Uniform point in the d-dimensional unit ball.
  void unit_ball(double* out, size_t d) {
    double nrm2 = 0.0;
    for (size_t i = 0; i < d; ++i) {
      out[i] = gauss();
      nrm2 += out[i] * out[i];
    }
    double nrm = std::sqrt(nrm2);
    if (nrm == 0.0) nrm = 1.0;
    double r = std::pow(uniform_pos(), 1.0 / static_cast<double>(d));
    for (size_t i = 0; i < d; ++i) out[i] = out[i] / nrm * r;
  }
  std::vector<double> unit_ball(int d) {
    std::vector<double> x(static_cast<size_t>(d));
    unit_ball(x.data(), x.size());
    return x;
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Formatting: shortest exact round-trip style for CSV output.
// ---------------------------------------------------------------------------
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

// Dense linear algebra on plain vectors and row slices.
inline double dot(const double* a, const double* b, size_t d) {
  double s = 0.0;
  for (size_t i = 0; i < d; ++i) s += a[i] * b[i];
  return s;
}
inline double nrm2(const double* a, size_t d) { return std::sqrt(dot(a, a, d)); }
inline void axpy(double c, const double* x, double* y, size_t d) {
  for (size_t i = 0; i < d; ++i) y[i] += c * x[i];
}
inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return dot(a.data(), b.data(), a.size());
}
inline double nrm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }
inline void axpy(double c, const std::vector<double>& x, std::vector<double>& y) {
  axpy(c, x.data(), y.data(), y.size());
}

}  // namespace fylab
