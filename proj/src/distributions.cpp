#include "tdkps/distributions.hpp"

#include "tdkps/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tdkps {

double chi2_even_sf(double x, int half_dof) {
  if (half_dof < 1) throw ArgumentError("chi2_even_sf: degrees of freedom must be positive");
  if (x <= 0.0) return 1.0;
  const double h = 0.5 * x;
  // Poisson(h) cdf at half_dof - 1, summed in log space.
  double log_term = -h;
  double sum = std::exp(log_term);
  for (int i = 1; i < half_dof; ++i) {
    log_term += std::log(h) - std::log(static_cast<double>(i));
    sum += std::exp(log_term);
  }
  return std::min(1.0, sum);
}

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw ArgumentError("incomplete_beta: shape parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double fisher_f_sf(double f, double d1, double d2) {
  if (d1 <= 0.0 || d2 <= 0.0) throw ArgumentError("fisher_f_sf: degrees of freedom must be positive");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return incomplete_beta(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * f));
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace tdkps
