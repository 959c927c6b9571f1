#include "dcue/chisq.hpp"

#include "dcue/error.hpp"
#include "dcue/scalar_min.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace dcue {

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 10000;

double series_p(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int i = 0; i < kMaxIter; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double continued_fraction_q(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

void check_domain(double a, double x) {
  if (!(a > 0) || !(x >= 0) || std::isnan(x)) {
    throw ConfigError("incomplete gamma: need a > 0 and x >= 0");
  }
}

}  // namespace

double gamma_p(double a, double x) {
  check_domain(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return x < a + 1.0 ? series_p(a, x) : 1.0 - continued_fraction_q(a, x);
}

double gamma_q(double a, double x) {
  check_domain(a, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return x < a + 1.0 ? 1.0 - series_p(a, x) : continued_fraction_q(a, x);
}

double chisq_cdf(double x, double df) {
  if (!(df > 0)) throw ConfigError("chi-square: degrees of freedom must be positive");
  if (std::isnan(x) || x < 0) throw ConfigError("chi-square: x must be >= 0");
  return gamma_p(0.5 * df, 0.5 * x);
}

double chisq_sf(double x, double df) {
  if (!(df > 0)) throw ConfigError("chi-square: degrees of freedom must be positive");
  if (std::isnan(x) || x < 0) throw ConfigError("chi-square: x must be >= 0");
  return gamma_q(0.5 * df, 0.5 * x);
}

double chisq_quantile(double p, double df) {
  if (!(p > 0 && p < 1)) throw ConfigError("chi-square quantile: p must lie in (0, 1)");
  if (!(df > 0)) throw ConfigError("chi-square: degrees of freedom must be positive");
  double hi = std::max(1.0, df);
  while (chisq_cdf(hi, df) < p) hi *= 2.0;
  double lo = 0.0;
  // Upper tail is better conditioned for p near 1.
  auto f = [&](double x) { return p > 0.5 ? (1.0 - p) - chisq_sf(x, df) : chisq_cdf(x, df) - p; };
  return brent_root(f, lo, hi, 1e-13 * std::max(1.0, df));
}

}  // namespace dcue
