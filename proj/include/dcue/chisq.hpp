#pragma once

namespace dcue {

/// Regularized lower incomplete gamma P(a, x): power series below x = a + 1,
/// Lentz continued fraction for the upper tail above it.
double gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed directly
/// in the tail so small p-values keep their relative accuracy.
double gamma_q(double a, double x);

double chisq_cdf(double x, double df);

/// Upper tail 1 - cdf.
double chisq_sf(double x, double df);

/// Inverse of chisq_cdf by bracketed root finding.
double chisq_quantile(double p, double df);

}  // namespace dcue
