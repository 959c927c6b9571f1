#pragma once

#include <functional>

namespace dcue {

struct ScalarMinimum {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
};

/// Brent's method (golden section with parabolic steps) on [a, b]; stops
/// when the bracket half-width drops below tol + 2 eps |x|.
ScalarMinimum brent_minimize(const std::function<double(double)>& f, double a, double b, double tol,
                             int max_iter = 500);

/// Brent-Dekker root of f on [a, b]; requires f(a) f(b) <= 0.
double brent_root(const std::function<double(double)>& f, double a, double b, double tol, int max_iter = 200);

}  // namespace dcue
