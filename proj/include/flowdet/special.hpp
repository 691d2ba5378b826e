#pragma once

namespace flowdet::special {

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double gamma_p(double a, double x);

// Inverse of gamma_p in x for u in (0, 1).
double gamma_p_inv(double a, double u);

}  // namespace flowdet::special
