#pragma once

namespace tdkps {

/// Upper tail of chi-squared with 2k degrees of freedom at x:
/// exp(-x/2) * sum_{i<k} (x/2)^i / i!.
double chi2_even_sf(double x, int half_dof);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Upper tail of the F(d1, d2) distribution at f.
double fisher_f_sf(double f, double d1, double d2);

/// Upper tail of the standard normal.
double normal_sf(double z);

}  // namespace tdkps
