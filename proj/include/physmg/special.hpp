#pragma once

namespace physmg::special {

// Standard normal CDF and its inverse. The inverse is accurate to ~1e-13
// (rational approximation refined by one Halley step).
double norm_cdf(double x);
double norm_ppf(double p);

// Regularized incomplete beta I_x(a, b) via Lentz continued fraction.
double betainc(double a, double b, double x);

// Upper-tail survival function of Student's T with nu degrees of freedom.
double student_t_sf(double t, double nu);

}  // namespace physmg::special
