#pragma once

namespace morph::dist {

/// Regularized incomplete beta I_x(a, b).
double incbeta(double a, double b, double x);

/// Regularized lower/upper incomplete gamma P(a, x), Q(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

double normal_cdf(double z);
double normal_sf(double z);

/// Student-t CDF/upper tail with df degrees of freedom.
double t_cdf(double t, double df);
double t_sf(double t, double df);

/// F distribution CDF/upper tail.
double f_cdf(double f, double df1, double df2);
double f_sf(double f, double df1, double df2);

/// Chi-square upper tail.
double chi2_sf(double x, double df);

/// Kolmogorov asymptotic survival function Q(lambda) = 2*sum (-1)^{j-1} e^{-2 j^2 lambda^2}.
double kolmogorov_sf(double lambda);

} // namespace morph::dist
