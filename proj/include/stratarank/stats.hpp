#pragma once

#include <vector>

namespace stratarank {

// Regularized incomplete beta via Lentz continued fractions; the usual
// route to F tail probabilities without a stats library.
double incomplete_beta(double a, double b, double x);

double f_cdf(double f, double d1, double d2);
double f_sf(double f, double d1, double d2);  // upper tail
double f_quantile(double p, double d1, double d2);

// two-sided t critical value via the F(1, df) quantile
double t_critical(double alpha, double df);

// Kolmogorov-Smirnov distance of a sample against U(0,1).
double ks_uniform(std::vector<double> sample);

}  // namespace stratarank
