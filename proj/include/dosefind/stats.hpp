#pragma once

#include <cstddef>
#include <vector>

namespace dosefind {

double normal_cdf(double x);
// Inverse standard normal CDF, p in (0, 1).
double normal_quantile(double p);

// Chi-square quantile with 1 degree of freedom.
double chi2_quantile_1(double level);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

double student_t_cdf(double t, double nu);
double student_t_quantile(double p, double nu);

// Empirical quantile as the ceil(q * B)-th order statistic (1-based), no
// interpolation. Used for bootstrap/critical-value quantiles.
double order_stat_quantile(std::vector<double> values, double q);

// Linear-interpolation sample quantile (R type 7). Used for summaries.
double quantile_type7(std::vector<double> values, double q);

double mean_of(const std::vector<double>& values);
double median_of(std::vector<double> values);
double iqr_of(std::vector<double> values);

}  // namespace dosefind
