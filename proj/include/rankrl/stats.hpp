#pragma once

#include <cstddef>
#include <span>

namespace rankrl {

double mean_of(std::span<const double> v);
double sample_stddev(std::span<const double> v);
double standard_error(std::span<const double> v);

double pearson(std::span<const double> x, std::span<const double> y);

// Two-sided p-value for Pearson r under the null of no correlation,
// t = r sqrt((n-2)/(1-r^2)) with n-2 degrees of freedom.
double pearson_pvalue(double r, std::size_t n);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// P(|T| > |t|) for Student's t with nu degrees of freedom.
double student_t_two_sided(double t, double nu);

}  // namespace rankrl
