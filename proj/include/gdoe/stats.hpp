#pragma once

#include <cstddef>

namespace gdoe::stats {

/// Standard normal CDF.
double normal_cdf(double x);

/// Inverse standard normal CDF; p is clamped to [1e-9, 1 - 1e-9].
double normal_quantile(double p);

/// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Student-t CDF with `df` degrees of freedom.
double student_t_cdf(double t, double df);

/// One-sided Student-t quantile: the t with P(T <= t) = p, found by
/// bisection on student_t_cdf to |dt| < 1e-10.
double student_t_quantile(double p, double df);

}  // namespace gdoe::stats
