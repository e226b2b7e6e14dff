#pragma once

#include <functional>

namespace granular::quadrature {

struct QuadResult {
    double value = 0;
    double error = 0; // absolute error estimate
    int evaluations = 0;
    bool converged = false;
};

/// Adaptive Gauss-Kronrod (7/15 pair) on [a, b]. Subdivides the interval with
/// the largest error estimate first until
///   sum(err) <= max(abs_tol, rel_tol * |sum(value)|)
/// or max_intervals is reached.
QuadResult gauss_kronrod(const std::function<double(double)> &f, double a, double b,
                         double abs_tol, double rel_tol, int max_intervals = 4000);

/// Same, but throws QuadratureError (with the achieved estimate) on
/// non-convergence.
double integrate(const std::function<double(double)> &f, double a, double b,
                 double abs_tol, double rel_tol, int max_intervals = 4000);

} // namespace granular::quadrature
