#pragma once

#include <cmath>
#include <limits>

// Scalar helpers for arithmetic on logarithms of nonnegative quantities.
// Moment magnitudes grow like Gamma(a p + b) q^p and leave the double range
// well before the propagation range does, so sums and products of moments
// are carried as logs throughout the moments module.

namespace granular::logspace {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();
inline constexpr double pos_inf = std::numeric_limits<double>::infinity();

/// log(e^a + e^b), safe for -inf arguments.
inline double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == neg_inf) return a;
    return a + std::log1p(std::exp(b - a));
}

/// log(e^a - e^b) for a >= b; returns -inf when a == b.
inline double log_sub(double a, double b) {
    if (b == neg_inf) return a;
    if (a == b) return neg_inf;
    return a + std::log(-std::expm1(b - a));
}

/// A real number held as sign * e^log_abs. Only the operations required by
/// the forcing/balance expressions (sums of signed log-terms) are provided.
struct SignedLog {
    int sign = 0; // -1, 0, +1
    double log_abs = neg_inf;

    static SignedLog zero() { return {0, neg_inf}; }
    static SignedLog positive(double lg) { return {1, lg}; }
    static SignedLog negative(double lg) { return {-1, lg}; }
    static SignedLog from_value(double x) {
        if (x == 0.0) return zero();
        return {x > 0 ? 1 : -1, std::log(std::fabs(x))};
    }

    double value() const { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }
    bool positive_sign() const { return sign > 0; }
};

inline SignedLog add(const SignedLog &a, const SignedLog &b) {
    if (a.sign == 0) return b;
    if (b.sign == 0) return a;
    if (a.sign == b.sign) return {a.sign, log_add(a.log_abs, b.log_abs)};
    if (a.log_abs == b.log_abs) return SignedLog::zero();
    const SignedLog &big = a.log_abs > b.log_abs ? a : b;
    const SignedLog &small = a.log_abs > b.log_abs ? b : a;
    return {big.sign, log_sub(big.log_abs, small.log_abs)};
}

/// Multiply by a positive factor given as a log.
inline SignedLog scale(const SignedLog &a, double log_factor) {
    if (a.sign == 0) return a;
    return {a.sign, a.log_abs + log_factor};
}

} // namespace granular::logspace
