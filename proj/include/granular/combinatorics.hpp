#pragma once

namespace granular::comb {

/// Generalized binomial coefficient for real upper argument,
/// C(p, k) = p (p-1) ... (p-k+1) / k!, with C(p, 0) = 1.
double gen_binom(double p, int k);

/// log |C(p, k)| together with its sign; needed once the coefficient leaves
/// the double range (large k) or the term products do.
double log_abs_gen_binom(double p, int k, int &sign);

/// Split index k_p = floor((p+1)/2) of the binomial decomposition of
/// (x+y)^p - x^p - y^p.
int k_split(double p);

/// Two-sided bounds of the binomial decomposition for p > 1, x, y >= 0:
///
///   sum_{k=1}^{k_p - 1} C(p,k) (x^k y^{p-k} + x^{p-k} y^k)
///     <= (x+y)^p - x^p - y^p <=
///   sum_{k=1}^{k_p}     C(p,k) (x^k y^{p-k} + x^{p-k} y^k)
///
/// with equality on the left when p is an odd integer. Terms are accumulated
/// in log space, so x, y far outside [1e-100, 1e100] are handled without
/// spurious overflow or underflow.
struct SandwichBounds {
    double lower;
    double middle; // (x+y)^p - x^p - y^p
    double upper;
};

SandwichBounds binom_sandwich(double p, double x, double y);

} // namespace granular::comb
