#include "granular/combinatorics.hpp"

#include <cmath>

#include "granular/errors.hpp"
#include "granular/logspace.hpp"

namespace granular::comb {

using logspace::log_add;
using logspace::neg_inf;

double gen_binom(double p, int k) {
    if (k < 0) throw DomainError("gen_binom requires k >= 0");
    double num = 1.0;
    for (int i = 0; i < k; ++i) num *= (p - i) / (i + 1);
    return num;
}

double log_abs_gen_binom(double p, int k, int &sign) {
    if (k < 0) throw DomainError("gen_binom requires k >= 0");
    sign = 1;
    double lg = 0.0;
    for (int i = 0; i < k; ++i) {
        const double factor = p - i;
        if (factor == 0.0) {
            sign = 0;
            return neg_inf;
        }
        if (factor < 0.0) sign = -sign;
        lg += std::log(std::fabs(factor)) - std::log(double(i + 1));
    }
    return lg;
}

int k_split(double p) {
    return int(std::floor((p + 1.0) / 2.0));
}

SandwichBounds binom_sandwich(double p, double x, double y) {
    if (!(p > 1.0)) throw DomainError("binom_sandwich requires p > 1");
    if (!(x >= 0.0 && y >= 0.0))
        throw DomainError("binom_sandwich requires x, y >= 0");

    const int kp = k_split(p);
    const double lx = x > 0.0 ? std::log(x) : neg_inf;
    const double ly = y > 0.0 ? std::log(y) : neg_inf;

    // All coefficients C(p,k), k <= k_p, are positive for p > 1, so the
    // partial sums accumulate in log space without sign tracking.
    double sum_log = neg_inf;       // through k_p - 1
    double sum_full_log = neg_inf;  // through k_p
    for (int k = 1; k <= kp; ++k) {
        int sign = 0;
        const double clog = log_abs_gen_binom(p, k, sign);
        if (sign == 0) continue;
        const double t1 = (lx == neg_inf && k > 0) ? neg_inf : clog + k * lx + (p - k) * ly;
        const double t2 = (ly == neg_inf && k > 0) ? neg_inf : clog + (p - k) * lx + k * ly;
        const double term = log_add(t1, t2);
        sum_full_log = log_add(sum_full_log, term);
        if (k < kp) sum_log = log_add(sum_log, term);
    }

    // middle = (x+y)^p - x^p - y^p. With y the larger argument and
    // t = x/y <= 1 this is y^p ((1+t)^p - 1 - t^p); the expm1 form keeps full
    // relative accuracy through the cancellation when t is tiny.
    double mid_log;
    if (x == 0.0 || y == 0.0) {
        mid_log = neg_inf;
    } else {
        const double lmax = std::max(lx, ly);
        const double lmin = std::min(lx, ly);
        const double plog1pt = p * std::log1p(std::exp(lmin - lmax));
        if (plog1pt > 500.0) {
            mid_log = logspace::log_sub(p * log_add(lx, ly),
                                        log_add(p * lx, p * ly));
        } else {
            const double a = std::expm1(plog1pt);        // (1+t)^p - 1
            const double b = std::exp(p * (lmin - lmax)); // t^p <= a for p > 1
            mid_log = p * lmax + std::log(a - b);
        }
    }

    return {std::exp(sum_log), std::exp(mid_log), std::exp(sum_full_log)};
}

} // namespace granular::comb
