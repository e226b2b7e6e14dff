#include "granular/normalized_moments.hpp"

#include "granular/combinatorics.hpp"
#include "granular/errors.hpp"
#include "granular/kernel.hpp"
#include "granular/logspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace granular::moments {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double lbeta(double x, double y) {
    return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y);
}

void check_ab(double a, double b) {
    if (!(a >= 1.0) || !std::isfinite(a)) {
        throw DomainError("normalization exponent a must satisfy a >= 1");
    }
    if (!(b > 0.0) || !std::isfinite(b)) {
        throw DomainError("normalization shift b must be positive");
    }
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms = 0.0;
    bool ok = false;
};

LinearFit fit_line(const std::vector<double> &xs, const std::vector<double> &ys) {
    LinearFit f;
    const std::size_t n = xs.size();
    if (n < 2) {
        return f;
    }
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0.0) {
        return f;
    }
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double se = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = ys[i] - (f.intercept + f.slope * xs[i]);
        se += e * e;
    }
    f.rms = std::sqrt(se / n);
    f.ok = true;
    return f;
}

// chi_p C(p, k_p) (B(k_p + a/2 + b, p - k_p + b) + B(k_p + b, p - k_p + a/2 + b)),
// the p-dependent part of the surplus-constant supremum.
double surplus_second_term(double p, double a, double b) {
    const double rounded = std::round(p);
    if (std::abs(p - rounded) < 1e-9 &&
        std::llround(rounded) % 2 != 0) {
        return 0.0;
    }
    const int kp = comb::k_split(p);
    const double lc = std::lgamma(p + 1.0) - std::lgamma(kp + 1.0) -
                      std::lgamma(p - kp + 1.0);
    return std::exp(lc + lbeta(kp + 0.5 * a + b, p - kp + b)) +
           std::exp(lc + lbeta(kp + b, p - kp + 0.5 * a + b));
}

} // namespace

const MomentInterval &NormalizedMoments::at(double p) const {
    auto it = z.find(MomentGrid::key(p));
    if (it == z.end()) {
        std::ostringstream os;
        os << "normalized moment z_" << p << " is not stored";
        throw MissingMomentError(os.str());
    }
    return it->second;
}

std::vector<double> NormalizedMoments::indices() const {
    std::vector<double> out;
    out.reserve(z.size());
    for (const auto &[k, v] : z) {
        out.push_back(0.5 * k);
    }
    return out;
}

NormalizedMoments normalize(const MomentGrid &grid, double a, double b) {
    check_ab(a, b);
    NormalizedMoments out;
    out.a = a;
    out.b = b;
    out.one_sided = grid.one_sided;
    for (double p : grid.indices()) {
        const MomentInterval &m = grid.at(p);
        const double lg = std::lgamma(a * p + b);
        out.z[MomentGrid::key(p)] = MomentInterval{m.lo_log - lg,
                                                   m.hi_log - lg};
    }
    return out;
}

double z_product_max_log(const NormalizedMoments &z, double p) {
    if (!(p > 1.0)) {
        throw DomainError("Z_p requires p > 1");
    }
    MomentGrid::key(p);
    const int kp = comb::k_split(p);
    double best = -kInf;
    for (int k = 1; k <= kp; ++k) {
        best = std::max(best, z.at(k + 0.5).hi_log + z.at(p - k).hi_log);
        best = std::max(best, z.at(k).hi_log + z.at(p - k + 0.5).hi_log);
    }
    return best;
}

double compute_surplus_constant(double a, double b, double coarse_step,
                                double p_tail) {
    check_ab(a, b);
    if (!(coarse_step > 0.0) || !(p_tail > 4.0)) {
        throw DomainError("surplus-constant scan needs coarse_step > 0 and "
                          "p_tail > 4");
    }
    double best = 0.0;
    double best_p = 1.0 + 1e-6;
    for (double p = 1.0 + 1e-6; p <= p_tail; p += coarse_step) {
        const double t = surplus_second_term(p, a, b);
        if (t > best) {
            best = t;
            best_p = p;
        }
    }
    const double lo = std::max(1.0 + 1e-9, best_p - 2.0 * coarse_step);
    const double hi = std::min(p_tail, best_p + 2.0 * coarse_step);
    const int refine = 4000;
    for (int i = 0; i <= refine; ++i) {
        const double p = lo + (hi - lo) * i / refine;
        best = std::max(best, surplus_second_term(p, a, b));
    }
    // Beyond the scan horizon the term decays like 1/p; bound its supremum
    // there by the largest observed p * term(p) near the horizon.
    double envelope = 0.0;
    for (double p = 0.875 * p_tail; p <= p_tail; p += coarse_step) {
        envelope = std::max(envelope, p * surplus_second_term(p, a, b));
    }
    best = std::max(best, envelope / p_tail);
    return std::exp(lbeta(0.5 * a + b, b)) + best;
}

double surplus_normalized_bound_log(const NormalizedMoments &z, double p,
                                    double a_ab) {
    if (!(a_ab > 0.0)) {
        throw DomainError("surplus constant must be positive");
    }
    const double zp = z_product_max_log(z, p);
    if (zp == -kInf) {
        return -kInf;
    }
    return std::log(a_ab) + std::lgamma(z.a * p + 0.5 * z.a + 2.0 * z.b) + zp;
}

double surplus_normalized_bound(const NormalizedMoments &z, double p,
                                double a_ab) {
    return std::exp(surplus_normalized_bound_log(z, p, a_ab));
}

double surplus_normalized_bound(const NormalizedMoments &z, double p) {
    return surplus_normalized_bound(z, p, compute_surplus_constant(z.a, z.b));
}

PropagationConstants compute_propagation_constants(double beta, double a,
                                                   double b, double eps,
                                                   double lambda,
                                                   double p1_scan_max) {
    check_ab(a, b);
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw DomainError("eps must be positive");
    }
    if (!(lambda > 0.0)) {
        throw DomainError("lambda must be positive");
    }
    PropagationConstants out;
    out.eps = eps;
    const double gamma = kernel::gamma_p(beta, 1.0 + eps, 1e-12).value;
    if (1.0 - gamma < 1e-12) {
        throw DomainError("gain factor at 1 + eps is degenerate; eps too "
                          "small");
    }
    out.K_eps = 1.0 / (1.0 - gamma);
    out.A_ab = compute_surplus_constant(a, b);

    const double p_lo = 1.0 + eps;
    const double p_hi = 1e4;
    const int n = 20000;
    double c3 = kInf, C3 = -kInf, C4 = -kInf, c5 = kInf, C5 = -kInf;
    for (int i = 0; i <= n; ++i) {
        const double p = p_lo * std::pow(p_hi / p_lo, double(i) / n);
        const double f3 = 2.0 * p * (2.0 * p + 1.0) /
                          ((a * (p - 1.0) + b) * (a * (p - 1.0) + 1.0 + b));
        const double f4 = 4.0 * (a * p + 0.5 * a + 2.0 * b - 1.0) / (p + 1.0);
        const double f5 = 2.0 * p / (a * p + b);
        c3 = std::min(c3, f3);
        C3 = std::max(C3, f3);
        C4 = std::max(C4, f4);
        c5 = std::min(c5, f5);
        C5 = std::max(C5, f5);
    }
    out.c3 = std::min(c3, 4.0 / (a * a));
    out.C3 = std::max(C3, 4.0 / (a * a));
    out.C4 = std::max(C4, 4.0 * a);
    out.c5 = std::min(c5, 2.0 / a);
    out.C5 = std::max(C5, 2.0 / a);

    const bool friction_form = std::abs(a - 1.0) < 1e-9;
    const long long h0 =
        static_cast<long long>(std::ceil(2.0 * (1.0 + eps) - 1e-9));
    const long long h1 = static_cast<long long>(2.0 * p1_scan_max);
    for (long long h = h0; h <= h1; ++h) {
        const double p = 0.5 * static_cast<double>(h);
        bool ok;
        if (friction_form) {
            const double zfac =
                std::exp(std::lgamma(p - 0.5 + 2.0 * b) -
                         std::lgamma(p + b + 1.0));
            const double loss =
                std::exp(std::lgamma(p + 0.5 + b) - std::lgamma(p + 1.0 + b));
            ok = out.C4 * zfac <= 0.5 * out.c5 * lambda && loss <= 1.0;
        } else {
            const double zfac =
                std::exp(std::lgamma(a * p + 0.5 * a + 2.0 * b - 1.0) -
                         std::lgamma(a * p + 0.5 * a + b));
            ok = out.C4 * out.K_eps * zfac <= 0.5;
        }
        if (ok) {
            out.p1 = p;
            break;
        }
    }
    return out;
}

GrowthFit geometric_check(const NormalizedMoments &z, double p_from) {
    GrowthFit fit;
    std::vector<double> logp, r_hi, r_lo, logp_lo;
    std::vector<double> used_p;
    for (double p : z.indices()) {
        if (p + 1e-9 < p_from || !z.has(p + 0.5)) {
            continue;
        }
        const MomentInterval &cur = z.at(p);
        const MomentInterval &next = z.at(p + 0.5);
        if (std::isfinite(cur.hi_log) && std::isfinite(next.hi_log)) {
            logp.push_back(std::log(p));
            r_hi.push_back(next.hi_log - cur.hi_log);
            used_p.push_back(p);
        }
        if (!z.one_sided && std::isfinite(cur.lo_log) &&
            std::isfinite(next.lo_log)) {
            logp_lo.push_back(std::log(p));
            r_lo.push_back(next.lo_log - cur.lo_log);
        }
    }
    fit.points = static_cast<int>(r_hi.size());
    if (r_hi.size() < 8) {
        return fit;
    }

    const bool two_sided = r_lo.size() >= 8;
    const std::vector<double> &q_src = two_sided ? r_lo : r_hi;
    const double q_log = 2.0 * *std::min_element(q_src.begin(), q_src.end());
    const double big_q_log =
        2.0 * *std::max_element(r_hi.begin(), r_hi.end());
    fit.q = std::exp(q_log);
    fit.Q = std::exp(big_q_log);

    const LinearFit trend_hi = fit_line(logp, r_hi);
    fit.drift_hi = 2.0 * trend_hi.slope;
    if (two_sided) {
        fit.drift_lo = 2.0 * fit_line(logp_lo, r_lo).slope;
    }

    double c_log = kInf, big_c_log = -kInf;
    for (double p : used_p) {
        const MomentInterval &iv = z.at(p);
        const double lo_end = two_sided ? iv.lo_log : iv.hi_log;
        c_log = std::min(c_log, lo_end - p * q_log);
        big_c_log = std::max(big_c_log, iv.hi_log - p * big_q_log);
    }
    fit.c = std::exp(c_log);
    fit.C = std::exp(big_c_log);

    // The true sequence is sandwiched between the endpoint sequences, so a
    // geometric envelope fails in exactly two ways: the upper ratios trend
    // upward (Q escapes) or the lower ratios trend away from a constant
    // (degenerate decay, or growth the lower endpoints already rule out).
    // A downward trend in the upper ratios alone is admissible: interval
    // upper bounds carry a decaying pre-asymptotic surplus, and their
    // supremum ratio then sits at the window start and stays finite.
    const double tol = 1.0 / 6.0;
    fit.holds = std::isfinite(q_log) && std::isfinite(big_q_log) &&
                trend_hi.ok &&
                (two_sided ? (fit.drift_hi <= tol &&
                              std::abs(fit.drift_lo) <= tol)
                           : std::abs(fit.drift_hi) <= tol);
    return fit;
}

TailEstimate estimate_tail_order(const MomentGrid &grid, double s_min,
                                 double s_max, double s_step) {
    if (!(s_min > 0.0) || !(s_max > s_min) || !(s_step > 0.0)) {
        throw DomainError("tail-order scan range is empty");
    }
    const std::vector<double> all = grid.indices();
    if (all.empty() || all.back() < 10.0) {
        throw DomainError("tail-order estimation needs moments up to p >= 10");
    }
    std::vector<double> ps, mids;
    for (double p : all) {
        if (p < 2.0) {
            continue;
        }
        const MomentInterval &iv = grid.at(p);
        if (!std::isfinite(iv.hi_log)) {
            continue;
        }
        const double mid = !grid.one_sided && std::isfinite(iv.lo_log)
                               ? 0.5 * (iv.lo_log + iv.hi_log)
                               : iv.hi_log;
        ps.push_back(p);
        mids.push_back(mid);
    }
    if (ps.size() < 8) {
        throw DomainError("tail-order estimation needs at least 8 usable "
                          "grid points above p = 2");
    }

    TailEstimate est;
    est.one_sided = grid.one_sided;
    est.p_from = ps.front();
    est.p_to = ps.back();
    est.residual = kInf;
    const int steps = static_cast<int>(std::round((s_max - s_min) / s_step));
    std::vector<double> logz(ps.size());
    for (int i = 0; i <= steps; ++i) {
        const double s = s_min + i * s_step;
        const double a = 2.0 / s;
        const double b = std::abs(a - 1.0) < 1.0 / 6.0 ? 1.4 : 0.9;
        for (std::size_t j = 0; j < ps.size(); ++j) {
            logz[j] = mids[j] - std::lgamma(a * ps[j] + b);
        }
        const LinearFit f = fit_line(ps, logz);
        if (f.ok && f.rms < est.residual) {
            est.residual = f.rms;
            est.s = s;
        }
    }
    if (est.s == 0.0) {
        return est;
    }

    const double a_star = 2.0 / est.s;
    std::vector<double> roots;
    const std::size_t quartile = std::max<std::size_t>(2, ps.size() / 4);
    for (std::size_t j = ps.size() - quartile; j < ps.size(); ++j) {
        const double zl = mids[j] - std::lgamma(a_star * ps[j] + 1.0);
        roots.push_back(zl / (a_star * ps[j]));
    }
    std::sort(roots.begin(), roots.end());
    const double med =
        roots.size() % 2 == 1
            ? roots[roots.size() / 2]
            : 0.5 * (roots[roots.size() / 2 - 1] + roots[roots.size() / 2]);
    est.r_star = std::exp(-med);

    const double b_star = std::abs(a_star - 1.0) < 1.0 / 6.0 ? 1.4 : 0.9;
    const NormalizedMoments zn = normalize(grid, std::max(1.0, a_star), b_star);
    const double p_from = std::max(2.0, 0.5 * std::floor(est.p_to));
    est.conclusive = geometric_check(zn, p_from).holds;
    return est;
}

} // namespace granular::moments
