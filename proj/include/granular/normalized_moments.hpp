#pragma once

#include "granular/moment_grid.hpp"

#include <map>
#include <optional>
#include <vector>

/**
 * Analysis layer on top of propagated moment grids: Gamma-normalization
 * z_p = m_p / Gamma(ap + b), the uniform surplus constant A(a,b), the derived
 * ratio constants of the half-step recursion, geometric-growth validation of
 * z_p, and the tail-order/radius estimator built on it.
 *
 * The normalization exponent encodes a hypothesized exponential tail of
 * order s through a = 2/s: the moment sequence of a distribution with tail
 * exp(-r |v|^s) is geometric after dividing by Gamma(ap + b), and degenerates
 * (super-exponential growth or decay of z_p) under any other a. That
 * dichotomy is what geometric_check measures and estimate_tail_order inverts.
 */
namespace granular::moments {

struct GrowthFit {
    double q = 0.0; // per-unit-p lower ratio bound, from squared half-step ratios
    double Q = 0.0; // per-unit-p upper ratio bound
    double c = 0.0; // intercepts making c q^p <= z_p <= C Q^p on the range
    double C = 0.0;
    bool holds = false;
    // Trend of the half-step log-ratios against log p. For z built with
    // normalization exponent a_used while the sequence actually grows like
    // Gamma(a_true p + b), the fitted value estimates a_true - a_used.
    double drift_hi = 0.0;
    double drift_lo = 0.0;
    int points = 0;
};

struct NormalizedMoments {
    double a = 1.0;
    double b = 1.0;
    bool one_sided = false;
    std::map<int, MomentInterval> z; // key = 2p, log-space endpoints
    std::optional<GrowthFit> growth;

    bool has(double p) const { return z.count(MomentGrid::key(p)) != 0; }
    const MomentInterval &at(double p) const;
    std::vector<double> indices() const;
};

/// z_p = m_p / Gamma(ap + b) elementwise; requires a >= 1, b > 0.
NormalizedMoments normalize(const MomentGrid &grid, double a, double b);

/// Z_p = max_{1 <= k <= k_p} { z_{k+1/2} z_{p-k}, z_k z_{p-k+1/2} }, log of
/// the maximum over upper endpoints.
double z_product_max_log(const NormalizedMoments &z, double p);

/// Uniform constant A(a,b) with S_p <= A Gamma(ap + a/2 + 2b) Z_p for all
/// p > 1:
///   A = sup_p [ B(a/2+b, b)
///             + chi_p C(p,k_p) (B(k_p+a/2+b, p-k_p+b) + B(k_p+b, p-k_p+a/2+b)) ]
/// with chi_p = 0 at odd integer p and 1 otherwise. The supremum is taken
/// over a dense p-grid refined around its maximum; the remainder beyond the
/// scan horizon is covered by the 1/p decay envelope of the second term.
double compute_surplus_constant(double a, double b, double coarse_step = 0.01,
                                double p_tail = 400.0);

/// A(a,b) Gamma(ap + a/2 + 2b) Z_p, the surplus bound in moment units.
/// The overload without a precomputed constant computes A(a,b) on the fly.
double surplus_normalized_bound(const NormalizedMoments &z, double p,
                                double a_ab);
double surplus_normalized_bound(const NormalizedMoments &z, double p);
double surplus_normalized_bound_log(const NormalizedMoments &z, double p,
                                    double a_ab);

/// Constants of the half-step recursion in normalized form, all taken over
/// the range p >= 1 + eps:
///   K_eps = 1/(1 - gamma_{1+eps}),
///   c3 <= 2p(2p+1) / ((ap-a+b)(ap+1-a+b)) <= C3,
///   ap + a/2 + 2b - 1 <= C4 (p+1)/4,
///   c5 <= 2p/(ap+b) <= C5,
/// and p1: the smallest half-integer >= 1 + eps from which the Gamma-ratio
/// prefactor of the Z_p term is at most 1/2 (for a = 1, at most
/// c5 lambda / 2, together with monotonicity of the loss-side ratio).
/// p1 is absent when no grid point up to p1_scan_max qualifies; for b well
/// inside the admissible range the threshold can exceed any practical scan.
struct PropagationConstants {
    double eps = 0.5;
    double K_eps = 1.0;
    double A_ab = 0.0;
    double c3 = 0.0, C3 = 0.0;
    double C4 = 0.0;
    double c5 = 0.0, C5 = 0.0;
    std::optional<double> p1;
};

PropagationConstants compute_propagation_constants(double beta, double a,
                                                   double b, double eps = 0.5,
                                                   double lambda = 1.0,
                                                   double p1_scan_max = 1e5);

/// Validate c q^p <= z_p <= C Q^p on p >= p_from: q and Q are the extreme
/// squared half-step ratios of the endpoint sequences, c and C matching
/// intercepts. holds requires at least 8 ratio points, finite positive
/// ratios, and no systematic drift of the log-ratios against log p (the
/// drift estimates the normalization-exponent error and is accepted up to
/// 1/6, half the smallest gap between the candidate exponents 1, 4/3, 2).
GrowthFit geometric_check(const NormalizedMoments &z, double p_from);

struct TailEstimate {
    double s = 0.0;      // tail order whose normalization makes log z_p flattest
    double r_star = 0.0; // tail radius, root test on the top quartile of p
    bool conclusive = false;
    bool one_sided = false; // grid had upper bounds only: read as s >= fitted
    double residual = 0.0;  // RMS deviation of log z_p from linearity at s
    double p_from = 0.0, p_to = 0.0;
};

/// Scan tail orders s on [s_min, s_max] with the given resolution, ties
/// toward smaller s. Interval grids enter through the log-midpoint of each
/// entry (upper endpoint where no lower bound exists). Requires the grid to
/// reach p >= 10.
TailEstimate estimate_tail_order(const MomentGrid &grid, double s_min = 0.5,
                                 double s_max = 2.5, double s_step = 0.01);

} // namespace granular::moments
