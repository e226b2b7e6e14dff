#pragma once

#include "granular/vec3.hpp"

/**
 * Angular collision kernel of the inelastic hard-sphere model.
 *
 * A binary collision with impact direction sigma transforms velocities as
 *
 *   v' = v + (beta/2) (|u| sigma - u),   w' = w - (beta/2) (|u| sigma - u),
 *
 * where u = v - w and beta = (1+e)/2 is built from the restitution
 * coefficient e. Sphere averages of energy powers after such a collision are
 * controlled by the weight
 *
 *   g_beta(mu)  = lambda^2(mu) / (beta (lambda(mu) - (1-beta) mu)),
 *   lambda(mu)  = (1-beta) mu + sqrt((1-beta)^2 mu^2 + 2 beta - 1),
 *
 * its symmetrization gbar_beta(mu) = (g_beta(mu) + g_beta(-mu))/2, and the
 * angular moments
 *
 *   gamma_p = 2 * int_0^1 gbar_beta(2z - 1) z^p dz,
 *
 * which satisfy gamma_1 = 1, are strictly decreasing in p >= 1, and obey
 * gamma_p < min{1, 4/(p+1)}.
 */
namespace granular {

/// Restitution parameters. beta = (1+e)/2 lies in [1/2, 1]; the endpoints
/// (perfectly inelastic e = 0, elastic e = 1) are admitted as analytic
/// reference cases.
struct RestitutionParams {
    double e;

    double beta() const { return 0.5 * (1.0 + e); }
    void validate() const; // throws DomainError outside e in [0, 1]
    static RestitutionParams from_beta(double beta);
};

namespace kernel {

/// lambda(mu) on mu in [-1, 1]; takes values in [2 beta - 1, 1].
double lambda_of_mu(double beta, double mu);

/// One-sided kernel g_beta(mu).
double g_of_mu(double beta, double mu);

/// Symmetrized kernel gbar_beta(mu) = (g_beta(mu) + g_beta(-mu)) / 2.
double g_bar(double beta, double mu);

/// Upper envelope of gbar_beta: 1 + (1/beta - 1)^2, attained at |mu| = 1.
double g_bar_max(double beta);

struct GammaResult {
    double value;
    double error; // achieved absolute error estimate
};

/// Angular moment gamma_p for p >= 0 by adaptive Gauss-Kronrod on [0, 1],
/// split at z = 1/2 (gbar has a kink there when beta = 1/2). Throws
/// QuadratureError when abs_tol cannot be reached.
GammaResult gamma_p(double beta, double p, double abs_tol = 1e-12);

/// Closed forms at the endpoint kernels, used as independent references:
/// beta = 1 gives gamma_p = 2/(p+1); beta = 1/2 gives
/// gamma_p = (p 2^p + 1) / (2^(p-2) (p+1) (p+2)).
double gamma_p_elastic(double p);
double gamma_p_perfectly_inelastic(double p);

/**
 * Sphere average of post-collisional energy powers,
 *
 *   A+[psi](v, w) = (1/4pi) int_{S^2} (psi(|v'|^2) + psi(|w'|^2)) dsigma
 *
 * with psi(x) = x^p. The azimuthal direction is reduced analytically (each
 * post-collisional energy depends on sigma through a single cosine); the
 * remaining polar integral is evaluated by adaptive Gauss-Kronrod to the
 * given relative tolerance.
 */
double a_plus_moment(const Vec3 &v, const Vec3 &w, double beta, double p,
                     double rel_tol = 1e-10);

/**
 * The same functional through the omega-parametrization of the collision
 * sphere,
 *
 *   A+[psi] = (1/4pi) int_{S^2} g_beta(nu.omega)
 *             { psi(|U + lambda (|u|/2) omega|^2)
 *             + psi(|U - lambda (|u|/2) omega|^2) } domega,
 *
 * with U = (v+w)/2, nu = u/|u| and lambda = lambda(nu.omega). Evaluated by a
 * product rule: adaptive Gauss-Kronrod in the polar cosine times a uniform
 * azimuthal rule refined to convergence. Requires u != 0 (nu undefined
 * otherwise; throws DomainError).
 *
 * Agreement of the two parametrizations is a nontrivial identity and is used
 * as a cross-check throughout the test suite.
 */
double a_plus_via_omega(const Vec3 &v, const Vec3 &w, double beta, double p,
                        double rel_tol = 1e-10);

} // namespace kernel
} // namespace granular
