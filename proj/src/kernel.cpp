#include "granular/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "granular/errors.hpp"
#include "granular/quadrature.hpp"

namespace granular {

void RestitutionParams::validate() const {
    if (!(e >= 0.0 && e <= 1.0))
        throw DomainError("restitution coefficient must lie in [0, 1]");
}

RestitutionParams RestitutionParams::from_beta(double beta) {
    RestitutionParams p{2.0 * beta - 1.0};
    p.validate();
    return p;
}

namespace kernel {

namespace {

void check_beta(double beta) {
    if (!(beta >= 0.5 && beta <= 1.0))
        throw DomainError("beta must lie in [1/2, 1]");
}

void check_mu(double mu) {
    if (!(mu >= -1.0 && mu <= 1.0))
        throw DomainError("cosine argument must lie in [-1, 1]");
}

} // namespace

double lambda_of_mu(double beta, double mu) {
    check_beta(beta);
    check_mu(mu);
    const double a = (1.0 - beta) * mu;
    return a + std::sqrt(a * a + 2.0 * beta - 1.0);
}

double g_of_mu(double beta, double mu) {
    check_beta(beta);
    check_mu(mu);
    const double a = (1.0 - beta) * mu;
    const double root = std::sqrt(a * a + 2.0 * beta - 1.0); // = lambda - (1-beta) mu
    const double lam = a + root;
    if (root == 0.0) {
        // Only at beta = 1/2, mu <= 0, where lambda = 0 as well; the kernel
        // extends continuously by g = 4 mu_+.
        return std::max(0.0, 4.0 * mu);
    }
    return lam * lam / (beta * root);
}

double g_bar(double beta, double mu) {
    return 0.5 * (g_of_mu(beta, mu) + g_of_mu(beta, -mu));
}

double g_bar_max(double beta) {
    check_beta(beta);
    const double t = 1.0 / beta - 1.0;
    return 1.0 + t * t;
}

GammaResult gamma_p(double beta, double p, double abs_tol) {
    check_beta(beta);
    if (!(p >= 0.0))
        throw DomainError("gamma_p requires p >= 0");
    auto integrand = [beta, p](double z) {
        return 2.0 * g_bar(beta, 2.0 * z - 1.0) * std::pow(z, p);
    };
    using quadrature::gauss_kronrod;
    auto left = gauss_kronrod(integrand, 0.0, 0.5, 0.5 * abs_tol, 0.0);
    auto right = gauss_kronrod(integrand, 0.5, 1.0, 0.5 * abs_tol, 0.0);
    const double err = left.error + right.error;
    if (!left.converged || !right.converged)
        throw QuadratureError("gamma_p quadrature did not reach tolerance", err);
    return {left.value + right.value, err};
}

double gamma_p_elastic(double p) {
    return 2.0 / (p + 1.0);
}

double gamma_p_perfectly_inelastic(double p) {
    return (p * std::pow(2.0, p) + 1.0) /
           (std::pow(2.0, p - 2.0) * (p + 1.0) * (p + 2.0));
}

namespace {

/// Sphere average of |c + r sigma|^{2p} over sigma, reduced to the cosine
/// t = chat.sigma:  (1/2) int_{-1}^{1} (|c|^2 + r^2 + 2 |c| r t)^p dt.
double sphere_power_average(double cnorm, double r, double p, double rel_tol) {
    const double b = 2.0 * cnorm * r;
    if (b == 0.0) return std::pow(cnorm * cnorm + r * r, p);
    const double a = cnorm * cnorm + r * r;
    const double scale = std::pow(a, p);
    return quadrature::integrate(
        [a, b, p](double t) { return 0.5 * std::pow(a + b * t, p); }, -1.0, 1.0,
        rel_tol * scale * 1e-2, rel_tol);
}

} // namespace

double a_plus_moment(const Vec3 &v, const Vec3 &w, double beta, double p,
                     double rel_tol) {
    check_beta(beta);
    if (!(p >= 0.0))
        throw DomainError("a_plus_moment requires p >= 0");
    const Vec3 u = v - w;
    const double su = norm(u);
    const double r = 0.5 * beta * su;
    const Vec3 cv = v - (0.5 * beta) * u;
    const Vec3 cw = w + (0.5 * beta) * u;
    return sphere_power_average(norm(cv), r, p, rel_tol) +
           sphere_power_average(norm(cw), r, p, rel_tol);
}

double a_plus_via_omega(const Vec3 &v, const Vec3 &w, double beta, double p,
                        double rel_tol) {
    check_beta(beta);
    if (!(p >= 0.0))
        throw DomainError("a_plus_via_omega requires p >= 0");
    const Vec3 u = v - w;
    const double su = norm(u);
    if (su == 0.0)
        throw DomainError("a_plus_via_omega: direction nu undefined at u = 0");
    const Vec3 U = 0.5 * (v + w);
    const Vec3 nu = (1.0 / su) * u;
    const double Un = dot(U, nu);           // component of U along nu
    const Vec3 Uperp_v = U - Un * nu;
    const double Uperp = norm(Uperp_v);
    const double U2 = norm2(U);
    const double half_u = 0.5 * su;

    // omega in polar coordinates around nu: nu.omega = mu,
    // U.omega = Un mu + Uperp sqrt(1-mu^2) cos(phi).
    auto azimuthal_average = [&](double mu) {
        const double lam = lambda_of_mu(beta, mu);
        const double g = g_of_mu(beta, mu);
        if (g == 0.0) return 0.0;
        const double rad = lam * half_u;
        const double base = U2 + rad * rad;
        const double axial = 2.0 * rad * Un * mu;
        const double trans = 2.0 * rad * Uperp * std::sqrt(std::max(0.0, 1.0 - mu * mu));
        if (trans == 0.0)
            return g * (std::pow(base + axial, p) + std::pow(base - axial, p));
        // Uniform rule on the periodic azimuthal integrand, doubled until the
        // average stabilizes; smooth periodic integrands converge spectrally.
        double prev = 0.0;
        for (int n = 16; n <= 4096; n *= 2) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k) {
                const double phi = (2.0 * M_PI * (k + 0.5)) / n;
                const double dotp = axial + trans * std::cos(phi);
                acc += std::pow(base + dotp, p) + std::pow(base - dotp, p);
            }
            acc /= n;
            if (n > 16 && std::fabs(acc - prev) <= 0.05 * rel_tol * std::fabs(acc))
                return g * acc;
            prev = acc;
        }
        return g * prev;
    };

    // Polar integral (1/2) int_{-1}^{1} azimuthal_average(mu) dmu, split at
    // mu = 0 where the kernel loses smoothness as beta -> 1/2.
    using quadrature::gauss_kronrod;
    const double scale = std::pow(U2 + half_u * half_u, p) + 1e-300;
    auto left = gauss_kronrod(azimuthal_average, -1.0, 0.0, 0.25 * rel_tol * scale,
                              0.5 * rel_tol);
    auto right = gauss_kronrod(azimuthal_average, 0.0, 1.0, 0.25 * rel_tol * scale,
                               0.5 * rel_tol);
    if (!left.converged || !right.converged)
        throw QuadratureError("a_plus_via_omega polar quadrature did not converge",
                              left.error + right.error);
    return 0.5 * (left.value + right.value);
}

} // namespace kernel
} // namespace granular
