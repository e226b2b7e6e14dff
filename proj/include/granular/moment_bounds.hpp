#pragma once

#include "granular/logspace.hpp"
#include "granular/moment_grid.hpp"
#include "granular/vec3.hpp"

#include <optional>
#include <string>
#include <vector>

/**
 * Moment inequalities for the forced inelastic hard-sphere gas and the
 * half-step propagation ladder built on them.
 *
 * Everything is phrased for normalized states: unit mass, zero mean velocity,
 * and a user-supplied second moment m_1. The collision moment Q_p of order p
 * is pinched between -m_{p+1/2} and -(1-gamma_p) m_{p+1/2} + gamma_p S_p,
 * where gamma_p is the angular gain factor of the collision kernel and S_p a
 * bilinear surplus in lower-order moments. Combining the pinch with the
 * steady moment balance 0 = G_p + Q_p for a forcing term G_p gives two-sided
 * bounds on m_{p+1/2} in terms of moments of index <= p, which propagate()
 * iterates up the half-integer grid starting at p = 3/2.
 */
namespace granular::bounds {

enum class ForcingModel {
    PureDiffusion,     // velocity diffusion, G_p = 2 mu p (2p+1) m_{p-1}
    DiffusionFriction, // diffusion against linear drag,
                       //   G_p = -2 lambda p m_p + 2 mu p (2p+1) m_{p-1}
    NegativeFriction,  // linear anti-drag, G_p = 2 kappa p m_p
    ShearFlow,         // uniform shear; only G_p <= 2 kappa p m_p is known
};

std::string to_string(ForcingModel model);
ForcingModel forcing_model_from_string(const std::string &name);

/// Tail order s of the steady state driven by the model: diffusion 3/2,
/// diffusion with friction 2, anti-drag 1. The shear value is the one-sided
/// envelope order (upper moment bounds only).
double tail_order(ForcingModel model);

/// Normalization exponent a = 2 / tail_order(model) under which the steady
/// moment sequence m_p / Gamma(a p + b) grows geometrically.
double tail_exponent(ForcingModel model);

struct ForcingParams {
    double mu = 0.0;     // diffusion strength
    double lambda = 0.0; // drag rate
    double kappa = 0.0;  // anti-drag rate or shear magnitude

    void validate(ForcingModel model) const; // throws DomainError
};

enum class Side { lo, hi };

struct Interval {
    double lo;
    double hi;
    bool contains(double x) const { return lo <= x && x <= hi; }
    double width() const { return hi - lo; }
};

/// Number of surplus terms: k_p = floor((p+1)/2).
int surplus_term_count(double p);

/// S_p = sum_{k=1}^{k_p} C(p,k) (m_{k+1/2} m_{p-k} + m_k m_{p-k+1/2}),
/// evaluated with the requested endpoint of every stored interval.
double surplus(const moments::MomentGrid &grid, double p, Side side);
double surplus_log(const moments::MomentGrid &grid, double p, Side side);

/// M_p = max over the surplus terms of the individual products, and the
/// coarse bound S_p <= 2^{p+1} M_p built from it. Diagnostic companions to
/// surplus(); the ladder itself uses the exact sum.
double surplus_max_term_log(const moments::MomentGrid &grid, double p,
                            Side side);

/// Forcing moment G_p evaluated with the grid endpoints that bound it from
/// the requested side. ShearFlow admits only an upper bound; requesting its
/// lower side throws DomainError.
double forcing_moment(ForcingModel model, const ForcingParams &params,
                      const moments::MomentGrid &grid, double p, Side side);
logspace::SignedLog forcing_moment_log(ForcingModel model,
                                       const ForcingParams &params,
                                       const moments::MomentGrid &grid,
                                       double p, Side side);

/// Interval guaranteed to contain the collision moment Q_p of any state whose
/// moments lie in `grid`:
///   [ -m_{p+1/2}^hi , -(1-gamma_p) m_{p+1/2}^lo + gamma_p S_p^hi ].
Interval collision_moment_interval(const moments::MomentGrid &grid,
                                   double beta, double p);

/// Q_p evaluated exactly for a discrete equal-weight ensemble:
///   (1/2K^2) sum_{i,j} |v_i - v_j| (A_p^+(v_i,v_j) - |v_i|^{2p} - |v_j|^{2p}).
double collision_moment_ensemble(const std::vector<Vec3> &points, double beta,
                                 double p, double rel_tol = 1e-10);

/// Shift to zero mean and rescale to m_1 = 1.
std::vector<Vec3> normalize_ensemble(std::vector<Vec3> points);

/// (1/K) sum_i |v_i|^{2p}.
double ensemble_moment(const std::vector<Vec3> &points, double p);

/// Point-interval grid of ensemble moments for p = 0, 1/2, ..., p_max.
moments::MomentGrid ensemble_grid(const std::vector<Vec3> &points,
                                  double p_max);

/// One balance step: the interval for m_{p+1/2} implied by
///   G_p <= m_{p+1/2} <= (G_p + gamma_p S_p) / (1 - gamma_p)
/// at the stated p > 1. Inputs of index <= p must be present. Throws
/// DomainError when 1 - gamma_p < 1e-12 (p too close to 1). For ShearFlow
/// the lower endpoint falls back to the grid's stored lower bound at p+1/2
/// when present and is otherwise absent.
moments::MomentInterval steady_balance_interval(const moments::MomentGrid &grid,
                                                ForcingModel model,
                                                const ForcingParams &params,
                                                double beta, double p);

struct PropagateOptions {
    double m_half_floor_factor = 1e-6;
    int max_closure_sweeps = 200;
    double gamma_tol = 1e-12; // quadrature tolerance for gamma_p
    bool collect_diagnostics = false;
};

/// Per-step diagnostics of a propagation run (populated on request).
struct StepRecord {
    double p;                  // balance index; the step bounds m_{p+1/2}
    double gamma;              // gain factor gamma_p
    double surplus_hi_log;     // log S_p^hi (exact sum)
    double max_term_hi_log;    // log M_p^hi
    double coarse_upper_log;   // log of K 2^{p+1} M_p + K G-term alternative
    double balance_lower_log;  // stored lower endpoint after the step
    double balance_upper_log;  // stored upper endpoint after the step
};

struct PropagateDiagnostics {
    std::vector<StepRecord> steps;
};

/// Run the steady-state ladder from the normalized seed up to p_max
/// (half-integer >= 1). Balance steps start at p = 3/2; indices below 2 are
/// bounded by the interpolation closure alone, except that the first step
/// closes the m_2 upper bound through a scalar fixed point (its surplus
/// references m_{3/2}, which has no prior upper bound). Throws
/// InfeasibleError if the parameters admit no steady state with the given
/// normalization.
moments::MomentGrid propagate(ForcingModel model, const ForcingParams &params,
                              double beta, const moments::SeedMoments &seed,
                              double p_max, const PropagateOptions &opts = {},
                              PropagateDiagnostics *diag = nullptr);

} // namespace granular::bounds
