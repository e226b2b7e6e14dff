#pragma once

#include <map>
#include <optional>
#include <vector>

/**
 * Interval bookkeeping for the even moments m_p = int f |v|^{2p} dv of a
 * normalized distribution (unit mass, zero mean, m_0 = 1) on the half-integer
 * grid p = 0, 1/2, 1, 3/2, ...
 *
 * Endpoints are stored as logarithms: the propagated bounds grow like
 * Gamma(a p + b) q^p and overflow doubles near p ~ 85 already for a = 2.
 * Every derived endpoint is padded by one part in 1e13 toward the safe side,
 * which dominates the rounding of the underlying log/lgamma evaluations, so
 * stored intervals always contain the exactly-rounded ones.
 */
namespace granular::moments {

/// Relative one-sided padding applied to every derived endpoint.
inline constexpr double kPad = 1e-13;

struct MomentInterval {
    double lo_log; // log of lower endpoint, -inf for an absent lower bound
    double hi_log; // log of upper endpoint, +inf for an absent upper bound

    double lo() const;
    double hi() const;

    static MomentInterval exact(double m);
    static MomentInterval from_bounds(double lo, double hi);
    static MomentInterval from_logs(double lo_log, double hi_log);
    static MomentInterval unbounded();
};

class MomentGrid {
public:
    /// Integer key of a half-integer index (key = 2p). Throws DomainError for
    /// indices off the grid.
    static int key(double p);

    bool has(double p) const;
    const MomentInterval &at(double p) const; // throws MissingMomentError
    void set(double p, const MomentInterval &iv);

    /// Narrowing stores: keep the tighter of the stored and offered endpoint.
    /// Return true if the stored interval changed.
    bool narrow_lo(double p, double lo_log);
    bool narrow_hi(double p, double hi_log);

    std::vector<double> indices() const; // ascending
    double p_max() const;
    std::size_t size() const { return data_.size(); }

    /// Lower endpoints of a shear-forced propagation never rise above the
    /// interpolation floor; grids carry that flag so downstream consumers can
    /// restrict growth diagnostics to the informative side.
    bool one_sided = false;

private:
    std::map<int, MomentInterval> data_;
};

/// Starting grid: m_0 = [1,1], m_1 given (possibly as an interval), and the
/// m_{1/2} seed [floor_factor * sqrt(m_1_lo), sqrt(m_1_hi)]. An optional
/// extra point (p0, exact or interval value) may be supplied.
struct SeedMoments {
    double m1_lo = 1.0;
    double m1_hi = 1.0;
    double m_half_floor_factor = 1e-6;
    std::optional<double> p0;
    MomentInterval p0_value = MomentInterval::unbounded();
};

MomentGrid make_seed_grid(const SeedMoments &seed);

/// Fixed-point sweep of the interpolation rules:
///  - power-mean monotonicity (unit mass): m_p >= (m_{p'}^{1/p'})^p for
///    p' < p and m_p <= (m_{p''}^{1/p''})^p for p'' > p;
///  - log-convexity of p -> m_p across stored triples, both interpolation
///    (interior upper bounds) and extrapolation (outer lower bounds).
/// Narrowing only; throws InfeasibleError if endpoints cross by more than
/// rounding slack. Returns the number of sweeps performed.
int jensen_closure(MomentGrid &grid, int max_sweeps = 200);

} // namespace granular::moments
