#include "granular/moment_bounds.hpp"

#include "granular/combinatorics.hpp"
#include "granular/errors.hpp"
#include "granular/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace granular::bounds {

namespace {

using logspace::log_add;
using logspace::SignedLog;
using moments::MomentGrid;
using moments::MomentInterval;

constexpr double kInf = std::numeric_limits<double>::infinity();

// One-sided padding for balance-derived endpoints. Wider than the grid's
// closure padding because each step inherits the absolute tolerance of the
// gamma_p quadrature, amplified by 1/(1-gamma_p).
constexpr double kBalancePad = 1e-10;

double end_log(const MomentInterval &iv, Side side) {
    return side == Side::lo ? iv.lo_log : iv.hi_log;
}

Side opposite(Side side) { return side == Side::lo ? Side::hi : Side::lo; }

SignedLog pos_log(double lg) {
    return lg == -kInf ? SignedLog::zero() : SignedLog::positive(lg);
}

SignedLog neg_log(double lg) {
    return lg == -kInf ? SignedLog::zero() : SignedLog::negative(lg);
}

SignedLog negate(const SignedLog &x) { return {-x.sign, x.log_abs}; }

double gain_factor(double beta, double p, double tol) {
    return kernel::gamma_p(beta, p, tol).value;
}

void check_order(double p) {
    if (!(p >= 1.0)) {
        throw DomainError("moment-balance order must satisfy p >= 1");
    }
    MomentGrid::key(p);
}

void require_surplus_inputs(const MomentGrid &grid, double p) {
    std::ostringstream missing;
    bool any = false;
    const int kp = surplus_term_count(p);
    for (int k = 1; k <= kp; ++k) {
        for (double idx : {k + 0.5, p - k, static_cast<double>(k),
                           p - k + 0.5}) {
            if (!grid.has(idx)) {
                missing << (any ? ", " : "") << idx;
                any = true;
            }
        }
    }
    if (any) {
        throw MissingMomentError("surplus of order " + std::to_string(p) +
                                 " needs absent moments at p = " +
                                 missing.str());
    }
}

} // namespace

std::string to_string(ForcingModel model) {
    switch (model) {
    case ForcingModel::PureDiffusion: return "diffusion";
    case ForcingModel::DiffusionFriction: return "diffusion_friction";
    case ForcingModel::NegativeFriction: return "negative_friction";
    case ForcingModel::ShearFlow: return "shear";
    }
    throw DomainError("unknown forcing model");
}

ForcingModel forcing_model_from_string(const std::string &name) {
    if (name == "diffusion") return ForcingModel::PureDiffusion;
    if (name == "diffusion_friction") return ForcingModel::DiffusionFriction;
    if (name == "negative_friction") return ForcingModel::NegativeFriction;
    if (name == "shear") return ForcingModel::ShearFlow;
    throw DomainError("unknown forcing model '" + name +
                      "'; expected one of diffusion, diffusion_friction, "
                      "negative_friction, shear");
}

double tail_order(ForcingModel model) {
    switch (model) {
    case ForcingModel::PureDiffusion:
        return 1.5;
    case ForcingModel::DiffusionFriction:
        return 2.0;
    case ForcingModel::NegativeFriction:
    case ForcingModel::ShearFlow:
        return 1.0;
    }
    throw DomainError("unknown forcing model");
}

double tail_exponent(ForcingModel model) { return 2.0 / tail_order(model); }

void ForcingParams::validate(ForcingModel model) const {
    auto positive = [](double x, const char *name) {
        if (!(x > 0.0) || !std::isfinite(x)) {
            throw DomainError(std::string("forcing parameter ") + name +
                              " must be positive and finite");
        }
    };
    switch (model) {
    case ForcingModel::PureDiffusion:
        positive(mu, "mu");
        break;
    case ForcingModel::DiffusionFriction:
        positive(mu, "mu");
        positive(lambda, "lambda");
        break;
    case ForcingModel::NegativeFriction:
    case ForcingModel::ShearFlow:
        positive(kappa, "kappa");
        break;
    }
}

int surplus_term_count(double p) {
    check_order(p);
    return comb::k_split(p);
}

double surplus_log(const moments::MomentGrid &grid, double p, Side side) {
    const int kp = surplus_term_count(p);
    require_surplus_inputs(grid, p);
    double sum_log = -kInf;
    for (int k = 1; k <= kp; ++k) {
        int sign = 0;
        const double lc = comb::log_abs_gen_binom(p, k, sign);
        const double t1 = end_log(grid.at(k + 0.5), side) +
                          end_log(grid.at(p - k), side);
        const double t2 = end_log(grid.at(k), side) +
                          end_log(grid.at(p - k + 0.5), side);
        sum_log = log_add(sum_log, lc + log_add(t1, t2));
    }
    return sum_log;
}

double surplus(const moments::MomentGrid &grid, double p, Side side) {
    return std::exp(surplus_log(grid, p, side));
}

double surplus_max_term_log(const moments::MomentGrid &grid, double p,
                            Side side) {
    const int kp = surplus_term_count(p);
    require_surplus_inputs(grid, p);
    double max_log = -kInf;
    for (int k = 1; k <= kp; ++k) {
        max_log = std::max(max_log, end_log(grid.at(k + 0.5), side) +
                                        end_log(grid.at(p - k), side));
        max_log = std::max(max_log, end_log(grid.at(k), side) +
                                        end_log(grid.at(p - k + 0.5), side));
    }
    return max_log;
}

logspace::SignedLog forcing_moment_log(ForcingModel model,
                                       const ForcingParams &params,
                                       const moments::MomentGrid &grid,
                                       double p, Side side) {
    check_order(p);
    params.validate(model);
    switch (model) {
    case ForcingModel::PureDiffusion:
        return pos_log(std::log(2.0 * params.mu * p * (2.0 * p + 1.0)) +
                       end_log(grid.at(p - 1.0), side));
    case ForcingModel::DiffusionFriction: {
        const SignedLog gain =
            pos_log(std::log(2.0 * params.mu * p * (2.0 * p + 1.0)) +
                    end_log(grid.at(p - 1.0), side));
        const SignedLog drag =
            neg_log(std::log(2.0 * params.lambda * p) +
                    end_log(grid.at(p), opposite(side)));
        return add(gain, drag);
    }
    case ForcingModel::NegativeFriction:
        return pos_log(std::log(2.0 * params.kappa * p) +
                       end_log(grid.at(p), side));
    case ForcingModel::ShearFlow:
        if (side == Side::lo) {
            throw DomainError(
                "shear forcing admits no lower bound on G_p; only the upper "
                "side is available");
        }
        return pos_log(std::log(2.0 * params.kappa * p) +
                       end_log(grid.at(p), Side::hi));
    }
    throw DomainError("unknown forcing model");
}

double forcing_moment(ForcingModel model, const ForcingParams &params,
                      const moments::MomentGrid &grid, double p, Side side) {
    return forcing_moment_log(model, params, grid, p, side).value();
}

Interval collision_moment_interval(const moments::MomentGrid &grid,
                                   double beta, double p) {
    check_order(p);
    const double gamma = gain_factor(beta, p, 1e-12);
    const MomentInterval &m_next = grid.at(p + 0.5);
    const double s_hi = surplus_log(grid, p, Side::hi);
    const double lo = -std::exp(m_next.hi_log);
    const double hi = -(1.0 - gamma) * std::exp(m_next.lo_log) +
                      gamma * std::exp(s_hi);
    return {lo, hi};
}

double collision_moment_ensemble(const std::vector<Vec3> &points, double beta,
                                 double p, double rel_tol) {
    if (points.size() < 2) {
        throw DomainError("collision moment needs at least two particles");
    }
    const double k = static_cast<double>(points.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            const double speed = norm(points[i] - points[j]);
            if (speed == 0.0) {
                continue;
            }
            const double a_plus =
                kernel::a_plus_moment(points[i], points[j], beta, p, rel_tol);
            const double loss = std::pow(norm2(points[i]), p) +
                                std::pow(norm2(points[j]), p);
            sum += speed * (a_plus - loss);
        }
    }
    return sum / (k * k);
}

std::vector<Vec3> normalize_ensemble(std::vector<Vec3> points) {
    if (points.size() < 2) {
        throw DomainError("cannot normalize an ensemble of fewer than two "
                          "particles");
    }
    Vec3 mean{0.0, 0.0, 0.0};
    for (const Vec3 &v : points) mean = mean + v;
    mean = mean * (1.0 / static_cast<double>(points.size()));
    double m1 = 0.0;
    for (Vec3 &v : points) {
        v = v - mean;
        m1 += norm2(v);
    }
    m1 /= static_cast<double>(points.size());
    if (!(m1 > 0.0)) {
        throw DomainError("ensemble has zero variance after centering");
    }
    const double scale = 1.0 / std::sqrt(m1);
    for (Vec3 &v : points) v = v * scale;
    return points;
}

double ensemble_moment(const std::vector<Vec3> &points, double p) {
    if (points.empty()) {
        throw DomainError("moment of an empty ensemble");
    }
    double sum = 0.0;
    for (const Vec3 &v : points) sum += std::pow(norm2(v), p);
    return sum / static_cast<double>(points.size());
}

moments::MomentGrid ensemble_grid(const std::vector<Vec3> &points,
                                  double p_max) {
    const int top = MomentGrid::key(p_max);
    MomentGrid grid;
    for (int h = 0; h <= top; ++h) {
        const double p = 0.5 * h;
        grid.set(p, MomentInterval::exact(ensemble_moment(points, p)));
    }
    return grid;
}

namespace {

// Upper balance endpoint log((G_p^hi + gamma_p S_p^hi) / (1 - gamma_p));
// +inf when the inputs carry no upper bound yet.
double step_upper_log(const MomentGrid &grid, ForcingModel model,
                      const ForcingParams &params, double gamma, double p) {
    if (1.0 - gamma < 1e-12) {
        throw DomainError("balance upper bound degenerates as gamma_p -> 1; "
                          "p must exceed 1");
    }
    const double s_hi = surplus_log(grid, p, Side::hi);
    const SignedLog g_hi = forcing_moment_log(model, params, grid, p, Side::hi);
    if (s_hi == kInf || (g_hi.sign > 0 && g_hi.log_abs == kInf)) {
        return kInf;
    }
    const SignedLog total = add(g_hi, pos_log(std::log(gamma) + s_hi));
    if (total.sign <= 0) {
        std::ostringstream os;
        os << "steady balance at p = " << p
           << " forces a nonpositive moment; no steady state matches the "
              "seed normalization";
        throw InfeasibleError(os.str());
    }
    return total.log_abs - std::log1p(-gamma) + kBalancePad;
}

// Lower balance endpoint for m_{p+1/2}. The plain bound is G_p^lo; for
// diffusion against drag the balance additionally forces one of
//   m_p >= (mu/lambda)(p+1/2) m_{p-1}   or
//   m_{p+1/2} >= mu p (2p+1) m_{p-1},
// and the first branch transfers to index p+1/2 through power-mean
// monotonicity, so the minimum of the two branches is always valid. -inf
// when nothing positive is known.
double step_lower_log(const MomentGrid &grid, ForcingModel model,
                      const ForcingParams &params, double p) {
    double cand = -kInf;
    if (model != ForcingModel::ShearFlow) {
        const SignedLog g_lo =
            forcing_moment_log(model, params, grid, p, Side::lo);
        if (g_lo.sign > 0) {
            cand = g_lo.log_abs;
        }
    }
    if (model == ForcingModel::DiffusionFriction) {
        const double prev_lo = grid.at(p - 1.0).lo_log;
        if (prev_lo > -kInf) {
            const double direct =
                std::log(params.mu * p * (2.0 * p + 1.0)) + prev_lo;
            const double drag_log =
                std::log(params.mu * (p + 0.5) / params.lambda) + prev_lo;
            const double interpolated = (1.0 + 0.5 / p) * drag_log;
            cand = std::max(cand, std::min(direct, interpolated));
        }
    }
    return cand == -kInf ? -kInf : cand - kBalancePad;
}

// Upper bound for m_2 from the balance at p = 3/2, whose surplus references
// m_{3/2}; with m_{3/2} <= sqrt(m_1 m_2) the balance reads
// m_2 <= A + B sqrt(m_2), and the least upper bound is the fixed point,
// solved in closed form as a quadratic in sqrt(m_2).
double fixed_point_m2_upper_log(const MomentGrid &grid, ForcingModel model,
                                const ForcingParams &params, double gamma) {
    if (1.0 - gamma < 1e-12) {
        throw DomainError("gain factor at p = 3/2 must stay below 1");
    }
    const double m1_hi = std::exp(grid.at(1.0).hi_log);
    const double m_half_hi = std::exp(grid.at(0.5).hi_log);
    double g_const = 0.0;
    double g_sqrt = 0.0;
    switch (model) {
    case ForcingModel::PureDiffusion:
        g_const = 12.0 * params.mu * m_half_hi;
        break;
    case ForcingModel::DiffusionFriction:
        g_const = 12.0 * params.mu * m_half_hi -
                  3.0 * params.lambda * std::exp(grid.at(1.5).lo_log);
        break;
    case ForcingModel::NegativeFriction:
    case ForcingModel::ShearFlow:
        g_sqrt = 3.0 * params.kappa * std::sqrt(m1_hi);
        break;
    }
    const double gain = gamma / (1.0 - gamma) * 1.5;
    const double a = g_const / (1.0 - gamma) + gain * m1_hi * m1_hi;
    const double b =
        g_sqrt / (1.0 - gamma) + gain * std::sqrt(m1_hi) * m_half_hi;
    const double disc = b * b + 4.0 * a;
    if (disc < 0.0) {
        throw InfeasibleError(
            "drag term dominates the m_2 balance; no steady state matches "
            "the seed normalization");
    }
    const double root = 0.5 * (b + std::sqrt(disc));
    if (!(root > 0.0)) {
        throw InfeasibleError("m_2 balance pins the moment at zero; no "
                              "steady state matches the seed normalization");
    }
    return 2.0 * std::log(root) + kBalancePad;
}

} // namespace

moments::MomentInterval steady_balance_interval(const moments::MomentGrid &grid,
                                                ForcingModel model,
                                                const ForcingParams &params,
                                                double beta, double p) {
    check_order(p);
    if (!(p > 1.0)) {
        throw DomainError("steady balance requires p > 1");
    }
    const double gamma = gain_factor(beta, p, 1e-12);
    const double hi = step_upper_log(grid, model, params, gamma, p);
    double lo = -kInf;
    if (model == ForcingModel::ShearFlow) {
        if (grid.has(p + 0.5)) {
            lo = grid.at(p + 0.5).lo_log;
        }
    } else {
        const SignedLog g_lo =
            forcing_moment_log(model, params, grid, p, Side::lo);
        if (g_lo.sign > 0) {
            lo = g_lo.log_abs - kBalancePad;
        }
    }
    if (lo > hi + 1e-9) {
        std::ostringstream os;
        os << "balance bounds cross at p = " << p + 0.5
           << ": the steady inequalities admit no moment there";
        throw InfeasibleError(os.str());
    }
    return MomentInterval{std::min(lo, hi), hi};
}

moments::MomentGrid propagate(ForcingModel model, const ForcingParams &params,
                              double beta, const moments::SeedMoments &seed,
                              double p_max, const PropagateOptions &opts,
                              PropagateDiagnostics *diag) {
    params.validate(model);
    RestitutionParams::from_beta(beta).validate();
    MomentGrid::key(p_max);
    if (!(p_max >= 1.0)) {
        throw DomainError("p_max must be a half-integer >= 1");
    }
    if (diag != nullptr) {
        diag->steps.clear();
    }

    MomentGrid grid = moments::make_seed_grid(seed);
    grid.one_sided = (model == ForcingModel::ShearFlow);
    moments::jensen_closure(grid, opts.max_closure_sweeps);
    if (p_max < 1.5) {
        return grid;
    }

    std::map<int, double> gammas;
    auto gamma_at = [&](double p) {
        const int h = MomentGrid::key(p);
        auto it = gammas.find(h);
        if (it == gammas.end()) {
            it = gammas.emplace(h, gain_factor(beta, p, opts.gamma_tol)).first;
        }
        return it->second;
    };

    // The balance ladder starts at p = 3/2; m_{3/2} itself is only bounded
    // below here, by the p = 1 balance (whose upper side is vacuous since
    // gamma_1 = 1) together with its rearranged surplus form
    // m_{3/2} >= -G_1 - m_1 m_{1/2}, which stays informative when the
    // forcing at p = 1 is drag-dominated.
    {
        double lo = step_lower_log(grid, model, params, 1.0);
        if (model != ForcingModel::ShearFlow) {
            const SignedLog g_hi =
                forcing_moment_log(model, params, grid, 1.0, Side::hi);
            const SignedLog rearranged =
                add(negate(g_hi), neg_log(grid.at(1.0).hi_log +
                                          grid.at(0.5).hi_log));
            if (rearranged.sign > 0) {
                lo = std::max(lo, rearranged.log_abs - kBalancePad);
            }
        }
        grid.set(1.5, MomentInterval{lo, kInf});
        moments::jensen_closure(grid, opts.max_closure_sweeps);
    }

    for (int h = 3; h <= MomentGrid::key(p_max) - 1; ++h) {
        const double p = 0.5 * h;
        const double gamma = gamma_at(p);
        const double lo = step_lower_log(grid, model, params, p);
        const double hi =
            h == 3 ? fixed_point_m2_upper_log(grid, model, params, gamma)
                   : step_upper_log(grid, model, params, gamma, p);
        if (lo > hi + 1e-9) {
            std::ostringstream os;
            os << "balance bounds cross at p = " << p + 0.5
               << ": the steady inequalities admit no moment there";
            throw InfeasibleError(os.str());
        }
        grid.set(p + 0.5, MomentInterval{std::min(lo, hi), hi});
        moments::jensen_closure(grid, opts.max_closure_sweeps);
    }

    // Re-run every balance step against the closed grid until nothing
    // narrows: later steps tighten earlier upper endpoints through the
    // closure, which in turn sharpens the balance bounds themselves.
    for (int pass = 0; pass < 8; ++pass) {
        bool changed = false;
        for (int h = 3; h <= MomentGrid::key(p_max) - 1; ++h) {
            const double p = 0.5 * h;
            const double gamma = gamma_at(p);
            changed |= grid.narrow_hi(
                p + 0.5, step_upper_log(grid, model, params, gamma, p));
            const double lo = step_lower_log(grid, model, params, p);
            if (lo > -kInf) {
                changed |= grid.narrow_lo(p + 0.5, lo);
            }
        }
        if (!changed) {
            break;
        }
        moments::jensen_closure(grid, opts.max_closure_sweeps);
    }

    if (diag != nullptr) {
        const double k_eps = 1.0 / (1.0 - gamma_at(1.5));
        for (int h = 3; h <= MomentGrid::key(p_max) - 1; ++h) {
            const double p = 0.5 * h;
            StepRecord rec;
            rec.p = p;
            rec.gamma = gamma_at(p);
            rec.surplus_hi_log = surplus_log(grid, p, Side::hi);
            rec.max_term_hi_log = surplus_max_term_log(grid, p, Side::hi);
            double g_part;
            if (model == ForcingModel::NegativeFriction ||
                model == ForcingModel::ShearFlow) {
                g_part = std::log(2.0 * k_eps * params.kappa * p) +
                         grid.at(p).hi_log;
            } else {
                g_part =
                    std::log(2.0 * k_eps * params.mu * p * (2.0 * p + 1.0)) +
                    grid.at(p - 1.0).hi_log;
            }
            rec.coarse_upper_log =
                log_add(g_part, std::log(k_eps) + (p + 1.0) * std::log(2.0) +
                                    rec.max_term_hi_log);
            rec.balance_lower_log = grid.at(p + 0.5).lo_log;
            rec.balance_upper_log = grid.at(p + 0.5).hi_log;
            diag->steps.push_back(rec);
        }
    }
    return grid;
}

} // namespace granular::bounds
