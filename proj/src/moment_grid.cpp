#include "granular/moment_grid.hpp"

#include "granular/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace granular::moments {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Crossings up to this log-distance are rounding artifacts of the closure and
// collapse the interval to a point; anything larger is a real inconsistency.
constexpr double kFeasSlack = 1e-9;

// Minimum log-space improvement for a narrowing step to count. Smaller gains
// are dropped so repeated sweeps cannot shave endpoints indefinitely.
constexpr double kMinGain = 1e-12;

void check_ordered(double lo_log, double hi_log, double p) {
    if (std::isnan(lo_log) || std::isnan(hi_log)) {
        std::ostringstream os;
        os << "moment interval at p=" << p << " has NaN endpoint";
        throw DomainError(os.str());
    }
    if (lo_log > hi_log + kFeasSlack) {
        std::ostringstream os;
        os << "moment interval at p=" << p << " is empty: log bounds ["
           << lo_log << ", " << hi_log << "]";
        throw InfeasibleError(os.str());
    }
}

} // namespace

double MomentInterval::lo() const { return std::exp(lo_log); }
double MomentInterval::hi() const { return std::exp(hi_log); }

MomentInterval MomentInterval::exact(double m) {
    if (!(m > 0.0) || !std::isfinite(m)) {
        throw DomainError("moment value must be positive and finite");
    }
    double l = std::log(m);
    return {l, l};
}

MomentInterval MomentInterval::from_bounds(double lo, double hi) {
    if (!(lo >= 0.0) || !(hi > 0.0) || lo > hi) {
        throw DomainError("moment bounds must satisfy 0 <= lo <= hi, hi > 0");
    }
    return {lo > 0.0 ? std::log(lo) : -kInf, std::log(hi)};
}

MomentInterval MomentInterval::from_logs(double lo_log, double hi_log) {
    check_ordered(lo_log, hi_log, std::nan(""));
    if (lo_log > hi_log) {
        lo_log = hi_log;
    }
    return {lo_log, hi_log};
}

MomentInterval MomentInterval::unbounded() { return {-kInf, kInf}; }

int MomentGrid::key(double p) {
    double two_p = 2.0 * p;
    auto k = std::llround(two_p);
    if (k < 0 || std::abs(two_p - static_cast<double>(k)) > 1e-9) {
        std::ostringstream os;
        os << "moment index " << p << " is not a non-negative half-integer";
        throw DomainError(os.str());
    }
    return static_cast<int>(k);
}

bool MomentGrid::has(double p) const { return data_.count(key(p)) != 0; }

const MomentInterval &MomentGrid::at(double p) const {
    auto it = data_.find(key(p));
    if (it == data_.end()) {
        std::ostringstream os;
        os << "moment m_" << p << " is not stored in the grid";
        throw MissingMomentError(os.str());
    }
    return it->second;
}

void MomentGrid::set(double p, const MomentInterval &iv) {
    check_ordered(iv.lo_log, iv.hi_log, p);
    MomentInterval v = iv;
    if (v.lo_log > v.hi_log) {
        v.lo_log = v.hi_log;
    }
    data_[key(p)] = v;
}

bool MomentGrid::narrow_lo(double p, double lo_log) {
    auto it = data_.find(key(p));
    if (it == data_.end()) {
        throw MissingMomentError("narrow_lo on an absent moment index");
    }
    MomentInterval &iv = it->second;
    if (std::isnan(lo_log) || lo_log <= iv.lo_log + kMinGain) {
        return false;
    }
    check_ordered(lo_log, iv.hi_log, p);
    double clamped = std::min(lo_log, iv.hi_log);
    if (clamped <= iv.lo_log + kMinGain) {
        return false;
    }
    iv.lo_log = clamped;
    return true;
}

bool MomentGrid::narrow_hi(double p, double hi_log) {
    auto it = data_.find(key(p));
    if (it == data_.end()) {
        throw MissingMomentError("narrow_hi on an absent moment index");
    }
    MomentInterval &iv = it->second;
    if (std::isnan(hi_log) || hi_log >= iv.hi_log - kMinGain) {
        return false;
    }
    check_ordered(iv.lo_log, hi_log, p);
    double clamped = std::max(hi_log, iv.lo_log);
    if (clamped >= iv.hi_log - kMinGain) {
        return false;
    }
    iv.hi_log = clamped;
    return true;
}

std::vector<double> MomentGrid::indices() const {
    std::vector<double> out;
    out.reserve(data_.size());
    for (const auto &[k, iv] : data_) {
        out.push_back(0.5 * k);
    }
    return out;
}

double MomentGrid::p_max() const {
    if (data_.empty()) {
        throw MissingMomentError("p_max of an empty grid");
    }
    return 0.5 * data_.rbegin()->first;
}

MomentGrid make_seed_grid(const SeedMoments &seed) {
    if (!(seed.m1_lo > 0.0) || !(seed.m1_hi >= seed.m1_lo) ||
        !std::isfinite(seed.m1_hi)) {
        throw DomainError("seed requires 0 < m1_lo <= m1_hi < inf");
    }
    if (!(seed.m_half_floor_factor > 0.0) || seed.m_half_floor_factor > 1.0) {
        throw DomainError("m_half floor factor must lie in (0, 1]");
    }
    MomentGrid grid;
    grid.set(0.0, MomentInterval::exact(1.0));
    grid.set(1.0, MomentInterval{std::log(seed.m1_lo), std::log(seed.m1_hi)});
    // Cauchy-Schwarz against unit mass pins m_{1/2} <= sqrt(m_1); the lower
    // endpoint is a seed floor, tightened later by the closure sweeps.
    grid.set(0.5, MomentInterval{std::log(seed.m_half_floor_factor) +
                                     0.5 * std::log(seed.m1_lo),
                                 0.5 * std::log(seed.m1_hi) + kPad});
    if (seed.p0) {
        grid.set(*seed.p0, seed.p0_value);
    }
    return grid;
}

int jensen_closure(MomentGrid &grid, int max_sweeps) {
    if (!grid.has(0.0)) {
        throw MissingMomentError("closure requires m_0 in the grid");
    }
    if (max_sweeps < 1) {
        throw DomainError("max_sweeps must be positive");
    }

    int sweeps = 0;
    bool changed = true;
    while (changed && sweeps < max_sweeps) {
        ++sweeps;
        changed = false;
        const std::vector<double> ps = grid.indices();
        const std::size_t n = ps.size();
        for (std::size_t i = 0; i + 2 < n; ++i) {
            for (std::size_t j = i + 1; j + 1 < n; ++j) {
                for (std::size_t k = j + 1; k < n; ++k) {
                    const double pa = ps[i], pb = ps[j], pc = ps[k];
                    const MomentInterval a = grid.at(pa);
                    const MomentInterval b = grid.at(pb);
                    const MomentInterval c = grid.at(pc);

                    // log m_p is convex in p, so the interior point lies
                    // under the chord through the outer upper endpoints.
                    if (std::isfinite(a.hi_log) && std::isfinite(c.hi_log)) {
                        double t = (pb - pa) / (pc - pa);
                        double cand =
                            (1.0 - t) * a.hi_log + t * c.hi_log + kPad;
                        changed |= grid.narrow_hi(pb, cand);
                    }
                    // Chord slopes are nondecreasing: extrapolating past the
                    // right point from below gives a lower bound there,
                    if (std::isfinite(b.lo_log) && std::isfinite(a.hi_log)) {
                        double cand = b.lo_log +
                                      (pc - pb) * (b.lo_log - a.hi_log) /
                                          (pb - pa) -
                                      kPad;
                        changed |= grid.narrow_lo(pc, cand);
                    }
                    // and symmetrically past the left point.
                    if (std::isfinite(b.lo_log) && std::isfinite(c.hi_log)) {
                        double cand = b.lo_log -
                                      (pb - pa) * (c.hi_log - b.lo_log) /
                                          (pc - pb) -
                                      kPad;
                        changed |= grid.narrow_lo(pa, cand);
                    }
                }
            }
        }
    }
    return sweeps;
}

} // namespace granular::moments
